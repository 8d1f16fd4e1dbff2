#include "stasmc/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

namespace stasmc {

int Template::initial_index() const {
  int found = -1;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    if (!locations[i].initial) continue;
    if (found >= 0) return -1;
    found = static_cast<int>(i);
  }
  return found;
}

const Location *Template::find_location(const std::string &id) const {
  for (const auto &l : locations)
    if (l.id == id) return &l;
  return nullptr;
}

const Template *Model::find_template(const std::string &name) const {
  for (const auto &t : templates)
    if (t.name == name) return &t;
  return nullptr;
}

bool ValidationReport::has_error(const std::string &code) const {
  return std::any_of(errors.begin(), errors.end(),
                     [&](const Diagnostic &d) { return d.code == code; });
}

std::string to_string(const ValidationReport &report) {
  std::ostringstream os;
  auto emit = [&](const char *sev, const Diagnostic &d) {
    os << sev << ": ";
    if (d.span.line > 0) {
      if (!d.span.file.empty()) os << d.span.file << ':';
      os << d.span.line << ':' << d.span.column << ": ";
    }
    os << d.code << ": " << d.message << '\n';
  };
  for (const auto &d : report.errors) emit("error", d);
  for (const auto &d : report.warnings) emit("warning", d);
  return os.str();
}

ModelError::ModelError(ValidationReport report)
    : std::runtime_error(report.errors.empty() ? std::string("invalid model")
                                               : report.errors.front().code + ": " +
                                                     report.errors.front().message),
      report_(std::move(report)) {}

int Component::location_index(const std::string &id) const {
  for (std::size_t i = 0; i < locations.size(); ++i)
    if (locations[i].name == id) return static_cast<int>(i);
  return -1;
}

int Network::component_index(const std::string &name) const {
  for (std::size_t i = 0; i < components.size(); ++i)
    if (components[i].name == name) return static_cast<int>(i);
  return -1;
}

int Network::channel_index(const std::string &name) const {
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i].name == name) return static_cast<int>(i);
  return -1;
}

int Network::var_index(const std::string &name) const {
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i].name == name) return static_cast<int>(i);
  return -1;
}

int Network::clock_index(const std::string &name) const {
  for (std::size_t i = 0; i < clocks.size(); ++i)
    if (clocks[i].name == name) return static_cast<int>(i);
  return -1;
}

std::optional<Ref> Network::lookup(const std::string &name) const {
  if (auto it = globals_.find(name); it != globals_.end()) return it->second;
  if (name == "time") return Ref{RefKind::Time, -1, -1, {}};
  return std::nullopt;
}

CompiledExpr Network::compile(const Expr &e) const {
  return compile_or_throw(e, [this](const std::string &n) { return lookup(n); });
}

// ---------------------------------------------------------------------------

class NetworkBuilder {
public:
  explicit NetworkBuilder(const Model &m) : model_(m) {}

  ValidationReport report;
  Network net;

  void build() {
    declare_globals();
    check_templates();
    declare_instances();
    compile_instances();
    std::sort(report.errors.begin(), report.errors.end(), diag_less);
    report.errors.erase(std::unique(report.errors.begin(), report.errors.end(), diag_equal),
                        report.errors.end());
    std::sort(report.warnings.begin(), report.warnings.end(), diag_less);
    report.warnings.erase(
        std::unique(report.warnings.begin(), report.warnings.end(), diag_equal),
        report.warnings.end());
  }

private:
  struct Instance {
    const Template *tmpl = nullptr;
    std::string name;
    std::unordered_map<std::string, Ref> locals;
  };

  const Model &model_;
  std::vector<Instance> instances_;
  std::vector<Value> initial_store_;

  static bool diag_less(const Diagnostic &a, const Diagnostic &b) {
    return std::tie(a.span.line, a.span.column, a.code, a.message) <
           std::tie(b.span.line, b.span.column, b.code, b.message);
  }
  static bool diag_equal(const Diagnostic &a, const Diagnostic &b) {
    return a.code == b.code && a.message == b.message && a.span.line == b.span.line &&
           a.span.column == b.span.column;
  }

  void error(std::string code, const SourceSpan &span, std::string msg) {
    report.errors.push_back({std::move(code), span, std::move(msg)});
  }
  void warning(std::string code, const SourceSpan &span, std::string msg) {
    report.warnings.push_back({std::move(code), span, std::move(msg)});
  }

  std::optional<Ref> global(const std::string &name) const { return net.lookup(name); }

  // Evaluates a clock-free initialiser against the store built so far.
  std::optional<Value> const_eval(const Expr &e, const Resolver &resolve) {
    std::vector<std::pair<std::string, SourceSpan>> errs;
    CompiledExpr c = compile(e, resolve, errs);
    for (auto &[msg, span] : errs) error("unknown identifier", span, msg);
    if (!errs.empty()) return std::nullopt;
    if (uses_clocks(c) || uses_random(c)) {
      error("non-constant initialiser", e.span, "initialisers must not use clocks or random()");
      return std::nullopt;
    }
    try {
      EvalEnv env;
      env.vars = initial_store_;
      return eval(c, env);
    } catch (const std::exception &ex) {
      error("evaluation error", e.span, ex.what());
      return std::nullopt;
    }
  }

  bool declare_slot(const Decl &d, const std::string &qualified,
                    std::unordered_map<std::string, Ref> &scope, const std::string &key,
                    const Resolver &resolve) {
    if (scope.count(key)) {
      error("duplicate declaration", d.span, "'" + key + "' is already declared");
      return false;
    }
    switch (d.type) {
    case DeclType::Clock: {
      double init = 0.0;
      if (d.init) {
        if (auto v = const_eval(*d.init, resolve)) {
          if (v->kind == ValueKind::Bool)
            error("type mismatch", d.span, "clock initialiser must be numeric");
          else
            init = v->as_real();
        }
      }
      Ref r{RefKind::Clock, static_cast<int>(net.clocks.size()), -1, {}};
      net.clocks.push_back({qualified, false, init});
      scope[key] = r;
      return true;
    }
    case DeclType::Chan:
    case DeclType::BroadcastChan:
      if (&scope != &net.globals_) {
        error("local channel", d.span, "channels must be declared globally");
        return false;
      }
      net.channels.push_back({qualified, d.type == DeclType::BroadcastChan});
      channel_names_.insert(key);
      return true;
    default: {
      const ValueKind k = d.type == DeclType::Bool  ? ValueKind::Bool
                          : d.type == DeclType::Int ? ValueKind::Int
                                                    : ValueKind::Real;
      Value init = coerce(Value::integer(0), k);
      if (d.init) {
        if (auto v = const_eval(*d.init, resolve)) {
          try {
            init = coerce(*v, k);
          } catch (const std::exception &ex) {
            error("type mismatch", d.span, ex.what());
          }
        }
      }
      Ref r{RefKind::Var, static_cast<int>(net.vars.size()), -1, {}};
      net.vars.push_back({qualified, k, init});
      initial_store_.push_back(init);
      scope[key] = r;
      return true;
    }
    }
  }

  std::set<std::string> channel_names_;

  void declare_globals() {
    Resolver resolve = [this](const std::string &n) { return global(n); };
    for (const auto &d : model_.decls) {
      if (channel_names_.count(d.name)) {
        error("duplicate declaration", d.span, "'" + d.name + "' is already declared");
        continue;
      }
      declare_slot(d, d.name, net.globals_, d.name, resolve);
    }
  }

  void check_templates() {
    std::set<std::string> names;
    for (const auto &t : model_.templates) {
      if (!names.insert(t.name).second)
        error("duplicate template", t.span, "template '" + t.name + "' is defined twice");
      std::set<std::string> locs;
      for (const auto &l : t.locations) {
        if (!locs.insert(l.id).second)
          error("duplicate location", l.span, "location '" + l.id + "' is defined twice in " + t.name);
        if (l.exit_rate && !(*l.exit_rate > 0.0))
          error("nonpositive exit rate", l.span, "exit rate of '" + l.id + "' must be positive");
        if (l.kind == LocationKind::Committed && !l.rates.empty())
          warning("committed rate", l.span, "rates in committed location '" + l.id + "' have no effect");
      }
      const auto initials =
          std::count_if(t.locations.begin(), t.locations.end(), [](auto &l) { return l.initial; });
      if (initials == 0) error("no initial location", t.span, "template '" + t.name + "' has no init location");
      if (initials > 1) error("multiple initial locations", t.span, "template '" + t.name + "' has several init locations");
      for (const auto &e : t.edges) {
        if (!locs.count(e.source))
          error("unknown location", e.span, "edge source '" + e.source + "' is not a location of " + t.name);
        if (!locs.count(e.target))
          error("unknown location", e.span, "edge target '" + e.target + "' is not a location of " + t.name);
        if (!(e.weight > 0.0))
          error("nonpositive weight", e.span, "edge weight must be > 0");
        if (e.sync && !channel_names_.count(e.sync->channel))
          error("unknown channel", e.span, "channel '" + e.sync->channel + "' is not declared");
      }
      std::set<std::string> params;
      for (const auto &p : t.params)
        if (!params.insert(p.name).second)
          error("duplicate parameter", t.span, "parameter '" + p.name + "' repeated in " + t.name);
    }
  }

  void declare_instances() {
    if (model_.system.empty()) error("empty system", {}, "the system declares no instances");
    std::unordered_map<std::string, int> uses;
    for (const auto &inst : model_.system)
      if (inst.instance.empty()) ++uses[inst.template_name];
    std::unordered_map<std::string, int> seen;
    std::set<std::string> instance_names;
    Resolver global_resolve = [this](const std::string &n) { return global(n); };

    for (const auto &inst : model_.system) {
      const Template *t = model_.find_template(inst.template_name);
      if (!t) {
        error("unknown template", inst.span, "template '" + inst.template_name + "' is not defined");
        continue;
      }
      if (inst.args.size() != t->params.size()) {
        error("arity mismatch", inst.span,
              "template '" + t->name + "' expects " + std::to_string(t->params.size()) +
                  " argument(s), got " + std::to_string(inst.args.size()));
        continue;
      }
      Instance in;
      in.tmpl = t;
      in.name = inst.instance;
      if (in.name.empty()) {
        in.name = t->name;
        if (uses[t->name] > 1) in.name += "_" + std::to_string(seen[t->name]++);
      }
      if (!instance_names.insert(in.name).second || global(in.name)) {
        error("duplicate instance", inst.span, "instance name '" + in.name + "' is already used");
        continue;
      }
      for (std::size_t i = 0; i < t->params.size(); ++i) {
        auto v = const_eval(inst.args[i], global_resolve);
        if (!v) continue;
        try {
          in.locals[t->params[i].name] = Ref{RefKind::Const, -1, -1, coerce(*v, t->params[i].type)};
        } catch (const std::exception &ex) {
          error("type mismatch", inst.args[i].span, ex.what());
        }
      }
      Resolver local_resolve = [&](const std::string &n) -> std::optional<Ref> {
        if (auto it = in.locals.find(n); it != in.locals.end()) return it->second;
        return global(n);
      };
      for (const auto &d : t->decls) declare_slot(d, in.name + "." + d.name, in.locals, d.name, local_resolve);

      const int comp = static_cast<int>(instances_.size());
      for (const auto &[key, ref] : in.locals) net.globals_[in.name + "." + key] = ref;
      for (std::size_t l = 0; l < t->locations.size(); ++l) {
        const std::string q = in.name + "." + t->locations[l].id;
        if (in.locals.count(t->locations[l].id)) {
          error("duplicate declaration", t->locations[l].span,
                "location '" + t->locations[l].id + "' clashes with a local name");
          continue;
        }
        net.globals_[q] = Ref{RefKind::Location, comp, static_cast<int>(l), {}};
      }
      instances_.push_back(std::move(in));
    }
  }

  void compile_instances() {
    for (std::size_t ci = 0; ci < instances_.size(); ++ci) {
      const Instance &in = instances_[ci];
      const Template &t = *in.tmpl;
      Resolver resolve = [&](const std::string &n) -> std::optional<Ref> {
        if (auto it = in.locals.find(n); it != in.locals.end()) return it->second;
        return global(n);
      };
      auto comp_expr = [&](const Expr &e) {
        std::vector<std::pair<std::string, SourceSpan>> errs;
        CompiledExpr c = compile(e, resolve, errs);
        for (auto &[msg, span] : errs) error("unknown identifier", span, msg);
        return c;
      };
      auto constraint = [&](const Expr &e, const char *what) {
        CompiledExpr c = comp_expr(e);
        if (!is_linear_constraint(c))
          error("nonlinear clock constraint", e.span,
                std::string(what) + " must be affine in clocks: " + to_string(e));
        if (uses_random(c)) error("random outside update", e.span, "random() is only allowed in updates");
        return c;
      };

      Component comp;
      comp.name = in.name;
      comp.template_name = t.name;
      comp.initial = t.initial_index();
      for (const auto &l : t.locations) {
        NetLocation nl;
        nl.name = l.id;
        nl.committed = l.kind == LocationKind::Committed;
        if (l.invariant) nl.invariant = constraint(*l.invariant, "invariant");
        nl.exit_rate = l.exit_rate.value_or(1.0);
        for (const auto &r : l.rates) {
          auto ref = resolve(r.clock);
          if (!ref || ref->kind != RefKind::Clock) {
            error("unknown clock", l.span, "rate target '" + r.clock + "' is not a clock");
            continue;
          }
          CompiledExpr c = comp_expr(r.rate);
          if (uses_random(c)) error("random outside update", r.rate.span, "random() is only allowed in updates");
          if (uses_clocks(c)) net.clocks[static_cast<std::size_t>(ref->slot)].integrated = true;
          nl.rates.emplace_back(ref->slot, std::move(c));
        }
        comp.locations.push_back(std::move(nl));
      }
      for (const auto &e : t.edges) {
        NetEdge ne;
        ne.source = comp.location_index(e.source);
        ne.target = comp.location_index(e.target);
        ne.label = e.source + "->" + e.target;
        ne.weight = e.weight;
        if (e.guard) ne.guard = constraint(*e.guard, "guard");
        if (e.sync) {
          ne.channel = net.channel_index(e.sync->channel);
          ne.dir = e.sync->dir;
        }
        for (const auto &a : e.updates) {
          auto ref = resolve(a.target);
          NetAssignment na;
          if (!ref || (ref->kind != RefKind::Var && ref->kind != RefKind::Clock)) {
            error(ref ? "assignment to constant" : "unknown identifier", a.span,
                  "'" + a.target + "' is not an assignable variable or clock");
            continue;
          }
          na.to_clock = ref->kind == RefKind::Clock;
          na.slot = ref->slot;
          na.kind = na.to_clock ? ValueKind::Real : net.vars[static_cast<std::size_t>(ref->slot)].kind;
          na.value = comp_expr(a.value);
          ne.updates.push_back(std::move(na));
        }
        if (ne.source >= 0) comp.locations[static_cast<std::size_t>(ne.source)].edges.push_back(
            static_cast<int>(comp.edges.size()));
        comp.edges.push_back(std::move(ne));
      }
      net.components.push_back(std::move(comp));
    }
  }
};

ValidationReport validate_model(const Model &model) {
  NetworkBuilder b(model);
  b.build();
  return std::move(b.report);
}

Network instantiate(const Model &model) {
  NetworkBuilder b(model);
  b.build();
  if (!b.report.ok()) throw ModelError(std::move(b.report));
  return std::move(b.net);
}

} // namespace stasmc
