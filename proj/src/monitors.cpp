#include "stasmc/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stasmc/dsl.hpp"

namespace stasmc {

bool MonitorVerdict::any_failure() const {
  return std::any_of(records.begin(), records.end(), [](const auto &r) { return r.complete && !r.pass; });
}

bool within(double q, double lower, double upper) {
  return q >= lower - compare_tolerance(q, lower) && q <= upper + compare_tolerance(q, upper);
}

std::vector<OccurrenceRecord> measure_execution(const EventLog &log, double lower, double upper) {
  std::vector<OccurrenceRecord> out;
  bool running = false, preempted = false;
  double start = 0.0, held = 0.0, preempt_at = 0.0;
  for (const auto &o : log) {
    if (o.role == "start") {
      if (running) throw MalformedTrace("start at t=" + std::to_string(o.time) + " while running");
      running = true;
      preempted = false;
      start = o.time;
      held = 0.0;
    } else if (o.role == "preempt") {
      if (!running || preempted) throw MalformedTrace("preempt without running execution");
      preempted = true;
      preempt_at = o.time;
    } else if (o.role == "resume") {
      if (!preempted) throw MalformedTrace("resume without preempt at t=" + std::to_string(o.time));
      preempted = false;
      held += o.time - preempt_at;
    } else if (o.role == "stop") {
      if (!running) throw MalformedTrace("stop without start at t=" + std::to_string(o.time));
      if (preempted) held += o.time - preempt_at;
      const double q = (o.time - start) - held;
      out.push_back(OccurrenceRecord{static_cast<int>(out.size()), q, within(q, lower, upper), true});
      running = preempted = false;
    }
  }
  return out;
}

std::vector<OccurrenceRecord> measure_synchronization(const EventLog &log, int streams, double tolerance) {
  std::vector<std::vector<double>> arrivals(static_cast<std::size_t>(streams));
  for (const auto &o : log) {
    if (o.role.size() < 2 || o.role[0] != 'e') continue;
    const int j = std::stoi(o.role.substr(1)) - 1;
    if (j < 0 || j >= streams) continue;
    arrivals[static_cast<std::size_t>(j)].push_back(o.time);
  }
  std::size_t longest = 0;
  for (const auto &a : arrivals) longest = std::max(longest, a.size());
  std::vector<OccurrenceRecord> out;
  for (std::size_t i = 0; i < longest; ++i) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    bool complete = true;
    for (const auto &a : arrivals) {
      if (i >= a.size()) {
        complete = false;
        continue;
      }
      lo = std::min(lo, a[i]);
      hi = std::max(hi, a[i]);
    }
    const double q = hi - lo;
    out.push_back(OccurrenceRecord{static_cast<int>(i), q, complete && within(q, 0.0, tolerance), complete});
  }
  return out;
}

std::vector<OccurrenceRecord> measure_periodic(const EventLog &log, double lower, double upper, double jitter) {
  std::vector<double> times;
  for (const auto &o : log)
    if (o.role == "occurrence") times.push_back(o.time);
  std::vector<OccurrenceRecord> out;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double q = times[i] - times[i - 1];
    out.push_back(OccurrenceRecord{static_cast<int>(i - 1), q, within(q, lower - jitter, upper + jitter), true});
  }
  return out;
}

std::vector<OccurrenceRecord> measure_end_to_end(const EventLog &log, double lower, double upper) {
  std::vector<double> sources, targets;
  for (const auto &o : log) {
    if (o.role == "source") sources.push_back(o.time);
    else if (o.role == "target") targets.push_back(o.time);
  }
  std::vector<OccurrenceRecord> out;
  const std::size_t n = std::min(sources.size(), targets.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double q = targets[i] - sources[i];
    if (q < 0.0)
      throw MalformedTrace("target " + std::to_string(i) + " at t=" + std::to_string(targets[i]) +
                           " precedes its source");
    out.push_back(OccurrenceRecord{static_cast<int>(i), q, within(q, lower, upper), true});
  }
  if (targets.size() > sources.size())
    throw MalformedTrace("target at t=" + std::to_string(targets[n]) + " has no source");
  return out;
}

WhJudgement wh_judge(const std::vector<bool> &passes, int m, int k, ShortWindowPolicy policy) {
  if (m < 1 || m > k) throw std::invalid_argument("wh_judge requires 1 <= m <= k");
  WhJudgement j;
  const auto len = static_cast<int>(passes.size());
  if (len < k) {
    if (policy == ShortWindowPolicy::VacuouslyTrue || len == 0) return j;
    const int need = (m * len + k - 1) / k;
    const auto got = static_cast<int>(std::count(passes.begin(), passes.end(), true));
    if (got < need) {
      j.holds = false;
      j.first_violation = 0;
    }
    return j;
  }
  int sum = static_cast<int>(std::count(passes.begin(), passes.begin() + k, true));
  for (int i = 0;; ++i) {
    if (sum < m) {
      j.holds = false;
      j.first_violation = i;
      return j;
    }
    if (i + k >= len) return j;
    sum += static_cast<int>(passes[static_cast<std::size_t>(i + k)]) -
           static_cast<int>(passes[static_cast<std::size_t>(i)]);
  }
}

MonitorVerdict check_events(const EventLog &log, const WhConstraint &c) {
  MonitorVerdict v;
  v.constraint = c.name;
  switch (c.kind) {
  case ConstraintKind::Execution:
    v.records = measure_execution(log, c.lower, c.upper);
    break;
  case ConstraintKind::Synchronization:
    v.records = measure_synchronization(log, static_cast<int>(c.streams.size()), c.tolerance);
    break;
  case ConstraintKind::Periodic:
    v.records = measure_periodic(log, c.lower, c.upper, c.jitter);
    break;
  case ConstraintKind::EndToEnd:
    v.records = measure_end_to_end(log, c.lower, c.upper);
    break;
  }
  std::vector<bool> passes;
  for (const auto &r : v.records)
    if (r.complete) passes.push_back(r.pass);
  const WhJudgement j = wh_judge(passes, c.m, c.k, c.short_window);
  v.wh_holds = j.holds;
  v.first_violation = j.first_violation;
  return v;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<std::string, const EventBinding *>> roles_of(const WhConstraint &c) {
  std::vector<std::pair<std::string, const EventBinding *>> out;
  if (c.kind == ConstraintKind::Synchronization) {
    for (std::size_t i = 0; i < c.streams.size(); ++i)
      out.emplace_back("e" + std::to_string(i + 1), &c.streams[i]);
  } else {
    for (const auto &[role, b] : c.events) out.emplace_back(role, &b);
  }
  return out;
}

} // namespace

EventRecorder::EventRecorder(const Network &net, const WhConstraint &c) {
  for (const auto &[role, b] : roles_of(c)) {
    Binding x;
    x.role = role;
    if (b->is_channel()) {
      x.channel = net.channel_index(b->channel);
      if (x.channel < 0) throw std::invalid_argument("unknown channel '" + b->channel + "' in " + c.name);
    } else {
      x.predicate = net.compile(*b->predicate);
    }
    bindings_.push_back(std::move(x));
  }
}

void EventRecorder::on_initial(const State &s) {
  for (auto &b : bindings_)
    if (b.predicate) b.last = eval_bool(*b.predicate, s.env());
}

void EventRecorder::on_event(const State &s, const StepInfo &info) {
  for (auto &b : bindings_) {
    if (b.predicate) {
      const bool now = eval_bool(*b.predicate, s.env());
      if (now && !b.last) log_.push_back(Occurrence{s.time, b.role});
      b.last = now;
    } else if (info.channel == b.channel) {
      log_.push_back(Occurrence{info.time, b.role});
    }
  }
}

EventLog extract_events(const Trace &trace, const Network &net, const WhConstraint &c) {
  EventLog log;
  std::vector<std::pair<std::string, int>> channels;
  for (const auto &[role, b] : roles_of(c)) {
    if (!b->is_channel()) throw std::invalid_argument("predicate binding needs a live run: " + c.name);
    const int ch = net.channel_index(b->channel);
    if (ch < 0) throw std::invalid_argument("unknown channel '" + b->channel + "' in " + c.name);
    channels.emplace_back(role, ch);
  }
  for (const auto &ev : trace.events)
    for (const auto &[role, ch] : channels)
      if (ev.channel == ch) log.push_back(Occurrence{ev.time, role});
  return log;
}

MonitorVerdict check_trace(const Trace &trace, const Network &net, const WhConstraint &c) {
  return check_events(extract_events(trace, net, c), c);
}

// ---------------------------------------------------------------------------
// Observer templates

namespace {

std::string num(double v) {
  std::string s = format_real(v);
  if (s.find_first_of(".eE") == std::string::npos && s.find("inf") == std::string::npos) s += ".0";
  return s;
}

class Builder {
public:
  explicit Builder(std::string name) { t_.name = std::move(name); }

  void clock(const std::string &name) { decl(DeclType::Clock, name, std::nullopt); }
  void var(DeclType type, const std::string &name, const std::string &init) { decl(type, name, parse_expr(init)); }

  void loc(const std::string &id, bool initial = false, const std::string &rate_clock = "", double rate = 1.0) {
    Location l;
    l.id = id;
    l.initial = initial;
    if (!rate_clock.empty()) l.rates.push_back(RateDef{rate_clock, Expr::lit(Value::real(rate))});
    t_.locations.push_back(std::move(l));
  }

  void edge(const std::string &from, const std::string &to, const std::string &channel, const std::string &guard,
            const std::vector<std::pair<std::string, std::string>> &updates = {}) {
    Edge e;
    e.source = from;
    e.target = to;
    e.sync = Sync{channel, SyncDir::Receive};
    if (!guard.empty()) e.guard = parse_expr(guard);
    for (const auto &[target, value] : updates) e.updates.push_back(Assignment{target, parse_expr(value), {}});
    t_.edges.push_back(std::move(e));
  }

  Template take() { return std::move(t_); }

private:
  void decl(DeclType type, const std::string &name, std::optional<Expr> init) {
    Decl d;
    d.type = type;
    d.name = name;
    d.init = std::move(init);
    t_.decls.push_back(std::move(d));
  }
  Template t_;
};

const std::string &channel_of(const WhConstraint &c, const std::string &role) {
  const EventBinding *b = c.event(role);
  if (!b) throw std::invalid_argument(c.name + ": missing binding for '" + role + "'");
  if (!b->is_channel()) throw std::invalid_argument(c.name + ": unbindable channel for '" + role + "' (predicate)");
  return b->channel;
}

std::string band(const std::string &clk, double lo, double hi) {
  return clk + " >= " + num(lo) + " && " + clk + " <= " + num(hi);
}

std::string outside(const std::string &clk, double lo, double hi) {
  return clk + " < " + num(lo) + " || " + clk + " > " + num(hi);
}

Template execution_observer(const WhConstraint &c) {
  Builder b(c.name + "_obs");
  b.clock("execclk");
  b.loc("idle", true);
  b.loc("exec", false, "execclk", 1.0);
  b.loc("preempted", false, "execclk", 0.0);
  b.loc("success");
  b.loc("fail");
  const std::string &start = channel_of(c, "start"), &stop = channel_of(c, "stop");
  for (const char *from : {"idle", "success", "fail"}) b.edge(from, "exec", start, "", {{"execclk", "0"}});
  for (const char *from : {"exec", "preempted"}) {
    b.edge(from, "success", stop, band("execclk", c.lower, c.upper));
    b.edge(from, "fail", stop, outside("execclk", c.lower, c.upper));
  }
  if (c.event("preempt")) {
    b.edge("exec", "preempted", channel_of(c, "preempt"), "");
    b.edge("preempted", "exec", channel_of(c, "resume"), "");
  }
  return b.take();
}

Template periodic_observer(const WhConstraint &c) {
  Builder b(c.name + "_obs");
  b.clock("pclk");
  b.loc("firstoccurrence", true);
  b.loc("counting");
  b.loc("success");
  b.loc("fail");
  const std::string &occ = channel_of(c, "occurrence");
  const double lo = c.lower - c.jitter, hi = c.upper + c.jitter;
  b.edge("firstoccurrence", "counting", occ, "", {{"pclk", "0"}});
  for (const char *from : {"counting", "success", "fail"}) {
    b.edge(from, "success", occ, band("pclk", lo, hi), {{"pclk", "0"}});
    b.edge(from, "fail", occ, outside("pclk", lo, hi), {{"pclk", "0"}});
  }
  return b.take();
}

Template end_to_end_observer(const WhConstraint &c) {
  Builder b(c.name + "_obs");
  b.clock("dclk");
  // dclk only runs while a source awaits its target.
  b.loc("wait", true, "dclk", 0.0);
  b.loc("measuring", false, "dclk", 1.0);
  b.loc("success", false, "dclk", 0.0);
  b.loc("fail", false, "dclk", 0.0);
  const std::string &src = channel_of(c, "source"), &dst = channel_of(c, "target");
  for (const char *from : {"wait", "success", "fail"}) b.edge(from, "measuring", src, "", {{"dclk", "0"}});
  b.edge("measuring", "success", dst, band("dclk", c.lower, c.upper));
  b.edge("measuring", "fail", dst, outside("dclk", c.lower, c.upper));
  // A second source before the target breaks the one-to-one pattern.
  b.edge("measuring", "fail", src, "");
  return b.take();
}

Template synchronization_observer(const WhConstraint &c) {
  Builder b(c.name + "_obs");
  const auto n = static_cast<int>(c.streams.size());
  b.clock("sclk");
  b.var(DeclType::Int, "cnt", "0");
  for (int j = 1; j <= n; ++j) b.var(DeclType::Bool, "f" + std::to_string(j), "false");
  b.loc("idle", true);
  b.loc("collecting");
  b.loc("success");
  b.loc("fail");

  auto reset_flags = [&](std::vector<std::pair<std::string, std::string>> ups) {
    for (int j = 1; j <= n; ++j) ups.emplace_back("f" + std::to_string(j), "false");
    ups.emplace_back("cnt", "0");
    return ups;
  };
  for (int j = 1; j <= n; ++j) {
    const EventBinding &bind = c.streams[static_cast<std::size_t>(j - 1)];
    if (!bind.is_channel()) throw std::invalid_argument(c.name + ": unbindable channel for e" + std::to_string(j));
    const std::string &ch = bind.channel;
    const std::string fj = "f" + std::to_string(j);
    std::vector<std::pair<std::string, std::string>> first = {{"sclk", "0"}, {"cnt", "1"}};
    for (int i = 1; i <= n; ++i) first.emplace_back("f" + std::to_string(i), i == j ? "true" : "false");
    for (const char *from : {"idle", "success", "fail"}) b.edge(from, "collecting", ch, "", first);
    const std::string fresh = "!" + fj;
    const std::string last = "cnt == " + std::to_string(n - 1);
    b.edge("collecting", "collecting", ch, fresh + " && cnt < " + std::to_string(n - 1),
           {{fj, "true"}, {"cnt", "cnt + 1"}});
    b.edge("collecting", "success", ch, fresh + " && " + last + " && sclk <= " + num(c.tolerance), reset_flags({}));
    b.edge("collecting", "fail", ch, fresh + " && " + last + " && sclk > " + num(c.tolerance), reset_flags({}));
    // Overrun: the same stream arrives twice within one group.
    b.edge("collecting", "fail", ch, fj, reset_flags({}));
  }
  return b.take();
}

} // namespace

Template build_observer(const WhConstraint &c) {
  if (const std::string err = check_constraint(c); !err.empty())
    throw std::invalid_argument("constraint " + c.name + ": " + err);
  switch (c.kind) {
  case ConstraintKind::Execution:
    return execution_observer(c);
  case ConstraintKind::Synchronization:
    return synchronization_observer(c);
  case ConstraintKind::Periodic:
    return periodic_observer(c);
  case ConstraintKind::EndToEnd:
    return end_to_end_observer(c);
  }
  throw std::invalid_argument("unknown constraint kind");
}

Model attach_observers(const Model &model, const std::vector<WhConstraint> &constraints) {
  Model out = model;
  for (const auto &c : constraints) {
    Template t = build_observer(c);
    for (const auto &e : t.edges) {
      const std::string &ch = e.sync->channel;
      const auto it = std::find_if(model.decls.begin(), model.decls.end(),
                                   [&](const Decl &d) { return d.name == ch; });
      if (it == model.decls.end() || (it->type != DeclType::BroadcastChan && it->type != DeclType::Chan))
        throw std::invalid_argument(c.name + ": unbindable channel '" + ch + "' (not declared)");
      if (it->type != DeclType::BroadcastChan)
        throw std::invalid_argument(c.name + ": unbindable channel '" + ch +
                                    "' (observers only listen on broadcast channels)");
    }
    Instantiation in;
    in.instance = c.name;
    in.template_name = t.name;
    out.templates.push_back(std::move(t));
    out.system.push_back(std::move(in));
  }
  return out;
}

NamedQuery observer_query(const WhConstraint &c, double bound) {
  NamedQuery q;
  q.name = c.name;
  HypothesisQuery h;
  h.path = PathFormula{PathKind::Globally, parse_expr("!" + c.name + ".fail")};
  h.bound = bound;
  h.p0 = static_cast<double>(c.m) / static_cast<double>(c.k);
  if (c.m == c.k) h.p0 = 1.0 - 1e-9;
  q.query = h;
  return q;
}

SmcResult wh_estimate(const Network &net, const WhConstraint &c, double bound, const StatConfig &cfg,
                      const EngineOptions &engine) {
  const Simulator sim(net, engine);
  SmcResult r = estimate(
      [&](std::uint64_t run) {
        RngStream rng(cfg.seed, run);
        EventRecorder rec(net, c);
        RunHooks hooks;
        hooks.on_initial = [&](const State &s) { rec.on_initial(s); };
        hooks.on_event = [&](const State &s, const StepInfo &info) {
          rec.on_event(s, info);
          return true;
        };
        sim.run(bound, rng, hooks);
        return check_events(rec.log(), c).wh_holds;
      },
      cfg);
  r.name = c.name + ".wh";
  return r;
}

RunComparison compare_observer_run(const Simulator &sim, const WhConstraint &c, double bound, RngStream &rng) {
  const Network &net = sim.network();
  const int comp = net.component_index(c.name);
  if (comp < 0) throw std::invalid_argument("no observer instance named " + c.name);
  const int fail = net.components[static_cast<std::size_t>(comp)].location_index("fail");
  RunComparison out;
  EventRecorder rec(net, c);
  auto look = [&](const State &s) { out.observer_failed |= s.locs[static_cast<std::size_t>(comp)] == fail; };
  RunHooks hooks;
  hooks.on_initial = [&](const State &s) {
    rec.on_initial(s);
    look(s);
  };
  hooks.on_event = [&](const State &s, const StepInfo &info) {
    rec.on_event(s, info);
    look(s);
    return true;
  };
  sim.run(bound, rng, hooks);
  try {
    out.oracle_failed = check_events(rec.log(), c).any_failure();
  } catch (const MalformedTrace &) {
    out.oracle_failed = true;
  }
  out.events = static_cast<long long>(rec.log().size());
  return out;
}

} // namespace stasmc
