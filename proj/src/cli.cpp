#include "stasmc/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stasmc/avmodel.hpp"
#include "stasmc/dsl.hpp"
#include "stasmc/monitors.hpp"

namespace stasmc {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

void ensure_dir(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

ordered_json manifest_object(const RunManifest &m) {
  ordered_json j;
  j["model"] = m.model_path;
  if (!m.query_path.empty()) j["query_file"] = m.query_path;
  if (!m.query_text.empty()) j["query"] = m.query_text;
  j["seed"] = m.stat.seed;
  j["alpha"] = m.stat.alpha;
  j["epsilon"] = m.stat.epsilon;
  j["indifference"] = m.stat.delta;
  j["max_runs"] = m.stat.max_runs;
  j["hist_bins"] = m.stat.hist_bins;
  j["out"] = m.out_dir;
  j["sample_step"] = m.sample_step;
  j["bound_override"] = m.bound_override ? ordered_json(*m.bound_override) : ordered_json(nullptr);
  return j;
}

std::string manifest_comment(const RunManifest &m) { return "# manifest: " + manifest_json(m) + "\n"; }

/// Keeps file names portable: letters, digits, `-`, `_` and `.`.
std::string file_stem(const std::string &name, std::size_t index) {
  std::string s;
  for (char c : name) s += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_';
  return s.empty() ? "q" + std::to_string(index + 1) : s;
}

std::string number(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

void write_trajectories(const fs::path &path, const Trajectories &traj, const RunManifest &m) {
  std::ostringstream ss;
  ss << manifest_comment(m);
  for (std::size_t i = 0; i < traj.columns.size(); ++i) ss << (i ? "," : "") << traj.columns[i];
  ss << '\n';
  for (const auto &row : traj.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) ss << (i ? "," : "") << number(row[i]);
    ss << '\n';
  }
  write_file(path, ss.str());
}

void write_histogram(const fs::path &path, const Histogram &h, const RunManifest &m) {
  std::ostringstream ss;
  ss << manifest_comment(m) << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    ss << number(h.edges[i]) << ',' << number(h.edges[i + 1]) << ',' << h.counts[i] << '\n';
  write_file(path, ss.str());
}

void set_bound(Query &q, double b) {
  std::visit(
      [b](auto &x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, CompareQuery>) {
          x.left_bound = b;
          x.right_bound = b;
        } else {
          x.bound = b;
        }
      },
      q);
}

void prepare(NamedQuery &q, const RunManifest &m) {
  if (m.bound_override) set_bound(q.query, *m.bound_override);
  if (auto *s = std::get_if<SimulateQuery>(&q.query)) s->sample_step = m.sample_step;
  if (const auto *c = std::get_if<CompareQuery>(&q.query)) {
    if (!(c->left_bound > 0.0) || !(c->right_bound > 0.0)) throw UsageError("query bound must be positive");
  } else if (!(query_bound(q.query) > 0.0)) {
    throw UsageError("query bound must be positive");
  }
}

bool matches(const Expectation &e, const SmcResult &r) {
  if (e.verdict) return r.verdict == *e.verdict;
  if (e.range) {
    const auto [lo, hi] = *e.range;
    if (r.kind == "expected") return r.p_hat >= lo && r.p_hat <= hi;
    return r.lo >= lo && r.hi <= hi;
  }
  return true;
}

ordered_json expectation_json(const std::optional<Expectation> &e) {
  if (!e) return nullptr;
  if (e->verdict) return to_string(*e->verdict);
  if (e->range) return ordered_json::array({e->range->first, e->range->second});
  return nullptr;
}

struct Row {
  std::string name;
  std::string kind;
  std::string query;
  std::optional<SmcResult> result;
  std::optional<Expectation> expected;
  std::optional<bool> match;
  std::string error;
};

ordered_json row_json(const Row &row) {
  ordered_json j;
  j["name"] = row.name;
  j["kind"] = row.kind;
  j["query"] = row.query;
  if (row.result) {
    const auto &r = *row.result;
    j["verdict"] = to_string(r.verdict);
    j["p_hat"] = r.p_hat;
    if (r.p_hat2) j["p_hat2"] = *r.p_hat2;
    j["ci"] = ordered_json::array({r.lo, r.hi});
    j["runs"] = r.runs;
    j["wall_ms"] = r.wall_ms;
    j["seed"] = r.seed;
    if (r.histogram) {
      j["histogram"]["edges"] = r.histogram->edges;
      j["histogram"]["counts"] = r.histogram->counts;
    }
  } else {
    j["verdict"] = nullptr;
  }
  j["expected"] = expectation_json(row.expected);
  j["match"] = row.match ? ordered_json(*row.match) : ordered_json(nullptr);
  if (!row.error.empty()) j["error"] = row.error;
  return j;
}

void print_table(std::ostream &out, const std::vector<Row> &rows) {
  auto cell = [&](const std::string &s, int w) { out << std::left << std::setw(w) << s << " | "; };
  cell("Req", 20);
  cell("Result", 13);
  cell("p̂", 13); // the combining hat takes two bytes and no column
  cell("CI", 23);
  cell("runs", 8);
  out << "wall-time\n";
  for (const auto &row : rows) {
    cell(row.name, 20);
    if (!row.result) {
      cell("error", 13);
      out << row.error << '\n';
      continue;
    }
    const auto &r = *row.result;
    std::string verdict = to_string(r.verdict);
    if (row.match) verdict += *row.match ? "" : " (!)";
    cell(verdict, 13);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", r.p_hat);
    cell(r.kind == "simulate" ? "-" : buf, 11);
    std::snprintf(buf, sizeof buf, "[%.4g, %.4g]", r.lo, r.hi);
    cell(r.kind == "simulate" ? "-" : buf, 23);
    cell(std::to_string(r.runs), 8);
    std::snprintf(buf, sizeof buf, "%.0f ms", r.wall_ms);
    out << buf << '\n';
  }
}

/// A run showing the interesting outcome of a path formula: one reaching
/// the target for `<>`, one breaking it for `[]`.
std::optional<PathFormula> witness_formula(const NamedQuery &q, const SmcResult &r, double &bound) {
  const PathFormula *f = nullptr;
  if (const auto *e = std::get_if<EstimateQuery>(&q.query)) {
    f = &e->path;
    bound = e->bound;
  } else if (const auto *h = std::get_if<HypothesisQuery>(&q.query)) {
    f = &h->path;
    bound = h->bound;
  }
  if (!f || r.runs == 0) return std::nullopt;
  const bool exists = f->kind == PathKind::Eventually ? r.p_hat > 0.0 : r.p_hat < 1.0;
  if (!exists) return std::nullopt;
  return *f;
}

void save_witness(const Network &net, const NamedQuery &q, const SmcResult &r, const RunManifest &m,
                  const EngineOptions &engine, const fs::path &path) {
  double bound = 0.0;
  const auto f = witness_formula(q, r, bound);
  if (!f) return;
  const Simulator sim(net, engine);
  const CompiledExpr state = net.compile(f->state);
  const bool want = f->kind == PathKind::Eventually;
  const auto run = find_run(sim, state, f->kind, bound, r.seed, want, r.runs);
  if (!run) return;
  RngStream rng(r.seed, *run);
  const Trace trace = sim.run_trace(bound, rng, {state});
  std::ostringstream ss;
  ordered_json head;
  head["manifest"] = manifest_object(m);
  head["query"] = q.name;
  head["run"] = *run;
  head["end"] = to_string(trace.end);
  head["end_time"] = trace.end_time;
  ss << head.dump() << '\n';
  write_jsonl(ss, net, trace, {to_string(f->state)});
  write_file(path, ss.str());
}

struct Loaded {
  Model model;
  QueryFile queries;
};

Loaded load_inputs(const RunManifest &m) {
  Loaded l;
  l.model = parse_model(read_file(m.model_path), m.model_path);
  if (!m.query_text.empty()) {
    NamedQuery q;
    try {
      q.query = parse_query(m.query_text);
    } catch (const ParseError &e) {
      // A zero horizon on the command line is a usage mistake, not a query failure.
      if (std::string_view(e.what()).starts_with("time bound")) throw UsageError(e.what());
      throw;
    }
    l.queries.queries.push_back(std::move(q));
  } else if (!m.query_path.empty()) {
    l.queries = parse_query_file(read_file(m.query_path), m.query_path);
  } else {
    throw UsageError("no query given");
  }
  for (std::size_t i = 0; i < l.queries.queries.size(); ++i) {
    auto &q = l.queries.queries[i];
    if (q.name.empty()) q.name = "q" + std::to_string(i + 1);
  }
  return l;
}

void print_parse_error(std::ostream &err, const ParseError &e) {
  err << "parse error: " << e.what() << '\n';
  if (!e.expected().empty()) {
    err << "  expected one of:";
    for (const auto &x : e.expected()) err << ' ' << x;
    err << '\n';
  }
}

/// Maps exceptions escaping a command to the exit-code contract.
template <typename F> int guarded(std::ostream &err, F &&body) {
  try {
    return body();
  } catch (const IoError &e) {
    err << "error: " << e.what() << '\n';
    return exit_code::io;
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << '\n';
    return exit_code::io;
  } catch (const ParseError &e) {
    print_parse_error(err, e);
    return exit_code::query_failure;
  } catch (const ModelError &e) {
    err << to_string(e.report());
    return exit_code::validation;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return exit_code::query_failure;
  }
}

} // namespace

std::string manifest_json(const RunManifest &m) { return manifest_object(m).dump(); }

int cmd_validate(const std::string &model_path, std::ostream &out, std::ostream &err) {
  return guarded(err, [&] {
    const Model model = parse_model(read_file(model_path), model_path);
    const ValidationReport report = validate_model(model);
    out << to_string(report);
    if (report.ok()) out << model_path << ": ok\n";
    return report.ok() ? exit_code::ok : exit_code::validation;
  });
}

int cmd_check(const RunManifest &m, std::ostream &out, std::ostream &err) {
  return guarded(err, [&] {
    m.stat.validate();
    Loaded in = load_inputs(m);
    for (auto &q : in.queries.queries) prepare(q, m);
    ensure_dir(m.out_dir);

    const Model observed = attach_observers(in.model, in.queries.constraints);
    const Network net = instantiate(observed);
    const fs::path dir(m.out_dir);

    std::vector<Row> rows;
    bool failed = false, mismatch = false;
    for (std::size_t i = 0; i < in.queries.queries.size(); ++i) {
      const auto &q = in.queries.queries[i];
      Row row;
      row.name = q.name;
      row.query = to_string(q.query);
      row.expected = q.expected;
      try {
        Trajectories traj;
        SmcResult r = run_query(net, q, m.stat, m.engine, &traj);
        row.kind = r.kind;
        const std::string stem = file_stem(q.name, i);
        if (r.kind == "simulate") write_trajectories(dir / (stem + "_traj.csv"), traj, m);
        if (r.histogram) write_histogram(dir / (stem + "_hist.csv"), *r.histogram, m);
        save_witness(net, q, r, m, m.engine, dir / (stem + "_witness.jsonl"));
        if (q.expected) {
          row.match = matches(*q.expected, r);
          mismatch |= !*row.match;
        }
        row.result = std::move(r);
      } catch (const IoError &) {
        throw;
      } catch (const std::exception &e) {
        row.error = e.what();
        failed = true;
        err << q.name << ": " << e.what() << '\n';
      }
      rows.push_back(std::move(row));
    }

    // Literal sliding-window reading of each constraint, next to the observer
    // queries.
    double wh_bound = 0.0;
    for (const auto &q : in.queries.queries)
      if (!std::holds_alternative<CompareQuery>(q.query)) wh_bound = std::max(wh_bound, query_bound(q.query));
    if (m.bound_override) wh_bound = *m.bound_override;
    if (!(wh_bound > 0.0)) wh_bound = AvConfig{}.bound;
    for (const auto &c : in.queries.constraints) {
      Row row;
      row.name = c.name + ".wh";
      row.kind = "estimate";
      row.query = to_string(c);
      try {
        row.result = wh_estimate(net, c, wh_bound, m.stat, m.engine);
      } catch (const std::exception &e) {
        row.error = e.what();
        failed = true;
        err << row.name << ": " << e.what() << '\n';
      }
      rows.push_back(std::move(row));
    }

    ordered_json doc;
    doc["manifest"] = manifest_object(m);
    doc["results"] = ordered_json::array();
    for (const auto &row : rows) doc["results"].push_back(row_json(row));
    write_file(dir / "results.json", doc.dump(2) + "\n");

    print_table(out, rows);
    for (const auto &row : rows)
      if (row.match && !*row.match) out << "mismatch: " << row.name << '\n';
    if (failed) return exit_code::query_failure;
    return mismatch ? exit_code::mismatch : exit_code::ok;
  });
}

int cmd_simulate(const RunManifest &m, std::ostream &out, std::ostream &err) {
  return guarded(err, [&] {
    m.stat.validate();
    if (!(m.sample_step > 0.0)) throw UsageError("sample step must be positive");
    Loaded in = load_inputs(m);
    std::vector<NamedQuery> selected;
    for (auto &q : in.queries.queries) {
      const bool sim = std::holds_alternative<SimulateQuery>(q.query);
      const bool hist = m.histogram && std::holds_alternative<ExpectedQuery>(q.query);
      if (!sim && !hist) continue;
      prepare(q, m);
      selected.push_back(q);
    }
    if (selected.empty()) throw UsageError("no simulate queries to run");
    ensure_dir(m.out_dir);
    const Network net = instantiate(in.model);
    const fs::path dir(m.out_dir);
    const bool single = selected.size() == 1;

    std::vector<Row> rows;
    for (std::size_t i = 0; i < selected.size(); ++i) {
      const auto &q = selected[i];
      Trajectories traj;
      SmcResult r = run_query(net, q, m.stat, m.engine, &traj);
      const std::string prefix = single ? "" : file_stem(q.name, i) + "_";
      if (r.kind == "simulate") write_trajectories(dir / (prefix + "traj.csv"), traj, m);
      if (r.histogram) write_histogram(dir / (prefix + "hist.csv"), *r.histogram, m);
      Row row;
      row.name = q.name;
      row.kind = r.kind;
      row.query = to_string(q.query);
      row.result = std::move(r);
      rows.push_back(std::move(row));
    }
    print_table(out, rows);
    return exit_code::ok;
  });
}

int cmd_generate(const std::string &config_path, const std::string &out_dir, std::ostream &out,
                 std::ostream &err) {
  return guarded(err, [&] {
    AvConfig cfg;
    if (!config_path.empty()) {
      try {
        cfg = parse_av_config(read_file(config_path));
      } catch (const std::invalid_argument &e) {
        err << config_path << ": " << e.what() << '\n';
        return exit_code::validation;
      }
    }
    AvConfig unrefined = cfg;
    unrefined.refined = false;
    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    const std::pair<const char *, std::string> files[] = {
        {"av.sta", av_model_text(cfg)},
        {"av_unrefined.sta", av_model_text(unrefined)},
        {"requirements.q", requirements_text(cfg)},
        {"r16.q", r16_text(cfg)},
    };
    for (const auto &[name, text] : files) {
      write_file(dir / name, text);
      out << (dir / name).string() << '\n';
    }
    return exit_code::ok;
  });
}

int cmd_trace(const std::string &model_path, double bound, std::uint64_t seed, std::uint64_t run,
              const std::string &watch, double sample_step, const std::string &out_dir, std::ostream &out,
              std::ostream &err) {
  return guarded(err, [&] {
    if (!(bound > 0.0)) throw UsageError("bound must be positive");
    if (!(sample_step > 0.0)) throw UsageError("sample step must be positive");
    const Network net = instantiate(parse_model(read_file(model_path), model_path));
    std::vector<std::string> names;
    std::vector<CompiledExpr> exprs;
    std::stringstream ws(watch);
    for (std::string item; std::getline(ws, item, ',');) {
      const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
      if (b == std::string::npos) continue;
      item = item.substr(b, e - b + 1);
      exprs.push_back(net.compile(parse_expr(item)));
      names.push_back(item);
    }
    ensure_dir(out_dir);
    const fs::path dir(out_dir);

    RunManifest m;
    m.model_path = model_path;
    m.stat.seed = seed;
    m.out_dir = out_dir;
    m.sample_step = sample_step;
    m.bound_override = bound;
    ordered_json head;
    head["manifest"] = manifest_object(m);
    head["run"] = run;

    const Simulator sim(net);
    RngStream rng(seed, run);
    const Trace trace = sim.run_trace(bound, rng, exprs);
    std::ostringstream js;
    js << head.dump() << '\n';
    write_jsonl(js, net, trace, names);
    write_file(dir / "trace.jsonl", js.str());

    std::ostringstream cs;
    cs << "# manifest: " << head.dump() << "\nt";
    for (const auto &n : names) cs << ',' << n;
    cs << '\n';
    RunHooks hooks;
    hooks.sample_step = sample_step;
    hooks.on_sample = [&](const State &s) {
      cs << number(s.time);
      for (const auto &e : exprs) cs << ',' << number(eval_real(e, s.env()));
      cs << '\n';
    };
    RngStream again(seed, run);
    sim.run(bound, again, hooks);
    write_file(dir / "trace.csv", cs.str());

    out << trace.events.size() << " events, ended by " << to_string(trace.end) << " at t = " << trace.end_time
        << '\n';
    return exit_code::ok;
  });
}

} // namespace stasmc
