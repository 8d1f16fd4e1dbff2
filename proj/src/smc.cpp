#include "stasmc/smc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

namespace stasmc {

namespace {

// Runs are evaluated in fixed-size batches and consumed in index order, so
// sequential decisions do not depend on the worker count.
constexpr long long kBatch = 64;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

/// Evaluates sample(i) for consecutive batches and feeds them in order to
/// `consume`, which returns true once it has seen enough.
template <typename T, typename Sample, typename Consume>
void sequential(const Sample &sample, long long limit, int workers, Consume consume) {
  std::vector<T> buf;
  for (long long start = 0; start < limit; start += kBatch) {
    const long long end = std::min(limit, start + kBatch);
    buf.assign(static_cast<std::size_t>(end - start), T{});
    parallel_for(start, end, workers, [&](long long i) {
      buf[static_cast<std::size_t>(i - start)] = sample(static_cast<std::uint64_t>(i));
    });
    for (long long i = start; i < end; ++i)
      if (consume(i, buf[static_cast<std::size_t>(i - start)])) return;
  }
}

} // namespace

void StatConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("epsilon must lie in (0, 0.5)");
  if (!(delta > 0.0)) throw std::invalid_argument("indifference must be positive");
  if (max_runs < 1) throw std::invalid_argument("max-runs must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (hist_bins < 1) throw std::invalid_argument("histogram bins must be >= 1");
}

long long chernoff_runs(double alpha, double epsilon) {
  return static_cast<long long>(std::ceil(std::log(2.0 / alpha) / (2.0 * epsilon * epsilon)));
}

std::pair<double, double> clopper_pearson(long long k, long long n, double alpha) {
  if (n <= 0) return {0.0, 1.0};
  namespace bm = boost::math;
  const double kk = static_cast<double>(k), nn = static_cast<double>(n);
  const double lo = k == 0 ? 0.0 : bm::quantile(bm::beta_distribution<>(kk, nn - kk + 1.0), alpha / 2.0);
  const double hi =
      k == n ? 1.0 : bm::quantile(bm::beta_distribution<>(kk + 1.0, nn - kk), 1.0 - alpha / 2.0);
  return {lo, hi};
}

double normal_quantile(double alpha) {
  return boost::math::quantile(boost::math::normal_distribution<>(), 1.0 - alpha / 2.0);
}

Histogram make_histogram(const std::vector<double> &values, int bins) {
  Histogram h;
  if (values.empty()) return h;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn, hi = *mx;
  if (hi == lo) {
    h.edges = {lo, hi};
    h.counts = {static_cast<long long>(values.size())};
    return h;
  }
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? hi : lo + width * b);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto b = static_cast<long long>((v - lo) / width);
    b = std::clamp(b, 0LL, static_cast<long long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

void parallel_for(long long begin, long long end, int workers, const std::function<void(long long)> &f) {
  const long long n = end - begin;
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (long long i = begin; i < end; ++i) f(i);
    return;
  }
  std::atomic<long long> next{begin};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const long long i = next.fetch_add(1);
      if (i >= end) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(end);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto count = static_cast<int>(std::min<long long>(workers, n));
  pool.reserve(static_cast<std::size_t>(count));
  for (int w = 0; w < count; ++w) pool.emplace_back(worker);
  for (auto &t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------

SmcResult estimate(const BernoulliSampler &sample, const StatConfig &cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  SmcResult r;
  r.kind = "estimate";
  r.seed = cfg.seed;
  const long long needed = chernoff_runs(cfg.alpha, cfg.epsilon);
  const long long n = std::min(needed, cfg.max_runs);
  long long successes = 0;
  sequential<char>([&](std::uint64_t i) { return static_cast<char>(sample(i)); }, n, cfg.workers,
                   [&](long long, char ok) {
                     successes += ok;
                     return false;
                   });
  r.runs = n;
  r.p_hat = static_cast<double>(successes) / static_cast<double>(n);
  std::tie(r.lo, r.hi) = clopper_pearson(successes, n, cfg.alpha);
  r.verdict = n < needed ? Verdict::Undecided : Verdict::EstimateOnly;
  r.wall_ms = elapsed_ms(t0);
  return r;
}

namespace {

/// Wald SPRT of q >= q_hi (H0) against q <= q_lo (H1). Returns the verdict
/// and fills runs/successes.
template <typename Sample>
Verdict wald(const Sample &outcome, double q_hi, double q_lo, const StatConfig &cfg, long long limit,
             long long &runs, long long &successes) {
  q_hi = std::min(q_hi, 1.0 - 1e-12);
  q_lo = std::max(q_lo, 1e-12);
  const double accept_h1 = std::log((1.0 - cfg.alpha) / cfg.alpha);
  const double accept_h0 = std::log(cfg.alpha / (1.0 - cfg.alpha));
  const double up = std::log(q_lo / q_hi), down = std::log((1.0 - q_lo) / (1.0 - q_hi));
  double llr = 0.0;
  Verdict v = Verdict::Undecided;
  runs = successes = 0;
  sequential<signed char>(outcome, limit, cfg.workers, [&](long long i, signed char x) {
    if (x < 0) return false; // not counted (concordant pair)
    runs = i + 1;
    successes += x;
    llr += x ? up : down;
    if (llr <= accept_h0) v = Verdict::Valid;
    else if (llr >= accept_h1) v = Verdict::Invalid;
    return v != Verdict::Undecided;
  });
  if (v == Verdict::Undecided) runs = limit;
  return v;
}

} // namespace

SmcResult hypothesis(const BernoulliSampler &sample, double p0, Relation rel, const StatConfig &cfg) {
  cfg.validate();
  if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("p0 must lie in (0, 1)");
  const auto t0 = Clock::now();
  SmcResult r;
  r.kind = "hypothesis";
  r.seed = cfg.seed;
  const bool flip = rel == Relation::AtMost;
  const double target = flip ? 1.0 - p0 : p0;
  long long runs = 0, successes = 0;
  r.verdict = wald(
      [&](std::uint64_t i) { return static_cast<signed char>(sample(i) != flip); }, target + cfg.delta,
      target - cfg.delta, cfg, cfg.max_runs, runs, successes);
  r.runs = runs;
  const long long k = flip ? runs - successes : successes;
  r.p_hat = runs ? static_cast<double>(k) / static_cast<double>(runs) : 0.0;
  std::tie(r.lo, r.hi) = clopper_pearson(k, runs, cfg.alpha);
  r.wall_ms = elapsed_ms(t0);
  return r;
}

SmcResult compare(const PairSampler &sample, const StatConfig &cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  SmcResult r;
  r.kind = "compare";
  r.seed = cfg.seed;
  const long long chernoff = chernoff_runs(cfg.alpha, cfg.epsilon);
  const double q_hi = 0.5, q_lo = 0.5 - 5.0 * cfg.delta;
  const double accept_h1 = std::log((1.0 - cfg.alpha) / cfg.alpha);
  const double accept_h0 = std::log(cfg.alpha / (1.0 - cfg.alpha));
  const double up = std::log(q_lo / q_hi), down = std::log((1.0 - q_lo) / (1.0 - q_hi));

  long long pairs = 0, left = 0, right = 0, discordant = 0;
  double llr = 0.0;
  Verdict v = Verdict::Undecided;
  sequential<std::pair<bool, bool>>(sample, cfg.max_runs, cfg.workers, [&](long long i, std::pair<bool, bool> o) {
    pairs = i + 1;
    left += o.first;
    right += o.second;
    if (o.first != o.second) {
      ++discordant;
      llr += o.first ? up : down;
      if (llr <= accept_h0) v = Verdict::Valid;
      else if (llr >= accept_h1) v = Verdict::Invalid;
    }
    // Indifference: the two sides almost never disagree.
    if (v == Verdict::Undecided && pairs >= chernoff &&
        clopper_pearson(discordant, pairs, cfg.alpha).second <= cfg.delta)
      v = Verdict::Valid;
    return v != Verdict::Undecided;
  });
  r.verdict = v;
  r.runs = 2 * pairs;
  r.p_hat = pairs ? static_cast<double>(left) / static_cast<double>(pairs) : 0.0;
  r.p_hat2 = pairs ? static_cast<double>(right) / static_cast<double>(pairs) : 0.0;
  std::tie(r.lo, r.hi) = clopper_pearson(left, pairs, cfg.alpha);
  r.wall_ms = elapsed_ms(t0);
  return r;
}

SmcResult expected_value(const RealSampler &sample, long long runs, const StatConfig &cfg) {
  cfg.validate();
  if (runs < 2) throw std::invalid_argument("expected-value queries need at least 2 runs");
  const auto t0 = Clock::now();
  SmcResult r;
  r.kind = "expected";
  r.seed = cfg.seed;
  r.verdict = Verdict::EstimateOnly;
  r.values.assign(static_cast<std::size_t>(runs), 0.0);
  parallel_for(0, runs, cfg.workers,
               [&](long long i) { r.values[static_cast<std::size_t>(i)] = sample(static_cast<std::uint64_t>(i)); });
  double sum = 0.0;
  for (double v : r.values) sum += v;
  const double n = static_cast<double>(runs);
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : r.values) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  const double z = normal_quantile(cfg.alpha);
  r.p_hat = mean;
  r.lo = mean - z * se;
  r.hi = mean + z * se;
  r.runs = runs;
  r.histogram = make_histogram(r.values, cfg.hist_bins);
  r.wall_ms = elapsed_ms(t0);
  return r;
}

// ---------------------------------------------------------------------------

bool evaluate_path_formula(const Trace &trace, PathKind kind, std::size_t watch_index, double bound) {
  const bool want = kind == PathKind::Eventually;
  auto hit = [&](const std::vector<Value> &w) { return w.at(watch_index).truthy() == want; };
  if (hit(trace.initial_watch)) return want;
  for (const auto &ev : trace.events) {
    if (ev.time > bound) break;
    if (hit(ev.watch)) return want;
  }
  if (trace.end_time <= bound && hit(trace.final_watch)) return want;
  return !want;
}

bool check_path(const Simulator &sim, const CompiledExpr &state, PathKind kind, double bound, RngStream &rng) {
  const bool want = kind == PathKind::Eventually;
  bool decided = false;
  auto visit = [&](const State &s) {
    if (!decided && eval_bool(state, s.env()) == want) decided = true;
  };
  RunHooks hooks;
  hooks.on_initial = visit;
  hooks.on_event = [&](const State &s, const StepInfo &) {
    visit(s);
    return !decided;
  };
  hooks.on_end = [&](const State &s, EndReason) { visit(s); };
  sim.run(bound, rng, hooks);
  return decided ? want : !want;
}

std::optional<std::uint64_t> find_run(const Simulator &sim, const CompiledExpr &state, PathKind kind,
                                      double bound, std::uint64_t seed, bool want, long long limit) {
  for (long long i = 0; i < limit; ++i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    if (check_path(sim, state, kind, bound, rng) == want) return static_cast<std::uint64_t>(i);
  }
  return std::nullopt;
}

std::vector<std::vector<double>> simulate_run(const Simulator &sim, const std::vector<CompiledExpr> &exprs,
                                              double bound, double sample_step, RngStream &rng,
                                              std::uint64_t run) {
  std::vector<std::vector<double>> rows;
  auto row = [&](const State &s) {
    std::vector<double> r;
    r.reserve(exprs.size() + 2);
    r.push_back(static_cast<double>(run));
    r.push_back(s.time);
    for (const auto &e : exprs) r.push_back(eval_real(e, s.env()));
    rows.push_back(std::move(r));
  };
  RunHooks hooks;
  hooks.sample_step = sample_step;
  hooks.on_sample = row;
  hooks.on_event = [&](const State &s, const StepInfo &) {
    row(s);
    return true;
  };
  sim.run(bound, rng, hooks);
  return rows;
}

SmcResult run_query(const Network &net, const NamedQuery &q, const StatConfig &cfg, const EngineOptions &engine,
                    Trajectories *traj) {
  cfg.validate();
  if (const auto *c = std::get_if<CompareQuery>(&q.query)) {
    if (!(c->left_bound > 0.0 && c->right_bound > 0.0)) throw std::invalid_argument("time bound must be positive");
  } else if (!(query_bound(q.query) > 0.0)) {
    throw std::invalid_argument("time bound must be positive");
  }
  const Simulator sim(net, engine);
  const std::uint64_t seed = cfg.seed;
  SmcResult r;

  auto path_sampler = [&](const PathFormula &f, double bound, std::uint64_t offset, std::uint64_t stride) {
    const CompiledExpr state = net.compile(f.state);
    return [&sim, state, bound, seed, offset, stride, kind = f.kind](std::uint64_t i) {
      RngStream rng(seed, i * stride + offset);
      return check_path(sim, state, kind, bound, rng);
    };
  };

  if (const auto *e = std::get_if<EstimateQuery>(&q.query)) {
    r = estimate(path_sampler(e->path, e->bound, 0, 1), cfg);
  } else if (const auto *h = std::get_if<HypothesisQuery>(&q.query)) {
    r = hypothesis(path_sampler(h->path, h->bound, 0, 1), h->p0, h->relation, cfg);
  } else if (const auto *c = std::get_if<CompareQuery>(&q.query)) {
    auto left = path_sampler(c->left, c->left_bound, 0, 2);
    auto right = path_sampler(c->right, c->right_bound, 1, 2);
    r = compare([&](std::uint64_t i) { return std::make_pair(left(i), right(i)); }, cfg);
  } else if (const auto *x = std::get_if<ExpectedQuery>(&q.query)) {
    const CompiledExpr expr = net.compile(x->expr);
    const bool is_max = x->mode == ExtremumMode::Max;
    const double bound = x->bound;
    r = expected_value(
        [&](std::uint64_t i) {
          RngStream rng(seed, i);
          double best = is_max ? -std::numeric_limits<double>::infinity()
                               : std::numeric_limits<double>::infinity();
          auto visit = [&](const State &s) {
            const double v = eval_real(expr, s.env());
            best = is_max ? std::max(best, v) : std::min(best, v);
          };
          RunHooks hooks;
          hooks.on_initial = visit;
          hooks.on_event = [&](const State &s, const StepInfo &) {
            visit(s);
            return true;
          };
          hooks.on_end = [&](const State &s, EndReason) { visit(s); };
          sim.run(bound, rng, hooks);
          return best;
        },
        x->runs, cfg);
  } else {
    const auto &s = std::get<SimulateQuery>(q.query);
    if (!(s.sample_step > 0.0)) throw std::invalid_argument("sample step must be positive");
    const auto t0 = Clock::now();
    std::vector<CompiledExpr> exprs;
    for (const auto &e : s.exprs) exprs.push_back(net.compile(e));
    std::vector<std::vector<std::vector<double>>> per_run(static_cast<std::size_t>(s.runs));
    parallel_for(0, s.runs, cfg.workers, [&](long long i) {
      RngStream rng(seed, static_cast<std::uint64_t>(i));
      per_run[static_cast<std::size_t>(i)] =
          simulate_run(sim, exprs, s.bound, s.sample_step, rng, static_cast<std::uint64_t>(i));
    });
    if (traj) {
      traj->columns = {"run", "t"};
      for (const auto &e : s.exprs) traj->columns.push_back(to_string(e));
      traj->rows.clear();
      for (auto &run : per_run)
        for (auto &row : run) traj->rows.push_back(std::move(row));
    }
    r.kind = "simulate";
    r.verdict = Verdict::EstimateOnly;
    r.runs = s.runs;
    r.seed = seed;
    r.wall_ms = elapsed_ms(t0);
  }
  r.name = q.name;
  return r;
}

} // namespace stasmc
