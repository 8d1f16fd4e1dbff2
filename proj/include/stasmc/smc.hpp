#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stasmc/engine.hpp"
#include "stasmc/query.hpp"

namespace stasmc {

struct StatConfig {
  double alpha = 0.05;
  double epsilon = 0.05;
  double delta = 0.01; // SPRT indifference half-width
  long long max_runs = 1'000'000;
  std::uint64_t seed = 0;
  int workers = 1;
  int hist_bins = 20;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct Histogram {
  std::vector<double> edges; // bins + 1 entries
  std::vector<long long> counts;
};

struct SmcResult {
  std::string name;
  std::string kind; // estimate, hypothesis, compare, expected, simulate
  Verdict verdict = Verdict::EstimateOnly;
  double p_hat = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> p_hat2; // right-hand side of a comparison
  long long runs = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  std::optional<Histogram> histogram;
  std::vector<double> values; // per-run extremum for expected-value queries
};

/// ceil(ln(2/alpha) / (2 epsilon^2))
long long chernoff_runs(double alpha, double epsilon);

/// Exact two-sided interval at level 1 - alpha.
std::pair<double, double> clopper_pearson(long long successes, long long n, double alpha);

/// Two-sided standard normal quantile z with P(|Z| <= z) = 1 - alpha.
double normal_quantile(double alpha);

Histogram make_histogram(const std::vector<double> &values, int bins);

/// Calls f(i) for i in [begin, end) on `workers` threads.
void parallel_for(long long begin, long long end, int workers, const std::function<void(long long)> &f);

// ---- statistical procedures over abstract run outcomes -------------------

using BernoulliSampler = std::function<bool(std::uint64_t run)>;
using PairSampler = std::function<std::pair<bool, bool>(std::uint64_t pair)>;
using RealSampler = std::function<double(std::uint64_t run)>;

SmcResult estimate(const BernoulliSampler &sample, const StatConfig &cfg);

/// Wald SPRT of p >= p0 + delta against p <= p0 - delta (AtLeast); AtMost
/// tests the complement against 1 - p0.
SmcResult hypothesis(const BernoulliSampler &sample, double p0, Relation rel, const StatConfig &cfg);

/// SPRT on discordant pairs of H0: p1 >= p2.
SmcResult compare(const PairSampler &sample, const StatConfig &cfg);

SmcResult expected_value(const RealSampler &sample, long long runs, const StatConfig &cfg);

// ---- networks ------------------------------------------------------------

/// States visited by a run: the initial state, the state after every event,
/// and the final state at the bound. `watch_index` selects the watched
/// expression holding the state formula.
bool evaluate_path_formula(const Trace &trace, PathKind kind, std::size_t watch_index, double bound);

/// Runs one simulation and decides the formula, stopping early when the
/// outcome is settled.
bool check_path(const Simulator &sim, const CompiledExpr &state, PathKind kind, double bound, RngStream &rng);

/// First run index below `limit` whose formula outcome equals `want`.
std::optional<std::uint64_t> find_run(const Simulator &sim, const CompiledExpr &state, PathKind kind,
                                      double bound, std::uint64_t seed, bool want, long long limit);

/// One row per grid sample and per event: run, t, expression values.
struct Trajectories {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// Samples of `exprs` for a single run at the grid and after every event.
std::vector<std::vector<double>> simulate_run(const Simulator &sim, const std::vector<CompiledExpr> &exprs,
                                              double bound, double sample_step, RngStream &rng,
                                              std::uint64_t run);

/// Runs any query against the network. Simulate queries fill `traj` when given.
SmcResult run_query(const Network &net, const NamedQuery &q, const StatConfig &cfg,
                    const EngineOptions &engine = {}, Trajectories *traj = nullptr);

} // namespace stasmc
