#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/distributions/binomial.hpp>

#include "stasmc/avmodel.hpp"
#include "stasmc/dsl.hpp"
#include "stasmc/smc.hpp"

using namespace stasmc;

namespace {

Network net_of(const std::string &text) { return instantiate(parse_model(text)); }

NamedQuery named(const std::string &text) {
  NamedQuery q;
  q.query = parse_query(text);
  return q;
}

BernoulliSampler coin(double p, std::uint64_t seed) {
  return [p, seed](std::uint64_t i) {
    RngStream rng(seed, i);
    return rng.uniform01() < p;
  };
}

const char *kCoinModel = R"(
  template Coin() {
    clock x;
    init loc toss { inv x <= 1; }
    loc heads
    loc tails
    toss -> heads { weight 30; }
    toss -> tails { weight 70; }
  }
  system Coin;)";

} // namespace

TEST(Chernoff, DefaultRunCount) {
  EXPECT_EQ(chernoff_runs(0.05, 0.05), 738);
  EXPECT_EQ(chernoff_runs(0.05, 0.05), static_cast<long long>(std::ceil(std::log(40.0) / 0.005)));
}

// The interval ends are where the binomial tails carry alpha/2.
TEST(ClopperPearson, MatchesBinomialTails) {
  namespace bm = boost::math;
  for (long long n : {10LL, 57LL, 738LL})
    for (long long k : {1LL, n / 3, n - 1}) {
      const auto [lo, hi] = clopper_pearson(k, n, 0.05);
      EXPECT_NEAR(bm::cdf(bm::complement(bm::binomial(double(n), lo), double(k - 1))), 0.025, 1e-9);
      EXPECT_NEAR(bm::cdf(bm::binomial(double(n), hi), double(k)), 0.025, 1e-9);
    }
  EXPECT_EQ(clopper_pearson(0, 20, 0.05).first, 0.0);
  EXPECT_EQ(clopper_pearson(20, 20, 0.05).second, 1.0);
}

TEST(StatConfig, RejectsOutOfRange) {
  StatConfig c;
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.epsilon = 0.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.delta = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(PathFormula, DefinitionOnTraces) {
  Trace t;
  t.initial_watch = {Value::boolean(false)};
  t.events.push_back(TraceEvent{1200.0, 0, "a->b", -1, {}, {Value::boolean(true)}});
  t.final_watch = {Value::boolean(true)};
  t.end_time = 3000.0;
  // watch 0 is the `fail` location of an observer
  EXPECT_TRUE(evaluate_path_formula(t, PathKind::Eventually, 0, 3000.0));
  EXPECT_FALSE(evaluate_path_formula(t, PathKind::Eventually, 0, 1000.0));

  Trace peak;
  peak.initial_watch = {Value::boolean(false)};
  peak.final_watch = {Value::boolean(false)};
  EXPECT_FALSE(evaluate_path_formula(peak, PathKind::Eventually, 0, 10.0));
  Trace all;
  all.initial_watch = {Value::boolean(true)};
  all.final_watch = {Value::boolean(true)};
  EXPECT_TRUE(evaluate_path_formula(all, PathKind::Globally, 0, 10.0));
}

TEST(Estimate, CoinModel) {
  const Network net = net_of(kCoinModel);
  StatConfig cfg;
  cfg.seed = 3;
  const SmcResult r = run_query(net, named("Pr[<=5](<> Coin.heads)"), cfg);
  EXPECT_EQ(r.runs, 738);
  EXPECT_GE(r.p_hat, 0.25);
  EXPECT_LE(r.p_hat, 0.35);
  EXPECT_LE(r.lo, r.p_hat);
  EXPECT_GE(r.hi, r.p_hat);
  EXPECT_EQ(r.verdict, Verdict::EstimateOnly);
}

TEST(Estimate, GloballyTrue) {
  const Network net = net_of(kCoinModel);
  const SmcResult r = run_query(net, named("Pr[<=5]([] true)"), StatConfig{});
  EXPECT_EQ(r.p_hat, 1.0);
  EXPECT_EQ(r.hi, 1.0);
}

TEST(Estimate, RunCapGivesUndecided) {
  StatConfig cfg;
  cfg.max_runs = 100;
  const SmcResult r = estimate(coin(0.5, 1), cfg);
  EXPECT_EQ(r.runs, 100);
  EXPECT_EQ(r.verdict, Verdict::Undecided);
}

TEST(Estimate, CoverageOverRepetitions) {
  int covered = 0;
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    const SmcResult r = estimate(coin(0.3, 1000 + rep), StatConfig{});
    covered += r.lo <= 0.3 && 0.3 <= r.hi;
  }
  EXPECT_GE(covered, 186); // 93 %
}

TEST(Hypothesis, ClearCases) {
  const SmcResult hi = hypothesis(coin(0.99, 5), 0.95, Relation::AtLeast, StatConfig{});
  EXPECT_EQ(hi.verdict, Verdict::Valid);
  EXPECT_LT(hi.runs, 400);
  const SmcResult lo = hypothesis(coin(0.50, 6), 0.95, Relation::AtLeast, StatConfig{});
  EXPECT_EQ(lo.verdict, Verdict::Invalid);
  const SmcResult at_most = hypothesis(coin(0.001, 7), 0.01, Relation::AtMost, StatConfig{});
  EXPECT_EQ(at_most.verdict, Verdict::Valid);
}

TEST(Hypothesis, ErrorRateOutsideIndifference) {
  int wrong = 0;
  for (std::uint64_t rep = 0; rep < 500; ++rep) {
    const bool above = rep % 2 == 0;
    const SmcResult r = hypothesis(coin(above ? 0.55 : 0.45, 5000 + rep), 0.5, Relation::AtLeast, StatConfig{});
    wrong += r.verdict != (above ? Verdict::Valid : Verdict::Invalid);
  }
  EXPECT_LE(wrong, 50);
}

TEST(Hypothesis, RunCapGivesUndecided) {
  StatConfig cfg;
  cfg.max_runs = 10;
  EXPECT_EQ(hypothesis(coin(0.95, 1), 0.95, Relation::AtLeast, cfg).verdict, Verdict::Undecided);
}

TEST(Compare, SymmetricAndTrivial) {
  const Network net = net_of(kCoinModel);
  EXPECT_EQ(run_query(net, named("Pr[<=5](<> Coin.heads) >= Pr[<=5](<> Coin.heads)"), StatConfig{}).verdict,
            Verdict::Valid);
  EXPECT_EQ(run_query(net, named("Pr[<=5]([] true) >= Pr[<=5](<> false)"), StatConfig{}).verdict, Verdict::Valid);
  EXPECT_EQ(run_query(net, named("Pr[<=5](<> false) >= Pr[<=5]([] true)"), StatConfig{}).verdict,
            Verdict::Invalid);
}

TEST(Expected, ClockMaximumAndConstant) {
  const Network net = net_of("clock x; template T() { init loc a } system T;");
  const SmcResult r = run_query(net, named("E[<=10; 5](max: x)"), StatConfig{});
  EXPECT_EQ(r.p_hat, 10.0);
  const SmcResult c = run_query(net, named("E[<=10; 5](min: 4.2)"), StatConfig{});
  EXPECT_DOUBLE_EQ(c.p_hat, 4.2);
  ASSERT_TRUE(c.histogram);
  EXPECT_EQ(c.histogram->edges.front(), c.histogram->edges.back());
  EXPECT_THROW(run_query(net, named("E[<=10; 1](max: x)"), StatConfig{}), std::invalid_argument);
}

TEST(Expected, DefaultTwentyBins) {
  const SmcResult r = expected_value([](std::uint64_t i) { return static_cast<double>(i % 37); }, 200, StatConfig{});
  ASSERT_TRUE(r.histogram);
  EXPECT_EQ(r.histogram->counts.size(), 20u);
  long long total = 0;
  for (auto c : r.histogram->counts) total += c;
  EXPECT_EQ(total, 200);
}

TEST(Simulate, TimeColumnIncreases) {
  const Network net = net_of(R"(
    template T() {
      init loc a { exitrate 0.7; }
      a -> a {}
    }
    system T;)");
  NamedQuery q = named("simulate 1 [<=10] {time}");
  std::get<SimulateQuery>(q.query).sample_step = 0.25;
  Trajectories traj;
  run_query(net, q, StatConfig{}, {}, &traj);
  ASSERT_EQ(traj.columns, (std::vector<std::string>{"run", "t", "time"}));
  ASSERT_GE(traj.rows.size(), 41u);
  for (std::size_t i = 1; i < traj.rows.size(); ++i) EXPECT_GT(traj.rows[i][2], traj.rows[i - 1][2]);
}

TEST(Simulate, RowCountOnCaseStudy) {
  const Network net = instantiate(build_av_model());
  NamedQuery q = named("simulate 3 [<=300] {Camera.exec}");
  std::get<SimulateQuery>(q.query).sample_step = 1.0;
  Trajectories traj;
  run_query(net, q, StatConfig{}, {}, &traj);
  long long grid = 0;
  for (const auto &row : traj.rows) grid += std::fmod(row[1], 1.0) == 0.0;
  EXPECT_GE(grid, 3 * 301);
  EXPECT_GT(traj.rows.size(), 3u * 301u);
}

TEST(Properties, EventuallyMonotoneInBound) {
  const Network net = instantiate(build_av_model());
  StatConfig cfg;
  cfg.epsilon = 0.1;
  double last = 0.0;
  for (int bound : {500, 1000, 2000}) {
    const SmcResult r = run_query(net, named("Pr[<=" + std::to_string(bound) + "](<> Stop.totally_stop)"), cfg);
    EXPECT_GE(r.p_hat, last);
    last = r.p_hat;
  }
  EXPECT_GT(last, 0.0);
}

TEST(Properties, SeedReproducesResultAcrossWorkers) {
  const Network net = instantiate(build_av_model());
  StatConfig cfg;
  cfg.seed = 77;
  cfg.epsilon = 0.1;
  const NamedQuery q = named("Pr[<=800](<> Ctrl.turn_left)");
  const SmcResult a = run_query(net, q, cfg);
  cfg.workers = 4;
  const SmcResult b = run_query(net, q, cfg);
  EXPECT_EQ(a.seed, 77u);
  EXPECT_EQ(a.p_hat, b.p_hat);
  EXPECT_EQ(a.runs, b.runs);
}

TEST(CaseStudy, TimingRowAndComparisonRow) {
  const Network net = instantiate(build_av_model());
  StatConfig cfg;
  cfg.seed = 42;
  for (const auto &q : requirement_queries()) {
    if (q.name != "R26") continue;
    EXPECT_EQ(run_query(net, q, cfg).verdict, Verdict::Valid);
  }
}
