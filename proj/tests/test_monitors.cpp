#include <gtest/gtest.h>

#include <random>

#include "stasmc/avmodel.hpp"
#include "stasmc/dsl.hpp"
#include "stasmc/monitors.hpp"

using namespace stasmc;

namespace {

EventLog log_of(std::initializer_list<std::pair<double, const char *>> items) {
  EventLog log;
  for (const auto &[t, role] : items) log.push_back(Occurrence{t, role});
  return log;
}

WhConstraint constraint_of(const std::string &line) {
  return parse_query_file(line).constraints.at(0);
}

std::vector<bool> passes_of(const std::vector<OccurrenceRecord> &rs) {
  std::vector<bool> out;
  for (const auto &r : rs) out.push_back(r.pass);
  return out;
}

// Every full window of k has at least m passes; shorter sequences use the
// proportional threshold.
bool brute_wh(const std::vector<bool> &p, int m, int k) {
  const int n = static_cast<int>(p.size());
  if (n < k) {
    int s = 0;
    for (bool b : p) s += b;
    return s >= (m * n + k - 1) / k;
  }
  for (int i = 0; i + k <= n; ++i) {
    int s = 0;
    for (int j = i; j < i + k; ++j) s += p[static_cast<std::size_t>(j)];
    if (s < m) return false;
  }
  return true;
}

const char *kWorker = R"(
  broadcast chan start; broadcast chan stop;
  template Worker() {
    clock x;
    init loc idle { inv x <= 100; }
    loc run { inv x <= 300; }
    idle -> run { guard x >= 50; sync start!; update x := 0; }
    run -> idle { guard x >= 300; sync stop!; update x := 0; }
  }
  system Worker;)";

const char *kTicker = R"(
  broadcast chan tick;
  template Ticker() {
    clock x;
    init loc a { inv x <= 500; }
    a -> a { guard x >= 500; sync tick!; update x := 0; }
  }
  system Ticker;)";

} // namespace

TEST(Execution, Examples) {
  auto r = measure_execution(log_of({{0, "start"}, {300, "stop"}}), 200, 400);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r[0].quantity, 300.0);
  EXPECT_TRUE(r[0].pass);

  r = measure_execution(log_of({{0, "start"}, {100, "preempt"}, {250, "resume"}, {400, "stop"}}), 200, 400);
  EXPECT_DOUBLE_EQ(r.at(0).quantity, 250.0);
  EXPECT_TRUE(r[0].pass);

  r = measure_execution(log_of({{0, "start"}, {150, "stop"}}), 200, 400);
  EXPECT_FALSE(r.at(0).pass);
}

TEST(Execution, MalformedTraces) {
  EXPECT_THROW(measure_execution(log_of({{10, "stop"}}), 0, 1), MalformedTrace);
  EXPECT_THROW(measure_execution(log_of({{0, "start"}, {5, "resume"}}), 0, 1), MalformedTrace);
}

TEST(Synchronization, Examples) {
  auto r = measure_synchronization(log_of({{0, "e1"}, {10, "e2"}, {39, "e3"}}), 3, 40);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r[0].quantity, 39.0);
  EXPECT_TRUE(r[0].pass);
  r = measure_synchronization(log_of({{0, "e1"}, {10, "e2"}, {41, "e3"}}), 3, 40);
  EXPECT_FALSE(r.at(0).pass);
}

TEST(Synchronization, TrailingGroupIsIncomplete) {
  const auto r = measure_synchronization(log_of({{0, "e1"}, {1, "e2"}, {50, "e1"}}), 2, 5);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_TRUE(r[0].complete);
  EXPECT_FALSE(r[1].complete);
}

TEST(Periodic, Examples) {
  auto r = measure_periodic(log_of({{0, "occurrence"}, {650, "occurrence"}, {1400, "occurrence"}, {2200, "occurrence"}}),
                            700, 700, 100);
  EXPECT_EQ(passes_of(r), (std::vector<bool>{true, true, true}));
  r = measure_periodic(log_of({{0, "occurrence"}, {810, "occurrence"}}), 700, 700, 100);
  EXPECT_FALSE(r.at(0).pass);
  EXPECT_TRUE(measure_periodic(log_of({{0, "occurrence"}}), 700, 700, 100).empty());
}

TEST(EndToEnd, Examples) {
  auto r = measure_end_to_end(log_of({{0, "source"}, {250, "target"}}), 200, 600);
  EXPECT_TRUE(r.at(0).pass);
  r = measure_end_to_end(log_of({{1000, "source"}, {1700, "target"}}), 200, 600);
  EXPECT_FALSE(r.at(0).pass);
  EXPECT_THROW(measure_end_to_end(log_of({{5, "target"}, {10, "source"}}), 0, 100), MalformedTrace);
}

TEST(WhJudge, Examples) {
  EXPECT_TRUE(wh_judge({true, true, false, true, true}, 2, 3).holds);
  const auto j = wh_judge({true, false, false, true}, 2, 3);
  EXPECT_FALSE(j.holds);
  EXPECT_EQ(j.first_violation, 0);
  EXPECT_FALSE(wh_judge({true, true, true, false, true}, 5, 5).holds);
  EXPECT_TRUE(wh_judge({true, true, true, true, true, true}, 5, 5).holds);
}

TEST(WhJudge, AgreesWithWindowEnumeration) {
  std::mt19937 gen(123);
  for (int n = 0; n < 2000; ++n) {
    const int k = std::uniform_int_distribution<int>(1, 6)(gen);
    const int m = std::uniform_int_distribution<int>(1, k)(gen);
    const int len = std::uniform_int_distribution<int>(0, 12)(gen);
    std::vector<bool> p;
    for (int i = 0; i < len; ++i) p.push_back(std::bernoulli_distribution(0.75)(gen));
    EXPECT_EQ(wh_judge(p, m, k).holds, brute_wh(p, m, k));
  }
}

// Appending a passing record never turns a holding verdict into a violation.
TEST(WhJudge, AppendingPassKeepsVerdict) {
  std::mt19937 gen(77);
  for (int n = 0; n < 2000; ++n) {
    const int k = std::uniform_int_distribution<int>(1, 6)(gen);
    const int m = std::uniform_int_distribution<int>(1, k)(gen);
    const int len = std::uniform_int_distribution<int>(0, 12)(gen);
    std::vector<bool> p;
    for (int i = 0; i < len; ++i) p.push_back(std::bernoulli_distribution(0.8)(gen));
    if (!wh_judge(p, m, k).holds) continue;
    p.push_back(true);
    EXPECT_TRUE(wh_judge(p, m, k).holds);
  }
}

TEST(WhJudge, HardConstraintNeedsEveryPass) {
  std::mt19937 gen(78);
  for (int n = 0; n < 500; ++n) {
    const int k = std::uniform_int_distribution<int>(1, 5)(gen);
    const int len = std::uniform_int_distribution<int>(0, 10)(gen);
    std::vector<bool> p;
    bool all = true;
    for (int i = 0; i < len; ++i) {
      p.push_back(std::bernoulli_distribution(0.85)(gen));
      all = all && p.back();
    }
    EXPECT_EQ(wh_judge(p, k, k).holds, all);
  }
}

// Shifting every occurrence by the same offset changes no verdict.
TEST(WhJudge, ShiftInvariant) {
  const WhConstraint c = constraint_of(
      "constraint E end_to_end(lower=10, upper=30, m=3, k=4) on source=a, target=b;");
  std::mt19937 gen(5);
  for (int n = 0; n < 200; ++n) {
    EventLog log;
    double t = 0.0;
    for (int i = 0; i < 10; ++i) {
      t += std::uniform_real_distribution<double>(1, 20)(gen);
      log.push_back({t, "source"});
      t += std::uniform_real_distribution<double>(5, 35)(gen);
      log.push_back({t, "target"});
    }
    EventLog shifted = log;
    for (auto &o : shifted) o.time += 1000.0;
    const auto a = check_events(log, c), b = check_events(shifted, c);
    EXPECT_EQ(a.wh_holds, b.wh_holds);
    EXPECT_EQ(passes_of(a.records), passes_of(b.records));
  }
}

TEST(Observer, ExecutionNeverFailsOnGoodWorker) {
  const WhConstraint c = constraint_of("constraint Job execution(lower=200, upper=400, m=1, k=1) on start=start, stop=stop;");
  const Network net = instantiate(attach_observers(parse_model(kWorker), {c}));
  const Simulator sim(net);
  for (std::uint64_t run = 0; run < 1000; ++run) {
    RngStream rng(1, run);
    const RunComparison r = compare_observer_run(sim, c, 3000.0, rng);
    ASSERT_FALSE(r.observer_failed);
    ASSERT_FALSE(r.oracle_failed);
    ASSERT_GT(r.events, 0);
  }
}

TEST(Observer, PeriodicFailsOnFirstGap) {
  const WhConstraint c = constraint_of("constraint P periodic(lower=700, upper=700, jitter=100, m=1, k=1) on occurrence=tick;");
  const Network net = instantiate(attach_observers(parse_model(kTicker), {c}));
  const Simulator sim(net);
  const int comp = net.component_index("P");
  const int fail = net.components[static_cast<std::size_t>(comp)].location_index("fail");
  RngStream rng(0, 0);
  double first_fail = -1.0;
  RunHooks hooks;
  hooks.on_event = [&](const State &s, const StepInfo &) {
    if (s.locs[static_cast<std::size_t>(comp)] == fail && first_fail < 0) first_fail = s.time;
    return true;
  };
  sim.run(3000.0, rng, hooks);
  EXPECT_DOUBLE_EQ(first_fail, 1000.0);
}

TEST(Observer, ReceiveOnlyTemplates) {
  for (const auto &c : requirement_suite().constraints) {
    const Template t = build_observer(c);
    for (const auto &e : t.edges) {
      ASSERT_TRUE(e.sync) << c.name;
      EXPECT_EQ(e.sync->dir, SyncDir::Receive) << c.name;
    }
    EXPECT_NE(t.find_location("fail"), nullptr);
    EXPECT_NE(t.find_location("success"), nullptr);
  }
}

TEST(Observer, PredicateBindingRejected) {
  const WhConstraint c = constraint_of("constraint X execution(lower=0, upper=5, m=1, k=1) on start=when(x > 1), stop=b;");
  EXPECT_THROW(build_observer(c), std::invalid_argument);
}

// Attaching observers leaves the network's own behaviour unchanged.
TEST(Observer, PureListener) {
  const Model bare = build_av_model();
  const Network plain = instantiate(bare);
  const Network watched = instantiate(attach_observers(bare, requirement_suite().constraints));
  const Simulator a(plain), b(watched);
  const auto n = static_cast<int>(plain.components.size());
  for (std::uint64_t run = 0; run < 20; ++run) {
    RngStream ra(3, run), rb(3, run);
    const Trace ta = a.run_trace(3000.0, ra), tb = b.run_trace(3000.0, rb);
    std::vector<std::string> ea, eb;
    for (const auto &e : ta.events) ea.push_back(std::to_string(e.time) + plain.components[e.component].name + e.edge);
    for (const auto &e : tb.events)
      if (e.component < n) eb.push_back(std::to_string(e.time) + watched.components[e.component].name + e.edge);
    ASSERT_EQ(ea, eb) << "run " << run;
  }
}

TEST(Observer, AgreesWithOracleOnCaseStudy) {
  const QueryFile suite = requirement_suite();
  const Network net = instantiate(attach_observers(build_av_model(), suite.constraints));
  const Simulator sim(net);
  for (const auto &c : suite.constraints) {
    long long events = 0;
    for (std::uint64_t run = 0; run < 100; ++run) {
      RngStream rng(17, run);
      const RunComparison r = compare_observer_run(sim, c, 3000.0, rng);
      EXPECT_EQ(r.observer_failed, r.oracle_failed) << c.name << " run " << run;
      events += r.events;
    }
    EXPECT_GT(events, 0) << c.name;
  }
}

TEST(Oracle, TraceAndLiveRecordingAgree) {
  const QueryFile suite = requirement_suite();
  const Network net = instantiate(build_av_model());
  const Simulator sim(net);
  for (const auto &c : suite.constraints) {
    RngStream r1(8, 0), r2(8, 0);
    const Trace t = sim.run_trace(3000.0, r1);
    EventRecorder rec(net, c);
    RunHooks hooks;
    hooks.on_initial = [&](const State &s) { rec.on_initial(s); };
    hooks.on_event = [&](const State &s, const StepInfo &i) {
      rec.on_event(s, i);
      return true;
    };
    sim.run(3000.0, r2, hooks);
    const EventLog a = extract_events(t, net, c);
    ASSERT_EQ(a.size(), rec.log().size()) << c.name;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].time, rec.log()[i].time);
      EXPECT_EQ(a[i].role, rec.log()[i].role);
    }
  }
}

TEST(WhEstimate, CaseStudyConstraintsHold) {
  const QueryFile suite = requirement_suite();
  const Network net = instantiate(build_av_model());
  StatConfig cfg;
  cfg.epsilon = 0.1;
  for (const auto &c : suite.constraints) {
    const SmcResult r = wh_estimate(net, c, 3000.0, cfg);
    EXPECT_EQ(r.name, c.name + ".wh");
    EXPECT_GE(r.p_hat, 0.95) << c.name;
  }
}
