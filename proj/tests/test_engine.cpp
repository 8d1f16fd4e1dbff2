#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "stasmc/avmodel.hpp"
#include "stasmc/dsl.hpp"
#include "stasmc/engine.hpp"

using namespace stasmc;

namespace {

Network net_of(const std::string &text) { return instantiate(parse_model(text)); }

double clock_of(const Network &net, const State &s, const std::string &name) {
  return s.clocks[static_cast<std::size_t>(net.clock_index(name))];
}

} // namespace

TEST(RngStream, ReplaysFromSeedAndIndex) {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform01();
    EXPECT_EQ(x, b.uniform01());
    differs |= x != c.uniform01();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.counter(), 100u);
}

TEST(SampleDelay, UniformUnderInvariant) {
  const Network net = net_of(R"(
    template T() {
      clock x;
      init loc a { inv x <= 10; }
      a -> a { update x := 0; }
    }
    system T;)");
  const Simulator sim(net);
  const State s = sim.initial_state();
  RngStream rng(1, 0);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double d = sim.sample_delay(s, 0, rng);
    ASSERT_GE(d, 0.0);
    ASSERT_LE(d, 10.0);
    sum += d;
  }
  EXPECT_NEAR(sum / n, 5.0, 0.2);
}

TEST(SampleDelay, ExponentialWithoutCeiling) {
  const Network net = net_of(R"(
    template T() {
      init loc a { exitrate 2.0; }
      a -> a {}
    }
    system T;)");
  const Simulator sim(net);
  const State s = sim.initial_state();
  RngStream rng(2, 0);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += sim.sample_delay(s, 0, rng);
  EXPECT_NEAR(sum / n, 0.5, 0.05);
}

TEST(SampleDelay, StartsAtEarliestEnabling) {
  const Network net = net_of(R"(
    template T() {
      clock x;
      init loc a { inv x <= 6; }
      a -> a { guard x >= 4; update x := 0; }
    }
    system T;)");
  const Simulator sim(net);
  const State s = sim.initial_state();
  RngStream rng(3, 0);
  for (int i = 0; i < 1000; ++i) {
    const double d = sim.sample_delay(s, 0, rng);
    ASSERT_GE(d, 4.0);
    ASSERT_LE(d, 6.0);
  }
}

TEST(SampleDelay, InvariantViolatedOnEntry) {
  const Network net = net_of(R"(
    clock x = 5;
    template T() {
      init loc a { inv x <= 1; }
      a -> a {}
    }
    system T;)");
  const Simulator sim(net);
  RngStream rng(0, 0);
  EXPECT_THROW(sim.sample_delay(sim.initial_state(), 0, rng), EngineError);
}

TEST(Step, CommittedFiresWithoutDelay) {
  const Network net = net_of(R"(
    int n;
    template T() {
      init committed loc a
      loc b
      a -> b { update n := 1; }
    }
    template U() {
      clock y;
      init loc u { inv y <= 2; }
      u -> u { update y := 0; }
    }
    system U, T;)");
  const Simulator sim(net);
  State s = sim.initial_state();
  RngStream rng(0, 0);
  StepInfo info;
  EXPECT_EQ(sim.step(s, rng, 100.0, info), StepStatus::Fired);
  EXPECT_EQ(s.time, 0.0);
  EXPECT_EQ(info.component, 1);
  EXPECT_EQ(s.vars[0].as_int(), 1);
}

TEST(Step, RaceMinimumWins) {
  const Network net = net_of(R"(
    int who;
    template A() {
      clock x;
      init loc a { inv x <= 3; }
      loc done
      a -> done { guard x >= 3; update who := 1; }
    }
    template B() {
      clock y;
      init loc b { inv y <= 5; }
      loc done
      b -> done { guard y >= 5; update who := 2; }
    }
    system A, B;)");
  const Simulator sim(net);
  State s = sim.initial_state();
  RngStream rng(0, 0);
  StepInfo info;
  ASSERT_EQ(sim.step(s, rng, 100.0, info), StepStatus::Fired);
  EXPECT_DOUBLE_EQ(s.time, 3.0);
  EXPECT_EQ(info.component, 0);
  EXPECT_EQ(s.vars[0].as_int(), 1);
  EXPECT_DOUBLE_EQ(clock_of(net, s, "B.y"), 3.0);
}

TEST(Step, TiesGoToLowestIndex) {
  const Network net = net_of(R"(
    template A() {
      clock x;
      init loc a { inv x <= 2; }
      loc done
      a -> done { guard x >= 2; }
    }
    system A, B = A;)");
  const Simulator sim(net);
  State s = sim.initial_state();
  RngStream rng(0, 0);
  StepInfo info;
  ASSERT_EQ(sim.step(s, rng, 100.0, info), StepStatus::Fired);
  EXPECT_EQ(info.component, 0);
}

TEST(Step, BroadcastReachesEveryEnabledReceiver) {
  const Network net = net_of(R"(
    broadcast chan stop;
    template Ctrl() {
      clock x;
      init loc run { inv x <= 1; }
      loc halted
      run -> halted { guard x >= 1; sync stop!; }
    }
    template Sub() {
      init loc moving
      loc stopped
      moving -> stopped { sync stop?; }
    }
    template Deaf() {
      init loc idle
    }
    system Ctrl, Straight = Sub, TurnLeft = Sub, Deaf;)");
  const Simulator sim(net);
  State s = sim.initial_state();
  RngStream rng(0, 0);
  StepInfo info;
  ASSERT_EQ(sim.step(s, rng, 10.0, info), StepStatus::Fired);
  EXPECT_EQ(info.receivers.size(), 2u);
  EXPECT_EQ(s.locs[1], net.components[1].location_index("stopped"));
  EXPECT_EQ(s.locs[2], net.components[2].location_index("stopped"));
}

TEST(Step, BinaryChannelNeedsOneReceiver) {
  const Network net = net_of(R"(
    chan go;
    int got;
    template Sender() {
      clock x;
      init loc a { inv x <= 1; }
      loc b
      a -> b { guard x >= 1; sync go!; }
    }
    template Receiver() {
      init loc w
      loc r
      w -> r { sync go?; update got := got + 1; }
    }
    system Sender, R1 = Receiver, R2 = Receiver;)");
  const Simulator sim(net);
  State s = sim.initial_state();
  RngStream rng(0, 0);
  StepInfo info;
  ASSERT_EQ(sim.step(s, rng, 10.0, info), StepStatus::Fired);
  EXPECT_EQ(info.receivers.size(), 1u);
  EXPECT_EQ(s.vars[0].as_int(), 1);

  // Without a receiver the emitting edge is disabled and nothing happens.
  const Network lonely = net_of(R"(
    chan go;
    template Sender() {
      init loc a
      loc b
      a -> b { sync go!; }
    }
    system Sender;)");
  const Simulator sim2(lonely);
  RngStream rng2(0, 0);
  const Trace t = sim2.run_trace(10.0, rng2);
  EXPECT_TRUE(t.events.empty());
}

TEST(Step, WeightedChoiceFollowsWeights) {
  const Network net = instantiate(parse_model(sign_source_text()));
  const Simulator sim(net);
  State s = sim.initial_state();
  RngStream rng(11, 0);
  std::array<long long, 8> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    StepInfo info;
    ASSERT_EQ(sim.step(s, rng, 1e12, info), StepStatus::Fired);
    counts[static_cast<std::size_t>(info.edge)]++;
  }
  const double weights[] = {30, 10, 10, 10, 10, 10, 10, 10};
  double chi2 = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double expected = n * weights[i] / 100.0;
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  const boost::math::chi_squared dist(7);
  EXPECT_LT(chi2, boost::math::quantile(dist, 0.99));
  EXPECT_NEAR(counts[0] / double(n), 0.30, 0.01);
}

TEST(Integrate, ConstantRates) {
  const Network net = net_of(R"(
    clock x; clock h;
    template T() {
      init loc a { rate h = 0; }
    }
    system T;)");
  const Simulator sim(net);
  State s = sim.initial_state();
  s.clocks[static_cast<std::size_t>(net.clock_index("h"))] = 4.0;
  sim.integrate_rates(s, 3.0);
  EXPECT_EQ(clock_of(net, s, "x"), 3.0);
  sim.integrate_rates(s, 7.0);
  EXPECT_EQ(clock_of(net, s, "h"), 4.0);
  EXPECT_EQ(s.time, 10.0);
}

TEST(Integrate, EnergyOfAcceleratingWheel) {
  const Network net = net_of(R"(
    clock v = 30; clock e;
    template T() {
      init loc a { rate v = 8; rate e = 0.1 * v; }
    }
    system T;)");
  const Simulator sim(net);
  State s = sim.initial_state();
  sim.integrate_rates(s, 2.0);
  EXPECT_NEAR(clock_of(net, s, "e"), 7.6, 1e-6);
  EXPECT_NEAR(clock_of(net, s, "v"), 46.0, 1e-12);
}

TEST(Integrate, NonlinearRateUsesRungeKutta) {
  const Network net = net_of(R"(
    clock y = 1;
    template T() {
      init loc a { rate y = y; }
    }
    system T;)");
  const Simulator sim(net);
  State s = sim.initial_state();
  sim.integrate_rates(s, 1.0);
  EXPECT_NEAR(clock_of(net, s, "y"), std::exp(1.0), 1e-6);
}

TEST(Integrate, NonFiniteRateAborts) {
  const Network net = net_of(R"(
    real z = 0;
    clock y;
    template T() {
      init loc a { rate y = 1 / z; }
    }
    system T;)");
  const Simulator sim(net);
  State s = sim.initial_state();
  EXPECT_THROW(sim.integrate_rates(s, 1.0), std::exception);
}

TEST(Run, CommittedLoopHitsStepCeiling) {
  const Network net = net_of(R"(
    template T() {
      init committed loc a
      a -> a {}
    }
    system T;)");
  EngineOptions opts;
  opts.max_steps = 1000;
  const Simulator sim(net, opts);
  RngStream rng(0, 0);
  try {
    sim.run(10.0, rng);
    FAIL() << "no error";
  } catch (const EngineError &e) {
    EXPECT_NE(std::string(e.what()).find("zeno/committed-loop"), std::string::npos);
  }
}

TEST(Run, NoEdgesReachesBound) {
  const Network net = net_of("template T() { init loc a } system T;");
  const Simulator sim(net);
  RngStream rng(0, 0);
  const Trace t = sim.run_trace(25.0, rng);
  EXPECT_EQ(t.end, EndReason::BoundReached);
  EXPECT_TRUE(t.events.empty());
  EXPECT_EQ(t.end_time, 25.0);
}

TEST(Run, DeadlockInCommittedLocation) {
  const Network net = net_of(R"(
    template T() {
      init committed loc a
      loc b
      a -> b { guard false; }
    }
    system T;)");
  const Simulator sim(net);
  RngStream rng(0, 0);
  EXPECT_EQ(sim.run_trace(10.0, rng).end, EndReason::Deadlock);
}

TEST(Run, CaseStudyTraceReplays) {
  const Network net = instantiate(build_av_model());
  const Simulator sim(net);
  const std::vector<std::string> names{"wvl", "wvr", "average_speed"};
  std::vector<CompiledExpr> watch;
  for (const auto &n : names) watch.push_back(net.compile(parse_expr(n)));
  auto dump = [&] {
    RngStream rng(42, 3);
    std::ostringstream os;
    write_jsonl(os, net, sim.run_trace(3000.0, rng, watch), names);
    return os.str();
  };
  const std::string a = dump();
  EXPECT_GT(a.size(), 1000u);
  EXPECT_EQ(a, dump());
}

// Time never decreases and every visible state satisfies all invariants.
TEST(Run, MonotoneTimeAndInvariants) {
  const Network net = instantiate(build_av_model());
  EngineOptions opts;
  opts.check_invariants = true;
  const Simulator sim(net, opts);
  for (std::uint64_t run = 0; run < 20; ++run) {
    RngStream rng(9, run);
    double last = 0.0;
    RunHooks hooks;
    hooks.on_event = [&](const State &s, const StepInfo &) {
      EXPECT_GE(s.time, last);
      last = s.time;
      for (std::size_t c = 0; c < net.components.size(); ++c)
        EXPECT_TRUE(sim.invariant_holds(s, static_cast<int>(c))) << net.components[c].name << " t=" << s.time;
      return true;
    };
    EXPECT_EQ(sim.run(3000.0, rng, hooks), EndReason::BoundReached);
  }
}

TEST(Run, SamplesOnGridUpToBound) {
  const Network net = net_of(R"(
    template T() {
      clock x;
      init loc a { inv x <= 3; }
      a -> a { update x := 0; }
    }
    system T;)");
  const Simulator sim(net);
  RngStream rng(5, 0);
  std::vector<double> times;
  RunHooks hooks;
  hooks.sample_step = 0.5;
  hooks.on_sample = [&](const State &s) { times.push_back(s.time); };
  sim.run(10.0, rng, hooks);
  ASSERT_EQ(times.size(), 21u);
  for (std::size_t i = 0; i < times.size(); ++i) EXPECT_NEAR(times[i], 0.5 * i, 1e-9);
}
