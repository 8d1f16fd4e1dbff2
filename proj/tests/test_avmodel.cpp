#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "stasmc/avmodel.hpp"
#include "stasmc/dsl.hpp"
#include "stasmc/monitors.hpp"
#include "stasmc/smc.hpp"

using namespace stasmc;

namespace {

constexpr double kTol = 1e-6;

const NamedQuery &find(const std::vector<NamedQuery> &qs, const std::string &name) {
  for (const auto &q : qs)
    if (q.name == name) return q;
  throw std::out_of_range(name);
}

} // namespace

TEST(AvConfig, DefaultsValidate) {
  EXPECT_NO_THROW(AvConfig{}.validate());
  const ValidationReport r = validate_model(build_av_model());
  EXPECT_TRUE(r.ok()) << to_string(r);
  EXPECT_TRUE(r.warnings.empty()) << to_string(r);
}

TEST(AvConfig, RejectsBrokenInvariants) {
  AvConfig c;
  c.turning_rate = c.updown_rate + 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.camera_jitter = c.camera_period;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.constspeed_rate = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.sign_weights[3] = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(AvConfig, ParsesKeyValueText) {
  const AvConfig c = parse_av_config("# tuned\nbraking_rate = 60\nrefined = false\nweight_stop = 20  # heavier\n");
  EXPECT_EQ(c.braking_rate, 60.0);
  EXPECT_FALSE(c.refined);
  EXPECT_EQ(c.sign_weights[7], 20.0);
  EXPECT_THROW(parse_av_config("nonsense = 1"), std::invalid_argument);
  EXPECT_THROW(parse_av_config("accel = fast"), std::invalid_argument);
  EXPECT_THROW(parse_av_config("updown_rate = 100"), std::invalid_argument);
}

TEST(AvModel, UnrefinedDiffersOnlyInController) {
  AvConfig u;
  u.refined = false;
  const Model a = build_av_model(), b = build_av_model(u);
  ASSERT_EQ(a.templates.size(), b.templates.size());
  for (std::size_t i = 0; i < a.templates.size(); ++i) {
    if (a.templates[i].name == "Ctrl") continue;
    EXPECT_EQ(print_model(Model{{}, {a.templates[i]}, {}}), print_model(Model{{}, {b.templates[i]}, {}}));
  }
}

TEST(Requirements, TableRows) {
  const auto qs = requirement_queries();
  EXPECT_EQ(to_string(find(qs, "R47").query), "Pr[<=3000]([] !CameraExec.fail) >= 0.95");
  EXPECT_EQ(find(qs, "R47").expected->verdict, Verdict::Valid);
  EXPECT_EQ(to_string(find(qs, "R51").query), "Pr[<=3000]([] CamToReg.dclk <= 25)");
  EXPECT_EQ(find(qs, "R51").expected->range, std::make_pair(0.9, 1.0));
  EXPECT_EQ(to_string(find(qs, "R42").query), "E[<=3000; 100](max: braking_en)");
  for (const char *r : {"R46", "R48", "R49", "R50"}) EXPECT_EQ(find(qs, r).expected->verdict, Verdict::Valid) << r;
  EXPECT_FALSE(find(qs, "R28").expected.has_value());
  EXPECT_TRUE(std::holds_alternative<SimulateQuery>(find(qs, "R45").query));
}

TEST(Requirements, CompileAgainstNetwork) {
  const QueryFile suite = requirement_suite();
  const Network net = instantiate(attach_observers(build_av_model(), suite.constraints));
  for (const auto &q : suite.queries) {
    std::visit(
        [&](const auto &x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, EstimateQuery> || std::is_same_v<T, HypothesisQuery>)
            EXPECT_NO_THROW(net.compile(x.path.state)) << q.name;
          else if constexpr (std::is_same_v<T, CompareQuery>) {
            EXPECT_NO_THROW(net.compile(x.left.state)) << q.name;
            EXPECT_NO_THROW(net.compile(x.right.state)) << q.name;
          } else if constexpr (std::is_same_v<T, ExpectedQuery>)
            EXPECT_NO_THROW(net.compile(x.expr)) << q.name;
          else
            for (const auto &e : x.exprs) EXPECT_NO_THROW(net.compile(e)) << q.name;
        },
        q.query);
  }
}

// Per-state properties checked after every event of many runs.
TEST(AvModel, StateInvariantsAcrossRuns) {
  const Network net = instantiate(build_av_model());
  const Simulator sim(net);
  const auto wvl = net.compile(parse_expr("wvl")), wvr = net.compile(parse_expr("wvr"));
  const auto avg = net.compile(parse_expr("average_speed"));
  const auto turning_left = net.compile(parse_expr("!Turn_left.ini"));
  const auto turning_right = net.compile(parse_expr("!Turn_right.ini"));
  const auto stopped = net.compile(parse_expr("Stop.totally_stop"));
  const char *energy[] = {"Con_en", "constSpeed_en", "Up_en", "Down_en", "Turning_en", "braking_en"};
  std::vector<CompiledExpr> en;
  for (const char *e : energy) en.push_back(net.compile(parse_expr(e)));
  const auto con = net.compile(parse_expr("Con_en"));

  long long stops = 0, lefts = 0;
  for (std::uint64_t run = 0; run < 200; ++run) {
    RngStream rng(2024, run);
    double last_con = 0.0;
    RunHooks hooks;
    hooks.on_event = [&](const State &s, const StepInfo &) {
      const EvalEnv env = s.env();
      const double l = eval_real(wvl, env), r = eval_real(wvr, env);
      EXPECT_GE(l, -kTol) << "run " << run << " t=" << s.time;
      EXPECT_GE(r, -kTol) << "run " << run << " t=" << s.time;
      EXPECT_NEAR(eval_real(avg, env), (l + r) / 2.0, 1e-6 * std::max(1.0, l + r));
      if (eval_bool(turning_left, env)) {
        ++lefts;
        EXPECT_LE(l, r + kTol) << "run " << run << " t=" << s.time;
      }
      if (eval_bool(turning_right, env)) EXPECT_LE(r, l + kTol) << "run " << run << " t=" << s.time;
      if (eval_bool(stopped, env)) {
        ++stops;
        EXPECT_NEAR(l, 0.0, kTol);
        EXPECT_NEAR(r, 0.0, kTol);
      }
      const double c = eval_real(con, env);
      EXPECT_GE(c, last_con - kTol);
      last_con = c;
      for (const auto &e : en) EXPECT_GE(eval_real(e, env), -kTol);
      return !HasFailure();
    };
    sim.run(3000.0, rng, hooks);
    if (HasFailure()) break;
  }
  EXPECT_GT(stops, 0);
  EXPECT_GT(lefts, 0);
}

TEST(AvModel, SignDistributionInNetwork) {
  const Network net = instantiate(build_av_model());
  const Simulator sim(net);
  const int source = net.component_index("SignSource");
  std::array<long long, 8> counts{};
  long long n = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    RngStream rng(31, run);
    RunHooks hooks;
    hooks.on_event = [&](const State &, const StepInfo &info) {
      for (const auto &[comp, edge] : info.receivers)
        if (comp == source) {
          ++counts[static_cast<std::size_t>(edge)];
          ++n;
        }
      return true;
    };
    sim.run(3000.0, rng, hooks);
  }
  ASSERT_GT(n, 5000);
  double chi2 = 0.0;
  const AvConfig cfg;
  for (std::size_t i = 0; i < 8; ++i) {
    const double expected = static_cast<double>(n) * cfg.sign_weights[i] / 100.0;
    chi2 += (static_cast<double>(counts[i]) - expected) * (static_cast<double>(counts[i]) - expected) / expected;
  }
  EXPECT_LT(chi2, boost::math::quantile(boost::math::chi_squared(7), 0.99));
}

TEST(AvModel, CameraGapsStayInBand) {
  const Network net = instantiate(build_av_model());
  const Simulator sim(net);
  const int cam = net.channel_index("cam_start");
  for (std::uint64_t run = 0; run < 100; ++run) {
    RngStream rng(12, run);
    double last = -1.0;
    RunHooks hooks;
    hooks.on_event = [&](const State &s, const StepInfo &info) {
      if (info.channel == cam) {
        if (last >= 0.0) {
          EXPECT_GE(s.time - last, 30.0 - kTol);
          EXPECT_LE(s.time - last, 40.0 + kTol);
        }
        last = s.time;
      }
      return true;
    };
    sim.run(3000.0, rng, hooks);
  }
}

TEST(AvModel, StopWhileTurningPair) {
  const std::string query = "Pr[<=3000](<> Stop.totally_stop && wvl == 0 && wvr > 0)";
  AvConfig u;
  u.refined = false;
  StatConfig cfg;
  cfg.seed = 42;
  NamedQuery q;
  q.query = parse_query(query);
  const SmcResult bad = run_query(instantiate(build_av_model(u)), q, cfg);
  EXPECT_GT(bad.p_hat, 0.0);

  const auto r16 = parse_query_file(r16_text()).queries.at(0);
  const SmcResult good = run_query(instantiate(build_av_model()), r16, cfg);
  EXPECT_EQ(good.verdict, Verdict::Valid);
}
