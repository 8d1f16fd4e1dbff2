#include <gtest/gtest.h>

#include <random>

#include "stasmc/avmodel.hpp"
#include "stasmc/dsl.hpp"
#include "stasmc/model.hpp"

using namespace stasmc;

namespace {

ValidationReport check(const std::string &text) { return validate_model(parse_model(text)); }

} // namespace

TEST(Validate, MinimalModelIsClean) {
  const auto r = check("template T() { init loc a } system T;");
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Validate, ZeroWeight) {
  const auto r = check(R"(
    template T() {
      init loc a
      a -> a { weight 0; }
    }
    system T;)");
  EXPECT_TRUE(r.has_error("nonpositive weight"));
}

TEST(Validate, UndeclaredChannel) {
  const auto r = check(R"(
    template T() {
      init loc a
      a -> a { sync foo!; }
    }
    system T;)");
  EXPECT_TRUE(r.has_error("unknown channel"));
}

TEST(Validate, InitialLocationCount) {
  EXPECT_TRUE(check("template T() { loc a } system T;").has_error("no initial location"));
  EXPECT_TRUE(check("template T() { init loc a init loc b } system T;").has_error("multiple initial locations"));
}

TEST(Validate, UnknownEdgeEndpoint) {
  EXPECT_TRUE(check("template T() { init loc a a -> b {} } system T;").has_error("unknown location"));
}

TEST(Validate, NonlinearClockGuard) {
  const auto r = check(R"(
    template T() {
      clock x;
      init loc a
      a -> a { guard x * x >= 4; }
    }
    system T;)");
  EXPECT_TRUE(r.has_error("nonlinear clock constraint"));
}

TEST(Validate, RateInCommittedLocationWarns) {
  const auto r = check(R"(
    clock e;
    template T() {
      init committed loc a { rate e = 2; }
      loc b
      a -> b {}
    }
    system T;)");
  EXPECT_TRUE(r.ok());
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.warnings[0].code, "committed rate");
}

TEST(Validate, ArityAndUnknownTemplate) {
  EXPECT_TRUE(check("template T(int id) { init loc a } system T;").has_error("arity mismatch"));
  EXPECT_TRUE(check("template T() { init loc a } system U;").has_error("unknown template"));
}

TEST(Validate, IsPure) {
  const Model m = parse_model(R"(
    template T() {
      init loc a
      a -> a { weight 0; sync nope!; }
    }
    system T;)");
  const auto a = validate_model(m);
  const auto b = validate_model(m);
  EXPECT_EQ(to_string(a), to_string(b));
  EXPECT_EQ(a.errors.size(), 2u);
}

TEST(Instantiate, SubstitutesParameters) {
  const Network net = instantiate(parse_model(R"(
    template T(id: int) {
      int me = id;
      init loc a
    }
    system T(0), T(1);)"));
  ASSERT_EQ(net.components.size(), 2u);
  const int v0 = net.var_index(net.components[0].name + ".me");
  const int v1 = net.var_index(net.components[1].name + ".me");
  ASSERT_GE(v0, 0);
  ASSERT_GE(v1, 0);
  EXPECT_EQ(net.vars[static_cast<std::size_t>(v0)].initial.as_int(), 0);
  EXPECT_EQ(net.vars[static_cast<std::size_t>(v1)].initial.as_int(), 1);
}

TEST(Instantiate, UnknownTemplateThrows) {
  EXPECT_THROW(instantiate(parse_model("template T() { init loc a } system U;")), ModelError);
}

TEST(Instantiate, CaseStudyHasElevenComponents) {
  const Network net = instantiate(build_av_model());
  EXPECT_EQ(net.components.size(), 11u);
  const char *order[] = {"SignSource", "Camera", "SignRec", "Ctrl", "Straight", "Turn_left",
                         "Turn_right", "Stop", "SpeedLeft", "SpeedRight", "Energy"};
  for (std::size_t i = 0; i < 11; ++i) EXPECT_EQ(net.components[i].name, order[i]);
}

TEST(Instantiate, ClockInitialiser) {
  const Network net = instantiate(parse_model("clock v = 30; template T() { init loc a } system T;"));
  EXPECT_DOUBLE_EQ(net.clocks[static_cast<std::size_t>(net.clock_index("v"))].initial, 30.0);
  EXPECT_THROW(instantiate(parse_model("clock v = true; template T() { init loc a } system T;")),
               ModelError);
}

// instantiate succeeds exactly when validation reports no errors.
TEST(Instantiate, AgreesWithValidation) {
  std::mt19937 gen(7);
  const char *guards[] = {"", "guard x >= 2;", "guard x * x > 1;", "guard y >= 1;"};
  const char *syncs[] = {"", "sync c!;", "sync c?;", "sync d!;"};
  const char *weights[] = {"", "weight 2;", "weight 0;", "weight -1;"};
  const char *targets[] = {"a", "b", "z"};
  const char *inits[] = {"init loc a", "loc a", "init loc a { inv x <= 3; }"};
  int accepted = 0;
  for (int n = 0; n < 300; ++n) {
    auto pick = [&](auto &arr) { return arr[std::uniform_int_distribution<std::size_t>(0, std::size(arr) - 1)(gen)]; };
    std::string text = "broadcast chan c;\ntemplate T() { clock x; int k; ";
    text += pick(inits);
    text += " loc b ";
    text += std::string("a -> ") + pick(targets) + " { " + pick(guards) + pick(syncs) + pick(weights) + " } ";
    text += std::string("b -> ") + pick(targets) + " { " + pick(weights) + " } ";
    text += "} system T;";
    const Model m = parse_model(text);
    const bool ok = validate_model(m).ok();
    accepted += ok;
    if (ok) EXPECT_NO_THROW(instantiate(m)) << text;
    else EXPECT_THROW(instantiate(m), ModelError) << text;
  }
  EXPECT_GT(accepted, 0);
  EXPECT_LT(accepted, 300);
}
