#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stasmc/cli.hpp"

using namespace stasmc;
namespace fs = std::filesystem;

namespace {

std::string src(const std::string &rel) { return std::string(STASMC_SOURCE_DIR) + "/" + rel; }

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("stasmc_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines_of(const fs::path &p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

RunManifest manifest(const fs::path &out) {
  RunManifest m;
  m.model_path = src("models/av.sta");
  m.out_dir = out.string();
  m.stat.seed = 42;
  return m;
}

} // namespace

TEST(Validate, ExitCodes) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(src("models/av.sta"), out, err), exit_code::ok) << err.str();
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_validate(src("models/bad_weight.sta"), out2, err2), exit_code::validation);
  EXPECT_NE((out2.str() + err2.str()).find("nonpositive weight"), std::string::npos);
  std::ostringstream out3, err3;
  EXPECT_EQ(cmd_validate(src("models/missing.sta"), out3, err3), exit_code::io);
}

TEST(Simulate, WritesTrajectoriesWithManifest) {
  const fs::path dir = scratch("sim");
  RunManifest m = manifest(dir);
  m.query_text = "simulate 1 [<=3000] {Camera.exec}";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_simulate(m, out, err), exit_code::ok) << err.str();
  const auto rows = lines_of(dir / "traj.csv");
  ASSERT_GE(rows.size(), 3003u);
  EXPECT_EQ(rows[0].rfind("# manifest: {", 0), 0u);
  EXPECT_EQ(rows[1], "run,t,Camera.exec");
  const auto j = nlohmann::json::parse(rows[0].substr(std::string("# manifest: ").size()));
  EXPECT_EQ(j.at("seed"), 42);
}

TEST(Simulate, ZeroBoundIsUsageError) {
  RunManifest m = manifest(scratch("zero"));
  m.query_text = "simulate 1 [<=0] {Camera.exec}";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_simulate(m, out, err), exit_code::io);
}

TEST(Simulate, HistogramHasTwentyBins) {
  const fs::path dir = scratch("hist");
  RunManifest m = manifest(dir);
  m.query_text = "E[<=300; 20](max: braking_en)";
  m.histogram = true;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_simulate(m, out, err), exit_code::ok) << err.str();
  const auto rows = lines_of(dir / "hist.csv");
  ASSERT_EQ(rows.size(), 22u);
  EXPECT_EQ(rows[0].rfind("# manifest:", 0), 0u);
  EXPECT_EQ(rows[1], "bin_lo,bin_hi,count");
}

TEST(Check, UnrefinedControllerIsMismatch) {
  const fs::path dir = scratch("r16");
  RunManifest m = manifest(dir);
  m.model_path = src("models/av_unrefined.sta");
  m.query_path = src("models/r16.q");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_check(m, out, err), exit_code::mismatch) << err.str();
  std::ifstream in(dir / "results.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("manifest").at("seed"), 42);
  bool witness = false;
  for (const auto &e : fs::directory_iterator(dir))
    witness = witness || e.path().filename().string().find("_witness.jsonl") != std::string::npos;
  EXPECT_TRUE(witness);
}

TEST(Generate, MatchesShippedFixtures) {
  const fs::path dir = scratch("gen");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_generate("", dir.string(), out, err), exit_code::ok) << err.str();
  for (const char *f : {"av.sta", "av_unrefined.sta", "requirements.q", "r16.q"}) {
    std::ifstream a(dir / f), b(src(std::string("models/") + f));
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << f;
  }
}

TEST(Trace, WritesEventsAndGrid) {
  const fs::path dir = scratch("trace");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_trace(src("models/av.sta"), 100.0, 42, 0, "wvl,wvr", 1.0, dir.string(), out, err), exit_code::ok)
      << err.str();
  const auto events = lines_of(dir / "trace.jsonl");
  ASSERT_GE(events.size(), 2u);
  EXPECT_TRUE(nlohmann::json::parse(events[0]).contains("manifest"));
  const auto grid = lines_of(dir / "trace.csv");
  ASSERT_GE(grid.size(), 3u);
  EXPECT_EQ(grid[1], "t,wvl,wvr");
}
