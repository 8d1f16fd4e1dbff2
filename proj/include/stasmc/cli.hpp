#pragma once

#include <optional>
#include <ostream>
#include <string>

#include "stasmc/engine.hpp"
#include "stasmc/smc.hpp"

namespace stasmc {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 1;
inline constexpr int io = 2; // also usage errors
inline constexpr int query_failure = 3;
inline constexpr int mismatch = 4;
} // namespace exit_code

/// Everything needed to replay a command. Recorded in every output file.
struct RunManifest {
  std::string model_path;
  std::string query_path;  // query file, or empty when `query_text` is used
  std::string query_text;  // a single query given on the command line
  StatConfig stat;
  std::string out_dir = ".";
  double sample_step = 1.0;
  std::optional<double> bound_override;
  bool histogram = false; // simulate: also run expected-value queries
  EngineOptions engine;
};

std::string manifest_json(const RunManifest &m);

int cmd_validate(const std::string &model_path, std::ostream &out, std::ostream &err);

/// Runs every query and constraint of the query file against the model with
/// observers attached. Writes results.json plus per-query CSV files.
int cmd_check(const RunManifest &m, std::ostream &out, std::ostream &err);

/// Runs simulate queries (and expected-value queries when `histogram` is set).
int cmd_simulate(const RunManifest &m, std::ostream &out, std::ostream &err);

/// Writes av.sta, av_unrefined.sta, requirements.q and r16.q.
int cmd_generate(const std::string &config_path, const std::string &out_dir, std::ostream &out,
                 std::ostream &err);

/// Records one run: trace.jsonl with every event and trace.csv sampled on the
/// grid. `watch` is a comma-separated expression list.
int cmd_trace(const std::string &model_path, double bound, std::uint64_t seed, std::uint64_t run,
              const std::string &watch, double sample_step, const std::string &out_dir, std::ostream &out,
              std::ostream &err);

} // namespace stasmc
