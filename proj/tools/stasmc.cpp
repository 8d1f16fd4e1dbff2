#include <iostream>

#include "CLI11.hpp"

#include "stasmc/cli.hpp"

namespace {

void add_stat_flags(CLI::App &cmd, stasmc::RunManifest &m) {
  cmd.add_option("--seed", m.stat.seed, "base seed")->capture_default_str();
  cmd.add_option("--alpha", m.stat.alpha, "error level")->capture_default_str();
  cmd.add_option("--epsilon", m.stat.epsilon, "estimate precision")->capture_default_str();
  cmd.add_option("--indifference", m.stat.delta, "SPRT indifference half-width")->capture_default_str();
  cmd.add_option("--max-runs", m.stat.max_runs, "run ceiling for sequential tests")->capture_default_str();
  cmd.add_option("--workers", m.stat.workers, "simulation threads")->capture_default_str();
  cmd.add_option("--bins", m.stat.hist_bins, "histogram bins")->capture_default_str();
  cmd.add_option("--bound-override", m.bound_override, "replace every query bound");
  cmd.add_option("--sample-step", m.sample_step, "trajectory sampling step")->capture_default_str();
  cmd.add_option("--out", m.out_dir, "output directory")->capture_default_str();
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Statistical model checker for stochastic timed automata"};
  app.require_subcommand(1);

  std::string model;
  auto *validate = app.add_subcommand("validate", "check a model for structural errors");
  validate->add_option("model", model, "model file")->required();

  stasmc::RunManifest check_m;
  auto *check = app.add_subcommand("check", "run a query file and compare with expectations");
  check->add_option("model", check_m.model_path, "model file")->required();
  check->add_option("queries", check_m.query_path, "query file")->required();
  add_stat_flags(*check, check_m);

  stasmc::RunManifest sim_m;
  auto *simulate = app.add_subcommand("simulate", "run simulate queries and write CSV trajectories");
  simulate->add_option("model", sim_m.model_path, "model file")->required();
  simulate->add_option("queries", sim_m.query_path, "query file");
  simulate->add_option("--query", sim_m.query_text, "a single query");
  simulate->add_flag("--hist", sim_m.histogram, "also run expected-value queries and write hist.csv");
  add_stat_flags(*simulate, sim_m);

  std::string config, gen_out = ".";
  auto *generate = app.add_subcommand("generate", "write the case-study model and query files");
  generate->add_option("--config", config, "parameter file (key = value)");
  generate->add_option("--out", gen_out, "output directory")->capture_default_str();

  std::string trace_model, watch, trace_out = ".";
  double bound = 3000.0, step = 1.0;
  std::uint64_t seed = 0, run = 0;
  auto *trace = app.add_subcommand("trace", "record one run as JSON lines and CSV");
  trace->add_option("model", trace_model, "model file")->required();
  trace->add_option("--bound", bound, "time bound")->capture_default_str();
  trace->add_option("--seed", seed, "base seed")->capture_default_str();
  trace->add_option("--run", run, "run index")->capture_default_str();
  trace->add_option("--watch", watch, "comma-separated expressions");
  trace->add_option("--sample-step", step, "CSV sampling step")->capture_default_str();
  trace->add_option("--out", trace_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : stasmc::exit_code::io;
  }

  if (*validate) return stasmc::cmd_validate(model, std::cout, std::cerr);
  if (*check) return stasmc::cmd_check(check_m, std::cout, std::cerr);
  if (*simulate) return stasmc::cmd_simulate(sim_m, std::cout, std::cerr);
  if (*generate) return stasmc::cmd_generate(config, gen_out, std::cout, std::cerr);
  return stasmc::cmd_trace(trace_model, bound, seed, run, watch, step, trace_out, std::cout, std::cerr);
}
