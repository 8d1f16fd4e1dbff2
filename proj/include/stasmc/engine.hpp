#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stasmc/model.hpp"

namespace stasmc {

/// Raised when a run cannot continue: invariant violated on entry, non-finite
/// rate, step ceiling exceeded.
class EngineError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Random stream of one run. The pair (seed, run index) fully determines
/// every draw.
class RngStream : public UniformSource {
public:
  RngStream(std::uint64_t seed, std::uint64_t run_index);

  /// Uniform on [0, 1), 53 bits.
  double uniform01() override;
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double exponential(double rate);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t run_index() const { return run_index_; }
  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t seed_;
  std::uint64_t run_index_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 gen_;
};

struct State {
  double time = 0.0;
  std::vector<int> locs;
  std::vector<Value> vars;
  std::vector<double> clocks;

  EvalEnv env(UniformSource *rng = nullptr) const { return EvalEnv{vars, clocks, locs, time, rng}; }
};

enum class EndReason : std::uint8_t { BoundReached, Deadlock, Stopped };
const char *to_string(EndReason r);

/// One discrete transition: the acting component and edge plus every
/// receiver that synchronized with it.
struct StepInfo {
  double time = 0.0;
  int component = -1;
  int edge = -1;
  int channel = -1;
  std::vector<std::pair<int, int>> receivers; // (component, edge)
};

struct TraceEvent {
  double time = 0.0;
  int component = -1;
  std::string edge; // `src->dst`
  int channel = -1;
  std::vector<int> receivers;
  std::vector<Value> watch;
};

struct Trace {
  State initial;
  std::vector<TraceEvent> events;
  std::vector<Value> initial_watch;
  std::vector<Value> final_watch;
  double end_time = 0.0;
  EndReason end = EndReason::BoundReached;
};

struct EngineOptions {
  double h_max = 0.05;
  long long max_steps = 1'000'000;
  bool check_invariants = false;
};

/// Callbacks invoked during a run. Returning false from on_event stops the
/// run with EndReason::Stopped.
struct RunHooks {
  std::function<void(const State &)> on_initial;
  std::function<bool(const State &, const StepInfo &)> on_event;
  /// Called at t = 0, step, 2 step, ... up to and including the bound.
  double sample_step = 0.0;
  std::function<void(const State &)> on_sample;
  std::function<void(const State &, EndReason)> on_end;
};

enum class StepStatus : std::uint8_t { Fired, Idle, BoundReached, Deadlock };

/// Grid sampling cursor: `fn` is called at t = k * step while time advances.
struct Sampler {
  double step = 0.0;
  long long next = 0;
  const std::function<void(const State &)> *fn = nullptr;
};

class Simulator {
public:
  explicit Simulator(const Network &net, EngineOptions opts = {});

  const Network &network() const { return net_; }
  const EngineOptions &options() const { return opts_; }

  State initial_state() const;

  /// Sojourn delay of one non-committed component; +inf when it has no
  /// enabled action. Draws from `rng` only when the component can act.
  double sample_delay(const State &s, int component, RngStream &rng) const;

  /// Advances time and every clock by the integral of its rate over `dt`.
  void integrate_rates(State &s, double dt) const;

  /// One step of the network semantics. Idle means time advanced but the
  /// winner had no edge it could take at the sampled instant.
  StepStatus step(State &s, RngStream &rng, double bound, StepInfo &info,
                  Sampler *sampler = nullptr) const;

  EndReason run(double bound, RngStream &rng, const RunHooks &hooks = {}) const;

  /// Runs and records every event with `watch` evaluated on the post-state.
  Trace run_trace(double bound, RngStream &rng, const std::vector<CompiledExpr> &watch = {}) const;

  /// Fires a specific edge (with its synchronization partners) now.
  void fire(State &s, int component, int edge, RngStream &rng, StepInfo &info) const;

  bool invariant_holds(const State &s, int component) const;
  bool edge_enabled(const State &s, int component, int edge) const;

private:
  struct Window;
  /// Clock valuation one time unit later under the rates frozen at `s`.
  std::vector<double> one_unit_later(const State &s) const;
  Window delay_window(const State &s, int component, const std::vector<double> &clocks1) const;
  double sample_window(const Window &w, RngStream &rng) const;
  void advance(State &s, double dt, Sampler *sampler) const;
  const CompiledExpr *rate_expr(const State &s, int clock) const;
  int choose(const std::vector<double> &weights, RngStream &rng) const;

  const Network &net_;
  EngineOptions opts_;
  // Per clock: every (component, location, rate index) that sets its rate.
  std::vector<std::vector<std::array<int, 3>>> rate_sources_;
};

/// `{"t": ..., "comp": "...", "edge": "...", "watch": {...}}` per line.
void write_jsonl(std::ostream &os, const Network &net, const Trace &trace,
                 const std::vector<std::string> &watch_names);

} // namespace stasmc
