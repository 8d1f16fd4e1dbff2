#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stasmc/constraint.hpp"
#include "stasmc/engine.hpp"
#include "stasmc/model.hpp"
#include "stasmc/query.hpp"
#include "stasmc/smc.hpp"

namespace stasmc {

/// The event sequence violates a pattern the oracle requires (stop without
/// start, resume without preempt, target before its source).
class MalformedTrace : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One occurrence of an abstract event. `role` is start/stop/preempt/resume,
/// occurrence, source/target, or e1..en.
struct Occurrence {
  double time = 0.0;
  std::string role;
};

/// Time-ordered occurrences of the events a constraint binds.
using EventLog = std::vector<Occurrence>;

struct OccurrenceRecord {
  int index = 0;
  double quantity = 0.0;
  bool pass = false;
  bool complete = true; // false for a trailing partial synchronization group
};

struct WhJudgement {
  bool holds = true;
  std::optional<int> first_violation;
};

struct MonitorVerdict {
  std::string constraint;
  std::vector<OccurrenceRecord> records;
  bool wh_holds = true;
  std::optional<int> first_violation;

  bool any_failure() const;
};

/// lower <= q <= upper with the engine's comparison tolerance.
bool within(double q, double lower, double upper);

std::vector<OccurrenceRecord> measure_execution(const EventLog &log, double lower, double upper);
std::vector<OccurrenceRecord> measure_synchronization(const EventLog &log, int streams, double tolerance);
std::vector<OccurrenceRecord> measure_periodic(const EventLog &log, double lower, double upper, double jitter);
std::vector<OccurrenceRecord> measure_end_to_end(const EventLog &log, double lower, double upper);

/// m of every k consecutive passes. Windows shorter than k follow `policy`.
WhJudgement wh_judge(const std::vector<bool> &passes, int m, int k,
                     ShortWindowPolicy policy = ShortWindowPolicy::Proportional);

/// Measures `log` against `c` and applies the sliding-window judgement.
MonitorVerdict check_events(const EventLog &log, const WhConstraint &c);

/// Collects the events bound by a constraint during a run. Channel bindings
/// match emitted channels; predicate bindings fire on the rising edge.
class EventRecorder {
public:
  EventRecorder(const Network &net, const WhConstraint &c);

  void on_initial(const State &s);
  void on_event(const State &s, const StepInfo &info);
  const EventLog &log() const { return log_; }

private:
  struct Binding {
    std::string role;
    int channel = -1;
    std::optional<CompiledExpr> predicate;
    bool last = false;
  };
  std::vector<Binding> bindings_;
  EventLog log_;
};

/// Events of a recorded trace (channel bindings only).
EventLog extract_events(const Trace &trace, const Network &net, const WhConstraint &c);

MonitorVerdict check_trace(const Trace &trace, const Network &net, const WhConstraint &c);

/// Observer automaton for `c`: receive-only, with `success` and `fail`
/// locations. Throws std::invalid_argument for predicate bindings.
Template build_observer(const WhConstraint &c);

/// Returns `model` with one observer instance per constraint, named after the
/// constraint. Every bound channel must be a declared broadcast channel.
Model attach_observers(const Model &model, const std::vector<WhConstraint> &constraints);

/// `Pr[<=bound]([] !Name.fail) >= m/k`
NamedQuery observer_query(const WhConstraint &c, double bound);

/// Fraction of runs whose events satisfy the sliding-window judgement, with
/// the Clopper-Pearson interval over the Chernoff run count. Named
/// `<constraint>.wh`.
SmcResult wh_estimate(const Network &net, const WhConstraint &c, double bound, const StatConfig &cfg,
                      const EngineOptions &engine = {});

struct RunComparison {
  bool observer_failed = false; // the observer entered `fail`
  bool oracle_failed = false;   // a complete occurrence failed, or the trace is malformed
  long long events = 0;         // occurrences the oracle saw
};

/// Runs `sim` (whose network has the observer of `c` attached under the
/// constraint's name) and judges the same run with both the observer and the
/// trace oracle.
RunComparison compare_observer_run(const Simulator &sim, const WhConstraint &c, double bound, RngStream &rng);

} // namespace stasmc
