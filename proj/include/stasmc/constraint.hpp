#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stasmc/expr.hpp"

namespace stasmc {

enum class ConstraintKind : std::uint8_t { Execution, Synchronization, Periodic, EndToEnd };

const char *to_string(ConstraintKind k);

/// An abstract event is either the emission of a channel (usable by both the
/// observer automaton and the trace oracle) or the rising edge of a state
/// predicate (oracle only).
struct EventBinding {
  std::string channel;
  std::optional<Expr> predicate;

  bool is_channel() const { return !predicate.has_value(); }
};

/// Policy for judging a record sequence shorter than the window k.
enum class ShortWindowPolicy : std::uint8_t { Proportional, VacuouslyTrue };

/// Weakly-hard timing constraint WH(c, m, k). All times are in model time units.
struct WhConstraint {
  std::string name;
  ConstraintKind kind = ConstraintKind::Execution;
  double lower = 0.0;
  double upper = 0.0;
  double tolerance = 0.0; // Synchronization
  double jitter = 0.0;    // Periodic
  int m = 1;
  int k = 1;
  ShortWindowPolicy short_window = ShortWindowPolicy::Proportional;

  // Execution: start, stop, preempt, resume. Periodic: occurrence.
  // EndToEnd: source, target.
  std::map<std::string, EventBinding> events;
  // Synchronization: e1..en in order.
  std::vector<EventBinding> streams;

  const EventBinding *event(const std::string &role) const;
};

/// Structural checks (bounds ordering, m <= k, required bindings). Returns
/// an empty string when valid, else a description of the first problem.
std::string check_constraint(const WhConstraint &c);

} // namespace stasmc
