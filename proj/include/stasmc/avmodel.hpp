#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stasmc/dsl.hpp"
#include "stasmc/model.hpp"

namespace stasmc {

/// Autonomous-vehicle case study parameters. Times are in time units
/// (1 tu = 20 ms), speeds in m/s.
struct AvConfig {
  bool refined = true; // finish a turn before honouring a stop sign

  // straight, max 100, max 120, min 70, min 80, right, left, stop
  std::array<double, 8> sign_weights{30, 10, 10, 10, 10, 10, 10, 10};
  std::array<int, 2> max_limits{100, 120};
  std::array<int, 2> min_limits{70, 80};
  double accel = 8.0;
  double initial_speed = 30.0;
  double high_speed = 70.0; // turns at or above this slow one side down

  double camera_period = 35.0;
  double camera_jitter = 5.0;
  double camera_exec_lo = 1.0;
  double camera_exec_hi = 5.0;
  double recog_exec_lo = 10.0;
  double recog_exec_hi = 20.0;
  double turn_min = 39.0;    // hold phase of a turn
  double turn_spread = 20.0;

  // Power per unit speed (W per m/s) in each driving mode.
  double braking_rate = 58.0;
  double updown_rate = 10.0;
  double turning_rate = 1.5;
  double constspeed_rate = 1.0;
  double camera_power = 25.0;      // W while capturing
  double recognition_power = 10.0; // W while recognising
  double tu_seconds = 0.02;

  // Constraint parameters used by the requirement suite.
  double sync_tolerance = 2.0;
  double e2e_lower = 10.0;
  double e2e_upper = 30.0;
  double brake_upper = 60.0;
  double bound = 3000.0;

  /// Throws std::invalid_argument naming the first broken invariant.
  void validate() const;
};

/// Reads `key = value` lines (`#` comments) over the defaults.
AvConfig parse_av_config(std::string_view text);
AvConfig load_av_config(const std::string &path);

/// DSL text of the case-study network (11 components).
std::string av_model_text(const AvConfig &cfg = {});
Model build_av_model(const AvConfig &cfg = {});

/// Query file with the requirement suite, its constraints and the expected
/// verdicts.
std::string requirements_text(const AvConfig &cfg = {});
QueryFile requirement_suite(const AvConfig &cfg = {});
std::vector<NamedQuery> requirement_queries(const AvConfig &cfg = {});

/// The stop-while-turning requirement alone, expected valid.
std::string r16_text(const AvConfig &cfg = {});

/// A lone sign source firing one weighted edge per step. Edge i sets
/// signType to the i-th entry of `sign_edge_types`.
std::string sign_source_text(const AvConfig &cfg = {});
inline constexpr std::array<int, 8> sign_edge_types{0, 1, 1, 2, 2, 3, 4, 5};

} // namespace stasmc
