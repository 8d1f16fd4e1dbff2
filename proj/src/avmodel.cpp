#include "stasmc/avmodel.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace stasmc {

namespace {

std::string num(double v) {
  std::ostringstream os;
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    os << static_cast<long long>(v);
  } else {
    os << format_real(v);
  }
  return os.str();
}

/// Replaces every `${key}` in `text`.
std::string fill(std::string text, const std::map<std::string, std::string> &vars) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find("${", pos);
    if (open == std::string::npos) break;
    const std::size_t close = text.find('}', open);
    const std::string key = text.substr(open + 2, close - open - 2);
    const auto it = vars.find(key);
    if (it == vars.end()) throw std::logic_error("template key " + key);
    out += text.substr(pos, open - pos) + it->second;
    pos = close + 1;
  }
  return out + text.substr(pos);
}

std::map<std::string, std::string> placeholders(const AvConfig &c) {
  std::map<std::string, std::string> v;
  const char *weights[] = {"w_straight", "w_max_lo", "w_max_hi", "w_min_lo",
                           "w_min_hi",   "w_right",  "w_left",   "w_stop"};
  for (std::size_t i = 0; i < 8; ++i) v[weights[i]] = num(c.sign_weights[i]);
  v["max_lo"] = num(c.max_limits[0]);
  v["max_hi"] = num(c.max_limits[1]);
  v["min_lo"] = num(c.min_limits[0]);
  v["min_hi"] = num(c.min_limits[1]);
  v["accel"] = num(c.accel);
  v["v0"] = num(c.initial_speed);
  v["high"] = num(c.high_speed);
  v["first_capture"] = num(c.camera_period);
  v["gap_lo"] = num(c.camera_period - c.camera_jitter);
  v["gap_span"] = num(2 * c.camera_jitter);
  v["cam_lo"] = num(c.camera_exec_lo);
  v["cam_span"] = num(c.camera_exec_hi - c.camera_exec_lo);
  v["reg_lo"] = num(c.recog_exec_lo);
  v["reg_span"] = num(c.recog_exec_hi - c.recog_exec_lo);
  v["turn_min"] = num(c.turn_min);
  v["turn_span"] = num(c.turn_spread);
  v["braking"] = num(c.braking_rate);
  v["updown"] = num(c.updown_rate);
  v["turning"] = num(c.turning_rate);
  v["const"] = num(c.constspeed_rate);
  v["tu"] = num(c.tu_seconds);
  v["cam_power"] = num(c.camera_power);
  v["reg_power"] = num(c.recognition_power);
  v["bound"] = num(c.bound);
  v["period"] = num(c.camera_period);
  v["jitter"] = num(c.camera_jitter);
  v["cam_hi"] = num(c.camera_exec_hi);
  v["reg_hi"] = num(c.recog_exec_hi);
  v["sync_tol"] = num(c.sync_tolerance);
  v["e2e_lo"] = num(c.e2e_lower);
  v["e2e_hi"] = num(c.e2e_upper);
  v["brake_hi"] = num(c.brake_upper);
  v["worst"] = num(c.camera_exec_hi + c.recog_exec_hi);
  return v;
}

constexpr const char *kGlobals = R"(// Autonomous vehicle: camera, sign recognition, controller, wheels, energy.
// 1 time unit (tu) = 20 ms. Speeds in m/s, energies in J.

// 0 straight, 1 max limit, 2 min limit, 3 turn right, 4 turn left, 5 stop
int signType = 0;
int speedh = ${max_hi}, speedl = ${min_lo};

// Straight mode in effect when the latest sign reached the controller.
int CONSTSPEED = 1, SPEEDUP = 0, SPEEDDOWN = 0;

// Left pair (FL, RL) and right pair (FR, RR) of wheels move together.
clock wvl = ${v0}, wvr = ${v0}, average_speed = ${v0};
int accL = 0, accR = 0;
real entry_speed = 0.0;

// 0 const speed, 1 up, 2 down, 3 turning, 4 braking, 5 stopped
int emode = 0;
real BrakingRate = ${braking}, UpDownRate = ${updown}, TurningRate = ${turning}, ConstSpeedRate = ${const};
real tu = ${tu};
clock Con_en, constSpeed_en, Up_en, Down_en, Turning_en, braking_en;

broadcast chan cam_start, cam_done, reg_start, sign_out;
broadcast chan speed_cmd, fl_upd, rl_upd, fr_upd, rr_upd;
broadcast chan go_straight, go_left, go_right, go_stop, turn_done;
broadcast chan brake_start, brake_done;
chan gen;
)";

constexpr const char *kSignSource = R"(
template SignSource() {
  init loc ready
  ready -> ready { sync gen?; weight ${w_straight}; update signType := 0; }
  ready -> ready { sync gen?; weight ${w_max_lo}; update signType := 1, speedh := ${max_lo}; }
  ready -> ready { sync gen?; weight ${w_max_hi}; update signType := 1, speedh := ${max_hi}; }
  ready -> ready { sync gen?; weight ${w_min_lo}; update signType := 2, speedl := ${min_lo}; }
  ready -> ready { sync gen?; weight ${w_min_hi}; update signType := 2, speedl := ${min_hi}; }
  ready -> ready { sync gen?; weight ${w_right}; update signType := 3; }
  ready -> ready { sync gen?; weight ${w_left}; update signType := 4; }
  ready -> ready { sync gen?; weight ${w_stop}; update signType := 5; }
}
)";

constexpr const char *kCamera = R"(
// Captures every T - j + U[0, 2j] tu.
template Camera() {
  clock c;
  clock CamExec_en;
  real next = ${first_capture}, exec = 0.0;
  init loc idle { inv c <= next; rate CamExec_en = 0; }
  loc capture { inv c <= exec; rate CamExec_en = ${cam_power} * tu; }
  idle -> capture { guard c >= next; sync cam_start!; update c := 0, CamExec_en := 0, exec := ${cam_lo} + random(${cam_span}), next := ${gap_lo} + random(${gap_span}); }
  capture -> idle { guard c >= exec; sync cam_done!; }
}
)";

constexpr const char *kSignRec = R"(
template SignRec() {
  clock r;
  clock RegExec_en;
  real exec = 0.0;
  init loc wait { rate RegExec_en = 0; }
  committed loc read
  loc recognise { inv r <= exec; rate RegExec_en = ${reg_power} * tu; }
  committed loc write
  committed loc publish
  wait -> read { sync cam_done?; }
  read -> recognise { sync reg_start!; update r := 0, RegExec_en := 0, exec := ${reg_lo} + random(${reg_span}); }
  recognise -> write { guard r >= exec; }
  write -> publish { sync gen!; }
  publish -> wait { sync sign_out!; }
}
)";

constexpr const char *kCtrlHead = R"(
// Every sign is acknowledged with speed_cmd, whatever the mode.
template Ctrl() {
  clock t, left_clk, right_clk;
  int stop_pending = 0, stop_in_left = 0, stop_in_right = 0;
  init loc straight
  committed loc ctrl
  committed loc dispatch
  loc turn_left
  loc turn_right
  loc stop
  committed loc busy_left
  committed loc busy_right
  committed loc busy_stop
  committed loc finish
  straight -> ctrl { sync sign_out?; }
  ctrl -> dispatch { sync speed_cmd!; }
  dispatch -> straight { guard signType <= 2; sync go_straight!; update t := 0; }
  dispatch -> turn_right { guard signType == 3; sync go_right!; update t := 0, right_clk := 0; }
  dispatch -> turn_left { guard signType == 4; sync go_left!; update t := 0, left_clk := 0; }
  dispatch -> stop { guard signType == 5; sync go_stop!; update t := 0; }
  turn_left -> busy_left { sync sign_out?; }
  busy_left -> turn_left { guard signType != 5; sync speed_cmd!; }
  turn_right -> busy_right { sync sign_out?; }
  busy_right -> turn_right { guard signType != 5; sync speed_cmd!; }
)";

constexpr const char *kCtrlRefined = R"(  busy_left -> turn_left { guard signType == 5; sync speed_cmd!; update stop_pending := 1, stop_in_left := 1; }
  busy_right -> turn_right { guard signType == 5; sync speed_cmd!; update stop_pending := 1, stop_in_right := 1; }
)";

constexpr const char *kCtrlUnrefined = R"(  busy_left -> dispatch { guard signType == 5; sync speed_cmd!; update stop_in_left := 1; }
  busy_right -> dispatch { guard signType == 5; sync speed_cmd!; update stop_in_right := 1; }
)";

constexpr const char *kCtrlTail = R"(  turn_left -> finish { sync turn_done?; }
  turn_right -> finish { sync turn_done?; }
  finish -> straight { guard stop_pending == 0; sync go_straight!; }
  finish -> stop { guard stop_pending == 1; sync go_stop!; update stop_pending := 0; }
  stop -> busy_stop { sync sign_out?; }
  busy_stop -> stop { sync speed_cmd!; }
}
)";

constexpr const char *kStraight = R"(
template Straight() {
  clock t;
  real target = 0.0;
  init loc constSpeed
  loc speed_up { inv wvl <= target; }
  loc speed_down { inv wvl >= target; }
  loc ini
  committed loc judge
  constSpeed -> judge { sync go_straight?; update CONSTSPEED := 1, SPEEDUP := 0, SPEEDDOWN := 0; }
  speed_up -> judge { sync go_straight?; update CONSTSPEED := 0, SPEEDUP := 1, SPEEDDOWN := 0; }
  speed_down -> judge { sync go_straight?; update CONSTSPEED := 0, SPEEDUP := 0, SPEEDDOWN := 1; }
  ini -> judge { sync go_straight?; update CONSTSPEED := 0, SPEEDUP := 0, SPEEDDOWN := 0; }
  judge -> speed_up { guard signType == 2 && wvl < speedl; update target := speedl + 10, accL := ${accel}, accR := ${accel}, t := 0, emode := 1, Up_en := 0; }
  judge -> speed_down { guard signType == 1 && wvl > speedh; update target := speedh - 10, accL := -${accel}, accR := -${accel}, t := 0, emode := 2, Down_en := 0; }
  judge -> speed_up { guard !(signType == 2 && wvl < speedl) && !(signType == 1 && wvl > speedh) && SPEEDUP == 1; update t := 0; }
  judge -> speed_down { guard !(signType == 2 && wvl < speedl) && !(signType == 1 && wvl > speedh) && SPEEDDOWN == 1; update t := 0; }
  judge -> constSpeed { guard !(signType == 2 && wvl < speedl) && !(signType == 1 && wvl > speedh) && SPEEDUP == 0 && SPEEDDOWN == 0; update accL := 0, accR := 0, t := 0, emode := 0; }
  speed_up -> constSpeed { guard wvl >= target; update accL := 0, accR := 0, emode := 0; }
  speed_down -> constSpeed { guard wvl <= target; update accL := 0, accR := 0, emode := 0; }
  constSpeed -> ini { sync go_left?; update CONSTSPEED := 1, SPEEDUP := 0, SPEEDDOWN := 0; }
  constSpeed -> ini { sync go_right?; update CONSTSPEED := 1, SPEEDUP := 0, SPEEDDOWN := 0; }
  constSpeed -> ini { sync go_stop?; update CONSTSPEED := 1, SPEEDUP := 0, SPEEDDOWN := 0; }
  speed_up -> ini { sync go_left?; update CONSTSPEED := 0, SPEEDUP := 1, SPEEDDOWN := 0, accL := 0, accR := 0; }
  speed_up -> ini { sync go_right?; update CONSTSPEED := 0, SPEEDUP := 1, SPEEDDOWN := 0, accL := 0, accR := 0; }
  speed_up -> ini { sync go_stop?; update CONSTSPEED := 0, SPEEDUP := 1, SPEEDDOWN := 0, accL := 0, accR := 0; }
  speed_down -> ini { sync go_left?; update CONSTSPEED := 0, SPEEDUP := 0, SPEEDDOWN := 1, accL := 0, accR := 0; }
  speed_down -> ini { sync go_right?; update CONSTSPEED := 0, SPEEDUP := 0, SPEEDDOWN := 1, accL := 0, accR := 0; }
  speed_down -> ini { sync go_stop?; update CONSTSPEED := 0, SPEEDUP := 0, SPEEDDOWN := 1, accL := 0, accR := 0; }
}
)";

// Turn_left with (slow, fast) = (l, r); Turn_right swaps the sides.
constexpr const char *kTurn = R"(
// At high speed the ${near} wheels slow down for 1 tu, the car holds the
// difference, then the ${far} wheels slow down to match. At low speed the ${far}
// wheels speed up instead and the ${near} wheels catch up.
template ${name}() {
  clock tt;
  real phase = 1.0, hold = 0.0;
  init loc ini
  loc decelerate${n} { inv tt <= phase; }
  loc decelerate${f} { inv tt <= 1; }
  loc accelerate${f} { inv tt <= phase; }
  loc accelerate${n} { inv tt <= 1; }
  ini -> decelerate${n} { guard average_speed >= ${high}; sync ${go}?; update tt := 0, phase := 1, hold := ${turn_min} + random(${turn_span}), entry_speed := average_speed, acc${N} := -${accel}, acc${F} := 0, emode := 3, Turning_en := 0; }
  ini -> accelerate${f} { guard average_speed < ${high}; sync ${go}?; update tt := 0, phase := 1, hold := ${turn_min} + random(${turn_span}), entry_speed := average_speed, acc${F} := ${accel}, acc${N} := 0, emode := 3, Turning_en := 0; }
  decelerate${n} -> decelerate${n} { guard tt >= phase && acc${N} != 0; update acc${N} := 0, phase := hold; }
  decelerate${n} -> decelerate${f} { guard tt >= phase && acc${N} == 0; update tt := 0, acc${F} := -${accel}; }
  decelerate${f} -> ini { guard tt >= 1; sync turn_done!; update acc${F} := 0, wv${f} := wv${n}, average_speed := wv${n}; }
  accelerate${f} -> accelerate${f} { guard tt >= phase && acc${F} != 0; update acc${F} := 0, phase := hold; }
  accelerate${f} -> accelerate${n} { guard tt >= phase && acc${F} == 0; update tt := 0, acc${N} := ${accel}; }
  accelerate${n} -> ini { guard tt >= 1; sync turn_done!; update acc${N} := 0, wv${n} := wv${f}, average_speed := wv${f}; }
  decelerate${n} -> ini { sync go_stop?; }
  decelerate${f} -> ini { sync go_stop?; }
  accelerate${f} -> ini { sync go_stop?; }
  accelerate${n} -> ini { sync go_stop?; }
}
)";

constexpr const char *kStop = R"(
// Both pairs brake together; standstill is detected on the left pair.
template Stop() {
  init loc ini
  committed loc arm
  loc braking { inv wvl >= 0; }
  committed loc halt
  loc totally_stop
  ini -> arm { sync go_stop?; update accL := -${accel}, accR := -${accel}, emode := 4, braking_en := 0; }
  arm -> braking { sync brake_start!; }
  braking -> halt { guard wvl <= 0; update accL := 0, accR := 0, wvl := 0, average_speed := wvr / 2, emode := 5; }
  halt -> totally_stop { sync brake_done!; }
}
)";

constexpr const char *kSpeed = R"(
// Reports the ${side} wheel speeds on every speed command; clamps at 0.
template ${name}() {
  init loc run { inv acc${S} >= 0 || wv${s} >= 0; rate wv${s} = acc${S}; }
  committed loc front
  committed loc rear
  run -> run { guard acc${S} < 0 && wv${s} <= 0; update acc${S} := 0, wv${s} := 0, average_speed := wv${o} / 2; }
  run -> front { sync speed_cmd?; }
  front -> rear { sync f${s}_upd!; }
  rear -> run { sync r${s}_upd!; }
}
)";

constexpr const char *kEnergy = R"(
// Power is proportional to the average wheel speed with a per-mode factor.
template Energy() {
  init loc run {
    rate average_speed = (accL + accR) / 2;
    rate Con_en = (emode == 0 ? ConstSpeedRate : emode == 1 || emode == 2 ? UpDownRate : emode == 3 ? TurningRate : emode == 4 ? BrakingRate : 0) * tu * average_speed;
    rate constSpeed_en = emode == 0 ? ConstSpeedRate * tu * average_speed : 0;
    rate Up_en = emode == 1 ? UpDownRate * tu * average_speed : 0;
    rate Down_en = emode == 2 ? UpDownRate * tu * average_speed : 0;
    rate Turning_en = emode == 3 ? TurningRate * tu * average_speed : 0;
    rate braking_en = emode == 4 ? BrakingRate * tu * average_speed : 0;
  }
}
)";

constexpr const char *kSystem = R"(
system SignSource, Camera, SignRec, Ctrl, Straight, Turn_left, Turn_right, Stop, SpeedLeft, SpeedRight, Energy;
)";

std::string turn_text(bool left, const std::map<std::string, std::string> &base) {
  auto v = base;
  v["name"] = left ? "Turn_left" : "Turn_right";
  v["go"] = left ? "go_left" : "go_right";
  v["near"] = left ? "left" : "right";
  v["far"] = left ? "right" : "left";
  v["n"] = left ? "l" : "r";
  v["f"] = left ? "r" : "l";
  v["N"] = left ? "L" : "R";
  v["F"] = left ? "R" : "L";
  return fill(kTurn, v);
}

std::string speed_text(bool left) {
  return fill(kSpeed, {{"name", left ? "SpeedLeft" : "SpeedRight"},
                       {"side", left ? "left" : "right"},
                       {"s", left ? "l" : "r"},
                       {"S", left ? "L" : "R"},
                       {"o", left ? "r" : "l"}});
}

constexpr const char *kRequirements = R"(// Requirement suite for the autonomous-vehicle model.
// Bounds are in tu (20 ms). Wheel speeds: FLS = RLS = wvl, FRS = RRS = wvr.

constraint SignRegExec execution(lower=${reg_lo}, upper=${reg_hi}, m=19, k=20) on start=reg_start, stop=sign_out;
constraint CameraExec execution(lower=0, upper=${cam_hi}, m=19, k=20) on start=cam_start, stop=cam_done;
constraint Synchronization synchronization(tolerance=${sync_tol}, m=19, k=20) on e1=sign_out, e2=fl_upd, e3=fr_upd, e4=rl_upd, e5=rr_upd;
constraint Periodic periodic(lower=${period}, upper=${period}, jitter=${jitter}, m=19, k=20) on occurrence=cam_start;
constraint CamToReg end_to_end(lower=${e2e_lo}, upper=${e2e_hi}, m=19, k=20) on source=cam_start, target=sign_out;
constraint BrakeExec execution(lower=0, upper=${brake_hi}, m=19, k=20) on start=brake_start, stop=brake_done;

// Mode decisions
R1: Pr[<=${bound}]([] (CONSTSPEED == 1 && signType == 4 && !Ctrl.ctrl && Ctrl.t == 0) imply Ctrl.turn_left) >= 0.95
R2: Pr[<=${bound}]([] (SPEEDUP == 1 && signType == 4 && !Ctrl.ctrl && Ctrl.t == 0) imply Ctrl.turn_left) >= 0.95
R3: Pr[<=${bound}]([] (SPEEDDOWN == 1 && signType == 4 && !Ctrl.ctrl && Ctrl.t == 0) imply Ctrl.turn_left) >= 0.95
R4: Pr[<=${bound}]([] (CONSTSPEED == 1 && signType == 3 && !Ctrl.ctrl && Ctrl.t == 0) imply Ctrl.turn_right) >= 0.95
R5: Pr[<=${bound}]([] (SPEEDUP == 1 && signType == 3 && !Ctrl.ctrl && Ctrl.t == 0) imply Ctrl.turn_right) >= 0.95
R6: Pr[<=${bound}]([] (SPEEDDOWN == 1 && signType == 3 && !Ctrl.ctrl && Ctrl.t == 0) imply Ctrl.turn_right) >= 0.95
R7: Pr[<=${bound}]([] (signType == 5 && CONSTSPEED == 1 && !Ctrl.ctrl && Ctrl.t == 0) imply Ctrl.stop) >= 0.95
R8: Pr[<=${bound}]([] (signType == 5 && SPEEDUP == 1 && !Ctrl.ctrl && Ctrl.t == 0) imply Ctrl.stop) >= 0.95
R9: Pr[<=${bound}]([] (signType == 5 && SPEEDDOWN == 1 && !Ctrl.ctrl && Ctrl.t == 0) imply Ctrl.stop) >= 0.95

// Speed limits (model-sensitive)
R10: Pr[<=${bound}]([] (CONSTSPEED == 1 && signType == 2 && wvl < speedl && Straight.t == 0 && !Straight.judge) imply Straight.speed_up) >= 0.95
R11: Pr[<=${bound}]([] (CONSTSPEED == 1 && signType == 1 && wvl > speedh && Straight.t == 0 && !Straight.judge) imply Straight.speed_down) >= 0.95
R12: Pr[<=${bound}]([] (SPEEDUP == 1 && signType == 1 && wvl > speedh && Straight.t == 0 && !Straight.judge) imply Straight.speed_down) >= 0.95
R14: Pr[<=${bound}]([] (SPEEDDOWN == 1 && signType == 2 && wvl < speedl && Straight.t == 0 && !Straight.judge) imply Straight.speed_up) >= 0.95

// Stop while turning
R16: Pr[<=${bound}]([] (Stop.totally_stop && Ctrl.stop_in_left == 1) imply (wvl == 0 && wvr == 0)) >= 0.95
R17: Pr[<=${bound}]([] (Stop.totally_stop && Ctrl.stop_in_right == 1) imply (wvl == 0 && wvr == 0)) >= 0.95

// Turning (model-sensitive)
R20: Pr[<=${bound}]([] (Ctrl.turn_left && entry_speed >= ${high}) imply (Turn_left.deceleratel || Turn_left.decelerater)) >= 0.95
R21: Pr[<=${bound}]([] (Ctrl.turn_left && entry_speed < ${high}) imply (Turn_left.accelerater || Turn_left.acceleratel)) >= 0.95
R22: Pr[<=${bound}]([] (Ctrl.turn_right && entry_speed >= ${high}) imply (Turn_right.deceleratel || Turn_right.decelerater)) >= 0.95
R23: Pr[<=${bound}]([] (Ctrl.turn_right && entry_speed < ${high}) imply (Turn_right.accelerater || Turn_right.acceleratel)) >= 0.95

// Braking
R24: Pr[<=${bound}]([] Stop.braking imply wvl == wvr) >= 0.95
R25: Pr[<=${bound}]([] Stop.totally_stop imply (wvl == 0 && wvr == 0)) >= 0.95

// Safe limit speed
R26: Pr[<=${bound}]([] speedh == ${max_lo} imply wvl <= ${max_lo_m10}) >= Pr[<=${bound}]([] speedh == ${max_lo} imply (wvl > ${max_lo_m10} && wvl <= ${max_lo}))
R27: Pr[<=${bound}]([] speedh == ${max_hi} imply wvl <= ${max_hi_m10}) >= Pr[<=${bound}]([] speedh == ${max_hi} imply (wvl > ${max_hi_m10} && wvl <= ${max_hi}))
R28: Pr[<=${bound}]([] speedl == ${min_lo} imply wvl >= ${min_lo_p10}) >= Pr[<=${bound}]([] speedl == ${min_lo} imply (wvl > ${min_lo} && wvl <= ${min_lo_p10}))
R29: Pr[<=${bound}]([] speedl == ${min_hi} imply wvl >= ${min_hi_p10}) >= Pr[<=${bound}]([] speedl == ${min_hi} imply (wvl > ${min_hi} && wvl <= ${min_hi_p10}))

// Wheel speeds while turning
R30: Pr[<=${bound}]([] Ctrl.turn_left imply wvl <= wvr) >= 0.95
R31: Pr[<=${bound}]([] Ctrl.turn_right imply wvl >= wvr) >= 0.95

// Durations (model-sensitive)
R32: Pr[<=${bound}]([] Straight.speed_up imply Straight.t <= 120) >= 0.95
R33: Pr[<=${bound}]([] Straight.speed_down imply Straight.t <= 120) >= 0.95
R34: Pr[<=${bound}]([] !BrakeExec.fail) >= 0.95
R35: Pr[<=${bound}]([] (Ctrl.turn_left && !Turn_left.ini) imply Ctrl.left_clk <= 75) >= 0.95
R36: Pr[<=${bound}]([] (Ctrl.turn_right && !Turn_right.ini) imply Ctrl.right_clk <= 75) >= 0.95

// Energy
R37: Pr[<=${bound}]([] Camera.CamExec_en <= 3) >= 0.95
R38: Pr[<=${bound}]([] SignRec.RegExec_en <= 5) >= 0.95
R39: simulate 1 [<=${bound}] {signType, average_speed, constSpeed_en}
R40: Pr[<=${bound}]([] Turning_en <= 270) >= 0.95
R41: Pr[<=${bound}]([] Turning_en <= 270) >= 0.95
R42: E[<=${bound}; 100](max: braking_en)
R43: Pr[<=${bound}]([] Up_en <= 400) >= 0.95
R44: Pr[<=${bound}]([] Down_en <= 400) >= 0.95
R45: simulate 1 [<=${bound}] {average_speed, Con_en}

// Timing constraints
R46: Pr[<=${bound}]([] !SignRegExec.fail) >= 0.95
R47: Pr[<=${bound}]([] !CameraExec.fail) >= 0.95
R48: Pr[<=${bound}]([] !Synchronization.fail) >= 0.95
R49: Pr[<=${bound}]([] !Periodic.fail) >= 0.95
R50: Pr[<=${bound}]([] !CamToReg.fail) >= 0.95
R51: Pr[<=${bound}]([] CamToReg.dclk <= ${worst})

expect R1 valid;
expect R2 valid;
expect R3 valid;
expect R4 valid;
expect R5 valid;
expect R6 valid;
expect R7 valid;
expect R8 valid;
expect R9 valid;
expect R10 valid;
expect R11 valid;
expect R12 valid;
expect R14 valid;
expect R16 valid;
expect R17 valid;
expect R20 valid;
expect R21 valid;
expect R22 valid;
expect R23 valid;
expect R24 valid;
expect R25 valid;
expect R26 valid;
expect R27 valid;
expect R29 valid;
expect R30 valid;
expect R31 valid;
expect R33 valid;
expect R34 valid;
expect R35 valid;
expect R36 valid;
expect R37 valid;
expect R38 valid;
expect R40 valid;
expect R41 valid;
expect R42 in [300, 600];
expect R43 valid;
expect R44 valid;
expect R46 valid;
expect R47 valid;
expect R48 valid;
expect R49 valid;
expect R50 valid;
expect R51 in [0.9, 1];
)";

constexpr const char *kR16 = R"(// Stop sign while turning left: the wheels must not stop unevenly.
R16: Pr[<=${bound}](<> Stop.totally_stop && wvl == 0 && wvr > 0) <= 0.01
expect R16 valid;
)";

constexpr const char *kSignSourceOnly = R"(// Sign source firing on its own, one sign per step.
int signType = 0;
int speedh = ${max_hi}, speedl = ${min_lo};

template SignSource() {
  init loc ready
  ready -> ready { weight ${w_straight}; update signType := 0; }
  ready -> ready { weight ${w_max_lo}; update signType := 1, speedh := ${max_lo}; }
  ready -> ready { weight ${w_max_hi}; update signType := 1, speedh := ${max_hi}; }
  ready -> ready { weight ${w_min_lo}; update signType := 2, speedl := ${min_lo}; }
  ready -> ready { weight ${w_min_hi}; update signType := 2, speedl := ${min_hi}; }
  ready -> ready { weight ${w_right}; update signType := 3; }
  ready -> ready { weight ${w_left}; update signType := 4; }
  ready -> ready { weight ${w_stop}; update signType := 5; }
}

system SignSource;
)";

} // namespace

void AvConfig::validate() const {
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw std::invalid_argument("AvConfig: " + what);
  };
  for (double w : sign_weights) require(w > 0, "sign weights must be positive");
  require(constspeed_rate > 0, "all energy rates must be positive");
  require(braking_rate > updown_rate && updown_rate > turning_rate && turning_rate > constspeed_rate,
          "BrakingRate > UpDownRate > TurningRate > ConstSpeedRate must hold");
  require(camera_power > 0 && recognition_power > 0 && tu_seconds > 0, "all energy rates must be positive");
  require(camera_jitter >= 0 && camera_jitter < camera_period, "jitter must be below the period");
  require(camera_exec_lo >= 0 && camera_exec_lo <= camera_exec_hi, "camera execution range is empty");
  require(recog_exec_lo >= 0 && recog_exec_lo <= recog_exec_hi, "recognition execution range is empty");
  require(camera_exec_hi + recog_exec_hi < camera_period - camera_jitter,
          "a capture must be recognised before the next one starts");
  require(accel > 0 && initial_speed >= 0 && high_speed > 0, "speeds and acceleration must be positive");
  require(max_limits[0] < max_limits[1] && min_limits[0] < min_limits[1], "limits must be increasing");
  require(turn_min >= 1 && turn_spread >= 0, "turn hold must be at least 1 tu");
  require(sync_tolerance >= 0 && e2e_lower <= e2e_upper && brake_upper > 0, "constraint bounds are empty");
  require(bound > 0, "bound must be positive");
}

AvConfig parse_av_config(std::string_view text) {
  AvConfig c;
  std::map<std::string, std::function<void(double)>> keys = {
      {"refined", [&](double v) { c.refined = v != 0; }},
      {"accel", [&](double v) { c.accel = v; }},
      {"initial_speed", [&](double v) { c.initial_speed = v; }},
      {"high_speed", [&](double v) { c.high_speed = v; }},
      {"camera_period", [&](double v) { c.camera_period = v; }},
      {"camera_jitter", [&](double v) { c.camera_jitter = v; }},
      {"camera_exec_lo", [&](double v) { c.camera_exec_lo = v; }},
      {"camera_exec_hi", [&](double v) { c.camera_exec_hi = v; }},
      {"recog_exec_lo", [&](double v) { c.recog_exec_lo = v; }},
      {"recog_exec_hi", [&](double v) { c.recog_exec_hi = v; }},
      {"turn_min", [&](double v) { c.turn_min = v; }},
      {"turn_spread", [&](double v) { c.turn_spread = v; }},
      {"braking_rate", [&](double v) { c.braking_rate = v; }},
      {"updown_rate", [&](double v) { c.updown_rate = v; }},
      {"turning_rate", [&](double v) { c.turning_rate = v; }},
      {"constspeed_rate", [&](double v) { c.constspeed_rate = v; }},
      {"camera_power", [&](double v) { c.camera_power = v; }},
      {"recognition_power", [&](double v) { c.recognition_power = v; }},
      {"tu_seconds", [&](double v) { c.tu_seconds = v; }},
      {"sync_tolerance", [&](double v) { c.sync_tolerance = v; }},
      {"e2e_lower", [&](double v) { c.e2e_lower = v; }},
      {"e2e_upper", [&](double v) { c.e2e_upper = v; }},
      {"brake_upper", [&](double v) { c.brake_upper = v; }},
      {"bound", [&](double v) { c.bound = v; }},
      {"max_limit_lo", [&](double v) { c.max_limits[0] = static_cast<int>(v); }},
      {"max_limit_hi", [&](double v) { c.max_limits[1] = static_cast<int>(v); }},
      {"min_limit_lo", [&](double v) { c.min_limits[0] = static_cast<int>(v); }},
      {"min_limit_hi", [&](double v) { c.min_limits[1] = static_cast<int>(v); }},
  };
  const char *weights[] = {"weight_straight", "weight_max_lo", "weight_max_hi", "weight_min_lo",
                           "weight_min_hi",   "weight_right",  "weight_left",   "weight_stop"};
  for (std::size_t i = 0; i < 8; ++i) keys[weights[i]] = [&c, i](double v) { c.sign_weights[i] = v; };

  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r\"");
      const auto b = s.find_last_not_of(" \t\r\"");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    double v = 0.0;
    if (value == "true") {
      v = 1.0;
    } else if (value == "false") {
      v = 0.0;
    } else {
      std::size_t used = 0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used == 0 || used != value.size())
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad number '" + value + "'");
    }
    it->second(v);
  }
  c.validate();
  return c;
}

AvConfig load_av_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_av_config(ss.str());
}

std::string av_model_text(const AvConfig &cfg) {
  cfg.validate();
  const auto v = placeholders(cfg);
  std::string text = fill(kGlobals, v) + fill(kSignSource, v) + fill(kCamera, v) + fill(kSignRec, v);
  text += fill(kCtrlHead, v) + (cfg.refined ? kCtrlRefined : kCtrlUnrefined) + kCtrlTail;
  text += fill(kStraight, v) + turn_text(true, v) + turn_text(false, v) + fill(kStop, v);
  text += speed_text(true) + speed_text(false) + kEnergy + kSystem;
  return text;
}

Model build_av_model(const AvConfig &cfg) { return parse_model(av_model_text(cfg), "av.sta"); }

std::string requirements_text(const AvConfig &cfg) {
  auto v = placeholders(cfg);
  v["max_lo_m10"] = num(cfg.max_limits[0] - 10);
  v["max_hi_m10"] = num(cfg.max_limits[1] - 10);
  v["min_lo_p10"] = num(cfg.min_limits[0] + 10);
  v["min_hi_p10"] = num(cfg.min_limits[1] + 10);
  return fill(kRequirements, v);
}

QueryFile requirement_suite(const AvConfig &cfg) {
  return parse_query_file(requirements_text(cfg), "requirements.q");
}

std::vector<NamedQuery> requirement_queries(const AvConfig &cfg) { return requirement_suite(cfg).queries; }

std::string r16_text(const AvConfig &cfg) { return fill(kR16, placeholders(cfg)); }

std::string sign_source_text(const AvConfig &cfg) { return fill(kSignSourceOnly, placeholders(cfg)); }

} // namespace stasmc
