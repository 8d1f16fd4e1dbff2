#include "stasmc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include <nlohmann/json.hpp>

namespace stasmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------
// Sets of delays t >= 0, as sorted disjoint intervals.

struct Interval {
  double lo;
  double hi;
  bool lo_open = false;
};

using IntervalSet = std::vector<Interval>;

const IntervalSet kAll = {Interval{0.0, kInf}};

IntervalSet normalize(IntervalSet s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](const Interval &i) { return i.hi < i.lo; }), s.end());
  std::sort(s.begin(), s.end(), [](const Interval &a, const Interval &b) { return a.lo < b.lo; });
  IntervalSet out;
  for (const auto &i : s) {
    if (!out.empty() && i.lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, i.hi);
    } else {
      out.push_back(i);
    }
  }
  return out;
}

IntervalSet unite(const IntervalSet &a, const IntervalSet &b) {
  IntervalSet s = a;
  s.insert(s.end(), b.begin(), b.end());
  return normalize(std::move(s));
}

IntervalSet intersect(const IntervalSet &a, const IntervalSet &b) {
  IntervalSet out;
  for (const auto &x : a)
    for (const auto &y : b) {
      Interval i{std::max(x.lo, y.lo), std::min(x.hi, y.hi)};
      i.lo_open = (i.lo == x.lo && x.lo_open) || (i.lo == y.lo && y.lo_open);
      if (i.lo <= i.hi) out.push_back(i);
    }
  return normalize(std::move(out));
}

IntervalSet complement(const IntervalSet &a) {
  IntervalSet out;
  double from = 0.0;
  bool from_open = false;
  for (const auto &i : a) {
    if (i.lo > from) out.push_back(Interval{from, i.lo, from_open});
    from = i.hi;
    from_open = true;
  }
  if (from < kInf) out.push_back(Interval{from, kInf, from_open});
  return out;
}

/// Set of t >= 0 with g0 + slope * t in [lo, hi].
IntervalSet affine_band(double g0, double slope, double lo, double hi, bool open) {
  if (slope == 0.0) return (g0 >= lo && g0 <= hi) ? kAll : IntervalSet{};
  double a = (lo - g0) / slope, b = (hi - g0) / slope;
  if (a > b) std::swap(a, b);
  if (std::isnan(a)) a = 0.0;
  if (std::isnan(b)) b = kInf;
  if (b < 0.0) return {};
  const double start = std::max(a, 0.0);
  return {Interval{start, b, open && start == a}};
}

struct SetContext {
  EvalEnv at0;
  EvalEnv at1;
  bool tolerant = false; // widen comparisons by the compare tolerance
};

IntervalSet truth_set(const CompiledExpr &e, const SetContext &ctx) {
  if (clock_degree(e) == 0) return eval_bool(e, ctx.at0) ? kAll : IntervalSet{};
  switch (e.op) {
  case ExprOp::And:
    return intersect(truth_set(e.args[0], ctx), truth_set(e.args[1], ctx));
  case ExprOp::Or:
    return unite(truth_set(e.args[0], ctx), truth_set(e.args[1], ctx));
  case ExprOp::Not:
    return complement(truth_set(e.args[0], ctx));
  case ExprOp::Imply:
    return unite(complement(truth_set(e.args[0], ctx)), truth_set(e.args[1], ctx));
  case ExprOp::Cond: {
    IntervalSet c = truth_set(e.args[0], ctx);
    return unite(intersect(c, truth_set(e.args[1], ctx)),
                 intersect(complement(c), truth_set(e.args[2], ctx)));
  }
  case ExprOp::Lt:
  case ExprOp::Le:
  case ExprOp::Gt:
  case ExprOp::Ge:
  case ExprOp::Eq:
  case ExprOp::Ne: {
    const double a0 = eval_real(e.args[0], ctx.at0), b0 = eval_real(e.args[1], ctx.at0);
    const double a1 = eval_real(e.args[0], ctx.at1), b1 = eval_real(e.args[1], ctx.at1);
    const double g0 = a0 - b0, slope = (a1 - b1) - g0;
    const double tol = ctx.tolerant ? compare_tolerance(a0, b0) : 0.0;
    switch (e.op) {
    case ExprOp::Le:
      return affine_band(g0, slope, -kInf, tol, false);
    case ExprOp::Lt:
      return affine_band(g0, slope, -kInf, -tol, true);
    case ExprOp::Ge:
      return affine_band(g0, slope, -tol, kInf, false);
    case ExprOp::Gt:
      return affine_band(g0, slope, tol, kInf, true);
    case ExprOp::Eq:
      return affine_band(g0, slope, -tol, tol, false);
    default:
      return complement(affine_band(g0, slope, -tol, tol, false));
    }
  }
  default:
    throw EngineError("clock-dependent expression is not a constraint: " + std::string("op ") +
                      std::to_string(static_cast<int>(e.op)));
  }
}

// Intervals this narrow come from rounding around a single instant.
bool negligible(const Interval &i) { return i.hi - i.lo <= 1e-7 * std::max(1.0, std::abs(i.lo)); }

double measure(const IntervalSet &s) {
  double m = 0.0;
  for (const auto &i : s)
    if (!negligible(i)) m += i.hi - i.lo;
  return m;
}

double first_point(const Interval &i) {
  return i.lo_open ? i.lo + 1e-9 * (1.0 + std::abs(i.lo)) : i.lo;
}

// a + b * tau
struct Affine {
  double a = 0.0;
  double b = 0.0;
};

// Rate of a clock as an affine function of the delay offset tau, when the
// expression only reads variables, time and clocks with known constant rates.
// Locations and variables are frozen during a delay, so conditions that do
// not read clocks select a single branch.
std::optional<Affine> affine_rate(const CompiledExpr &e, const EvalEnv &env, const std::vector<double> &rate,
                                  const std::vector<const CompiledExpr *> &dynamic) {
  if (!uses_clocks(e)) return Affine{eval_real(e, env), 0.0};
  switch (e.op) {
  case ExprOp::Ident:
    if (e.ref.kind == RefKind::Time) return Affine{env.time, 1.0};
    if (e.ref.kind == RefKind::Clock) {
      const auto c = static_cast<std::size_t>(e.ref.slot);
      if (dynamic[c]) return std::nullopt;
      return Affine{env.clocks[c], rate[c]};
    }
    return std::nullopt;
  case ExprOp::Neg: {
    auto x = affine_rate(e.args[0], env, rate, dynamic);
    if (!x) return std::nullopt;
    return Affine{-x->a, -x->b};
  }
  case ExprOp::Add:
  case ExprOp::Sub: {
    auto x = affine_rate(e.args[0], env, rate, dynamic);
    auto y = affine_rate(e.args[1], env, rate, dynamic);
    if (!x || !y) return std::nullopt;
    const double sgn = e.op == ExprOp::Add ? 1.0 : -1.0;
    return Affine{x->a + sgn * y->a, x->b + sgn * y->b};
  }
  case ExprOp::Mul: {
    auto x = affine_rate(e.args[0], env, rate, dynamic);
    auto y = affine_rate(e.args[1], env, rate, dynamic);
    if (!x || !y) return std::nullopt;
    if (x->b == 0.0) return Affine{x->a * y->a, x->a * y->b};
    if (y->b == 0.0) return Affine{y->a * x->a, y->a * x->b};
    return std::nullopt;
  }
  case ExprOp::Div: {
    auto x = affine_rate(e.args[0], env, rate, dynamic);
    auto y = affine_rate(e.args[1], env, rate, dynamic);
    if (!x || !y || y->b != 0.0 || y->a == 0.0) return std::nullopt;
    return Affine{x->a / y->a, x->b / y->a};
  }
  case ExprOp::Cond:
    if (uses_clocks(e.args[0])) return std::nullopt;
    return affine_rate(eval_bool(e.args[0], env) ? e.args[1] : e.args[2], env, rate, dynamic);
  default:
    return std::nullopt;
  }
}

} // namespace

// ---------------------------------------------------------------------------

RngStream::RngStream(std::uint64_t seed, std::uint64_t run_index)
    : seed_(seed), run_index_(run_index), gen_(splitmix64(seed ^ splitmix64(run_index))) {}

double RngStream::uniform01() {
  ++counter_;
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double RngStream::exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

const char *to_string(EndReason r) {
  switch (r) {
  case EndReason::BoundReached:
    return "bound_reached";
  case EndReason::Deadlock:
    return "deadlock";
  case EndReason::Stopped:
    return "stopped";
  }
  return "?";
}

// ---------------------------------------------------------------------------

struct Simulator::Window {
  double ceiling = kInf;
  IntervalSet enabled; // intersected with [0, ceiling]
  double exit_rate = 1.0;
};

Simulator::Simulator(const Network &net, EngineOptions opts) : net_(net), opts_(opts) {
  rate_sources_.resize(net.clocks.size());
  for (std::size_t c = 0; c < net.components.size(); ++c) {
    const auto &comp = net.components[c];
    for (std::size_t l = 0; l < comp.locations.size(); ++l) {
      const auto &rates = comp.locations[l].rates;
      for (std::size_t r = 0; r < rates.size(); ++r)
        rate_sources_[static_cast<std::size_t>(rates[r].first)].push_back(
            {static_cast<int>(c), static_cast<int>(l), static_cast<int>(r)});
    }
  }
}

State Simulator::initial_state() const {
  State s;
  s.locs.reserve(net_.components.size());
  for (const auto &c : net_.components) s.locs.push_back(c.initial);
  for (const auto &v : net_.vars) s.vars.push_back(v.initial);
  s.clocks.reserve(net_.clocks.size());
  for (const auto &c : net_.clocks) s.clocks.push_back(c.initial);
  return s;
}

const CompiledExpr *Simulator::rate_expr(const State &s, int clock) const {
  const CompiledExpr *out = nullptr;
  for (const auto &[c, l, r] : rate_sources_[static_cast<std::size_t>(clock)])
    if (s.locs[static_cast<std::size_t>(c)] == l)
      out = &net_.components[static_cast<std::size_t>(c)]
                 .locations[static_cast<std::size_t>(l)]
                 .rates[static_cast<std::size_t>(r)]
                 .second;
  return out;
}

bool Simulator::invariant_holds(const State &s, int component) const {
  const auto &comp = net_.components[static_cast<std::size_t>(component)];
  const auto &loc = comp.locations[static_cast<std::size_t>(s.locs[static_cast<std::size_t>(component)])];
  return !loc.invariant || eval_bool(*loc.invariant, s.env());
}

bool Simulator::edge_enabled(const State &s, int component, int edge) const {
  const auto &e = net_.components[static_cast<std::size_t>(component)].edges[static_cast<std::size_t>(edge)];
  return !e.guard || eval_bool(*e.guard, s.env());
}

std::vector<double> Simulator::one_unit_later(const State &s) const {
  std::vector<double> clocks1(s.clocks);
  const EvalEnv env0 = s.env();
  for (std::size_t c = 0; c < clocks1.size(); ++c) {
    const CompiledExpr *r = rate_expr(s, static_cast<int>(c));
    clocks1[c] += r ? eval_real(*r, env0) : 1.0;
  }
  return clocks1;
}

Simulator::Window Simulator::delay_window(const State &s, int component, const std::vector<double> &clocks1) const {
  const auto &comp = net_.components[static_cast<std::size_t>(component)];
  const auto &loc = comp.locations[static_cast<std::size_t>(s.locs[static_cast<std::size_t>(component)])];
  Window w;
  w.exit_rate = loc.exit_rate;

  const EvalEnv env0 = s.env();
  SetContext ctx{env0, EvalEnv{s.vars, clocks1, s.locs, s.time + 1.0, nullptr}};

  if (loc.invariant) {
    SetContext tctx = ctx;
    tctx.tolerant = true;
    const IntervalSet inv = truth_set(*loc.invariant, tctx);
    if (inv.empty() || inv.front().lo > 0.0)
      throw EngineError("invariant of " + comp.name + "." + loc.name + " violated at t=" +
                        std::to_string(s.time));
    w.ceiling = inv.front().hi;
  }

  IntervalSet enabled;
  for (int ei : loc.edges) {
    const auto &e = comp.edges[static_cast<std::size_t>(ei)];
    if (!e.active()) continue;
    enabled = unite(enabled, e.guard ? truth_set(*e.guard, ctx) : kAll);
  }
  w.enabled = intersect(enabled, IntervalSet{Interval{0.0, w.ceiling}});
  return w;
}

double Simulator::sample_delay(const State &s, int component, RngStream &rng) const {
  return sample_window(delay_window(s, component, one_unit_later(s)), rng);
}

double Simulator::sample_window(const Window &w, RngStream &rng) const {
  if (w.enabled.empty()) return kInf;
  if (std::isfinite(w.ceiling)) {
    const double m = measure(w.enabled);
    if (m == 0.0) return first_point(w.enabled.front());
    double u = rng.uniform01() * m;
    for (const auto &i : w.enabled) {
      if (negligible(i)) continue;
      const double len = i.hi - i.lo;
      if (u <= len) return i.lo + u;
      u -= len;
    }
    return w.enabled.back().hi;
  }
  const double d = first_point(w.enabled.front()) + rng.exponential(w.exit_rate);
  for (const auto &i : w.enabled) {
    if (i.hi < d) continue;
    return d >= i.lo ? d : first_point(i);
  }
  return kInf;
}

void Simulator::integrate_rates(State &s, double dt) const {
  if (dt < 0.0) throw EngineError("negative delay");
  if (dt == 0.0) return;
  const std::size_t n = s.clocks.size();
  const EvalEnv env0 = s.env();
  std::vector<double> rate(n, 1.0);
  std::vector<const CompiledExpr *> dynamic(n, nullptr);
  bool any_dynamic = false;
  for (std::size_t c = 0; c < n; ++c) {
    const CompiledExpr *r = rate_expr(s, static_cast<int>(c));
    if (!r) continue;
    if (uses_clocks(*r)) {
      dynamic[c] = r;
      any_dynamic = true;
    } else {
      rate[c] = eval_real(*r, env0);
      if (!std::isfinite(rate[c]))
        throw EngineError("rate of clock " + net_.clocks[c].name + " is not finite");
    }
  }

  // RK4 integrates affine rates exactly; those are summed in closed form.
  std::vector<double> exact(n, 0.0);
  std::vector<char> closed(n, 0);
  std::vector<Affine> closed_rate(n);
  if (any_dynamic) {
    any_dynamic = false;
    for (std::size_t c = 0; c < n; ++c) {
      if (!dynamic[c]) continue;
      if (auto f = affine_rate(*dynamic[c], env0, rate, dynamic)) {
        exact[c] = f->a * dt + 0.5 * f->b * dt * dt;
        closed_rate[c] = *f;
        if (!std::isfinite(exact[c]))
          throw EngineError("rate of clock " + net_.clocks[c].name + " is not finite");
        closed[c] = 1;
      } else {
        any_dynamic = true;
      }
    }
    for (std::size_t c = 0; c < n; ++c)
      if (closed[c]) dynamic[c] = nullptr;
  }

  if (any_dynamic) {
    const std::vector<double> start(s.clocks);
    const double t0 = s.time;
    const auto steps = static_cast<long long>(std::ceil(dt / opts_.h_max - 1e-9));
    const double h = dt / static_cast<double>(std::max(1LL, steps));
    std::vector<double> y(n), tmp(n), k1(n), k2(n), k3(n), k4(n);
    for (std::size_t c = 0; c < n; ++c) y[c] = start[c];
    // Derivative at offset tau with dynamic clocks at `yy`.
    auto deriv = [&](double tau, const std::vector<double> &yy, std::vector<double> &out) {
      for (std::size_t c = 0; c < n; ++c) {
        if (dynamic[c]) tmp[c] = yy[c];
        else if (closed[c]) tmp[c] = start[c] + (closed_rate[c].a + 0.5 * closed_rate[c].b * tau) * tau;
        else tmp[c] = start[c] + rate[c] * tau;
      }
      const EvalEnv env{s.vars, tmp, s.locs, t0 + tau, nullptr};
      for (std::size_t c = 0; c < n; ++c) {
        if (!dynamic[c]) continue;
        out[c] = eval_real(*dynamic[c], env);
        if (!std::isfinite(out[c]))
          throw EngineError("rate of clock " + net_.clocks[c].name + " is not finite");
      }
    };
    std::vector<double> yy(n);
    for (long long k = 0; k < std::max(1LL, steps); ++k) {
      const double tau = h * static_cast<double>(k);
      deriv(tau, y, k1);
      for (std::size_t c = 0; c < n; ++c) yy[c] = dynamic[c] ? y[c] + 0.5 * h * k1[c] : 0.0;
      deriv(tau + 0.5 * h, yy, k2);
      for (std::size_t c = 0; c < n; ++c) yy[c] = dynamic[c] ? y[c] + 0.5 * h * k2[c] : 0.0;
      deriv(tau + 0.5 * h, yy, k3);
      for (std::size_t c = 0; c < n; ++c) yy[c] = dynamic[c] ? y[c] + h * k3[c] : 0.0;
      deriv(tau + h, yy, k4);
      for (std::size_t c = 0; c < n; ++c)
        if (dynamic[c]) y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    }
    for (std::size_t c = 0; c < n; ++c)
      if (dynamic[c]) s.clocks[c] = y[c];
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (closed[c]) s.clocks[c] += exact[c];
    else if (!dynamic[c]) s.clocks[c] += rate[c] * dt;
  }
  s.time += dt;
}

void Simulator::advance(State &s, double dt, Sampler *sampler) const {
  const double end = s.time + dt;
  if (sampler && sampler->fn && sampler->step > 0.0) {
    for (;;) {
      const double t = static_cast<double>(sampler->next) * sampler->step;
      if (t > end + 1e-9 * std::max(1.0, end)) break;
      if (t > s.time) integrate_rates(s, std::min(t, end) - s.time);
      (*sampler->fn)(s);
      ++sampler->next;
    }
  }
  if (end > s.time) integrate_rates(s, end - s.time);
}

int Simulator::choose(const std::vector<double> &weights, RngStream &rng) const {
  if (weights.size() == 1) return 0;
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform01() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return static_cast<int>(i);
    u -= weights[i];
  }
  return static_cast<int>(weights.size()) - 1;
}

namespace {

struct Candidates {
  std::vector<int> edges;
  std::vector<double> weights;
};

} // namespace

void Simulator::fire(State &s, int component, int edge, RngStream &rng, StepInfo &info) const {
  const auto &comp = net_.components[static_cast<std::size_t>(component)];
  const NetEdge &e = comp.edges[static_cast<std::size_t>(edge)];
  info.time = s.time;
  info.component = component;
  info.edge = edge;
  info.channel = e.channel;
  info.receivers.clear();

  if (e.channel >= 0 && e.dir == SyncDir::Emit) {
    const bool broadcast = net_.channels[static_cast<std::size_t>(e.channel)].broadcast;
    std::vector<std::pair<int, int>> pool;
    std::vector<double> pool_w;
    for (std::size_t j = 0; j < net_.components.size(); ++j) {
      if (static_cast<int>(j) == component) continue;
      const auto &other = net_.components[j];
      std::vector<int> es;
      std::vector<double> ws;
      for (int ri : other.locations[static_cast<std::size_t>(s.locs[j])].edges) {
        const auto &r = other.edges[static_cast<std::size_t>(ri)];
        if (r.channel != e.channel || r.dir != SyncDir::Receive) continue;
        if (!edge_enabled(s, static_cast<int>(j), ri)) continue;
        es.push_back(ri);
        ws.push_back(r.weight);
      }
      if (es.empty()) continue;
      if (broadcast) {
        info.receivers.emplace_back(static_cast<int>(j), es[static_cast<std::size_t>(choose(ws, rng))]);
      } else {
        for (std::size_t k = 0; k < es.size(); ++k) {
          pool.emplace_back(static_cast<int>(j), es[k]);
          pool_w.push_back(ws[k]);
        }
      }
    }
    if (!broadcast) {
      if (pool.empty())
        throw EngineError("no receiver for " + net_.channels[static_cast<std::size_t>(e.channel)].name +
                          "! from " + comp.name);
      info.receivers.push_back(pool[static_cast<std::size_t>(choose(pool_w, rng))]);
    }
  }

  auto apply = [&](int c, const NetEdge &ed) {
    for (const auto &a : ed.updates) {
      const Value v = eval(a.value, s.env(&rng));
      if (a.to_clock) s.clocks[static_cast<std::size_t>(a.slot)] = v.as_real();
      else s.vars[static_cast<std::size_t>(a.slot)] = coerce(v, a.kind);
    }
    s.locs[static_cast<std::size_t>(c)] = ed.target;
  };
  apply(component, e);
  for (const auto &[j, ri] : info.receivers)
    apply(j, net_.components[static_cast<std::size_t>(j)].edges[static_cast<std::size_t>(ri)]);
}

StepStatus Simulator::step(State &s, RngStream &rng, double bound, StepInfo &info, Sampler *sampler) const {
  const std::size_t n = net_.components.size();

  // Enabled active edges of component c in the current state.
  auto candidates = [&](std::size_t c) {
    Candidates out;
    const auto &comp = net_.components[c];
    for (int ei : comp.locations[static_cast<std::size_t>(s.locs[c])].edges) {
      const auto &e = comp.edges[static_cast<std::size_t>(ei)];
      if (!e.active() || !edge_enabled(s, static_cast<int>(c), ei)) continue;
      if (e.channel >= 0 && !net_.channels[static_cast<std::size_t>(e.channel)].broadcast) {
        bool receiver = false;
        for (std::size_t j = 0; j < n && !receiver; ++j) {
          if (j == c) continue;
          const auto &other = net_.components[j];
          for (int ri : other.locations[static_cast<std::size_t>(s.locs[j])].edges) {
            const auto &r = other.edges[static_cast<std::size_t>(ri)];
            if (r.channel == e.channel && r.dir == SyncDir::Receive &&
                edge_enabled(s, static_cast<int>(j), ri)) {
              receiver = true;
              break;
            }
          }
        }
        if (!receiver) continue;
      }
      out.edges.push_back(ei);
      out.weights.push_back(e.weight);
    }
    return out;
  };

  bool any_committed = false;
  for (std::size_t c = 0; c < n; ++c) {
    const auto &loc = net_.components[c].locations[static_cast<std::size_t>(s.locs[c])];
    if (!loc.committed) continue;
    any_committed = true;
    Candidates cand = candidates(c);
    if (cand.edges.empty()) continue;
    const int e = cand.edges[static_cast<std::size_t>(choose(cand.weights, rng))];
    fire(s, static_cast<int>(c), e, rng, info);
    return StepStatus::Fired;
  }
  if (any_committed) return StepStatus::Deadlock;

  double best = kInf, ceiling = kInf;
  int winner = -1;
  const std::vector<double> clocks1 = one_unit_later(s);
  for (std::size_t c = 0; c < n; ++c) {
    const Window w = delay_window(s, static_cast<int>(c), clocks1);
    ceiling = std::min(ceiling, w.ceiling);
    if (w.enabled.empty()) continue;
    const double d = sample_window(w, rng);
    if (d < best) {
      best = d;
      winner = static_cast<int>(c);
    }
  }

  const double remaining = bound - s.time;
  if (best > remaining && ceiling >= remaining) {
    advance(s, std::max(0.0, remaining), sampler);
    s.time = bound;
    return StepStatus::BoundReached;
  }
  if (ceiling < best) {
    advance(s, ceiling, sampler);
    return StepStatus::Deadlock;
  }
  advance(s, best, sampler);
  Candidates cand = candidates(static_cast<std::size_t>(winner));
  if (cand.edges.empty()) return StepStatus::Idle;
  const int e = cand.edges[static_cast<std::size_t>(choose(cand.weights, rng))];
  fire(s, winner, e, rng, info);
  return StepStatus::Fired;
}

EndReason Simulator::run(double bound, RngStream &rng, const RunHooks &hooks) const {
  if (!(bound > 0.0)) throw EngineError("time bound must be positive");
  State s = initial_state();
  if (hooks.on_initial) hooks.on_initial(s);
  Sampler sampler{hooks.sample_step, 0, hooks.on_sample ? &hooks.on_sample : nullptr};
  Sampler *sp = hooks.on_sample && hooks.sample_step > 0.0 ? &sampler : nullptr;
  if (sp) advance(s, 0.0, sp);

  StepInfo info;
  EndReason reason = EndReason::BoundReached;
  for (long long steps = 0;; ++steps) {
    if (steps >= opts_.max_steps)
      throw EngineError("zeno/committed-loop: more than " + std::to_string(opts_.max_steps) +
                        " steps at t=" + std::to_string(s.time));
    const StepStatus st = step(s, rng, bound, info, sp);
    if (st == StepStatus::BoundReached) break;
    if (st == StepStatus::Deadlock) {
      reason = EndReason::Deadlock;
      break;
    }
    if (opts_.check_invariants)
      for (std::size_t c = 0; c < net_.components.size(); ++c)
        if (!invariant_holds(s, static_cast<int>(c)))
          throw EngineError("invariant of " + net_.components[c].name + " violated after step at t=" +
                            std::to_string(s.time));
    if (st == StepStatus::Fired && hooks.on_event && !hooks.on_event(s, info)) {
      reason = EndReason::Stopped;
      break;
    }
  }
  if (hooks.on_end) hooks.on_end(s, reason);
  return reason;
}

Trace Simulator::run_trace(double bound, RngStream &rng, const std::vector<CompiledExpr> &watch) const {
  Trace tr;
  auto values = [&](const State &s) {
    std::vector<Value> out;
    out.reserve(watch.size());
    for (const auto &w : watch) out.push_back(eval(w, s.env()));
    return out;
  };
  RunHooks hooks;
  hooks.on_initial = [&](const State &s) {
    tr.initial = s;
    tr.initial_watch = values(s);
  };
  hooks.on_event = [&](const State &s, const StepInfo &info) {
    TraceEvent ev;
    ev.time = info.time;
    ev.component = info.component;
    ev.edge = net_.components[static_cast<std::size_t>(info.component)]
                  .edges[static_cast<std::size_t>(info.edge)]
                  .label;
    ev.channel = info.channel;
    for (const auto &r : info.receivers) ev.receivers.push_back(r.first);
    ev.watch = values(s);
    tr.events.push_back(std::move(ev));
    return true;
  };
  hooks.on_end = [&](const State &s, EndReason r) {
    tr.end_time = s.time;
    tr.end = r;
    tr.final_watch = values(s);
  };
  run(bound, rng, hooks);
  return tr;
}

namespace {

nlohmann::json to_json(const Value &v) {
  switch (v.kind) {
  case ValueKind::Bool:
    return v.truthy();
  case ValueKind::Int:
    return v.i;
  case ValueKind::Real:
    return v.r;
  }
  return nullptr;
}

} // namespace

void write_jsonl(std::ostream &os, const Network &net, const Trace &trace,
                 const std::vector<std::string> &watch_names) {
  for (const auto &ev : trace.events) {
    nlohmann::ordered_json j;
    j["t"] = ev.time;
    j["comp"] = net.components[static_cast<std::size_t>(ev.component)].name;
    j["edge"] = ev.edge;
    if (ev.channel >= 0) j["chan"] = net.channels[static_cast<std::size_t>(ev.channel)].name;
    nlohmann::ordered_json w = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < ev.watch.size() && i < watch_names.size(); ++i)
      w[watch_names[i]] = to_json(ev.watch[i]);
    j["watch"] = w;
    os << j.dump() << '\n';
  }
}

} // namespace stasmc
