#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stasmc/expr.hpp"

namespace stasmc {

// ---------------------------------------------------------------------------
// Static structure, as parsed

enum class DeclType : std::uint8_t { Bool, Int, Real, Clock, Chan, BroadcastChan };

struct Decl {
  DeclType type = DeclType::Int;
  std::string name;
  std::optional<Expr> init;
  SourceSpan span;
};

struct Param {
  std::string name;
  ValueKind type = ValueKind::Int;
};

enum class LocationKind : std::uint8_t { Normal, Committed };

struct RateDef {
  std::string clock;
  Expr rate;
};

struct Location {
  std::string id;
  bool initial = false;
  LocationKind kind = LocationKind::Normal;
  std::optional<Expr> invariant;
  std::vector<RateDef> rates; // clocks absent here run at rate 1
  std::optional<double> exit_rate;
  SourceSpan span;
};

enum class SyncDir : std::uint8_t { Emit, Receive };

struct Sync {
  std::string channel;
  SyncDir dir = SyncDir::Emit;
};

struct Assignment {
  std::string target;
  Expr value;
  SourceSpan span;
};

struct Edge {
  std::string source;
  std::string target;
  std::optional<Expr> guard;
  std::optional<Sync> sync;
  double weight = 1.0;
  std::vector<Assignment> updates;
  SourceSpan span;
};

struct Template {
  std::string name;
  std::vector<Param> params;
  std::vector<Decl> decls;
  std::vector<Location> locations;
  std::vector<Edge> edges;
  SourceSpan span;

  /// Index of the location marked initial, or -1 when there is not exactly one.
  int initial_index() const;
  const Location *find_location(const std::string &id) const;
};

struct Instantiation {
  std::string instance; // defaults to the template name
  std::string template_name;
  std::vector<Expr> args;
  SourceSpan span;
};

struct Model {
  std::vector<Decl> decls;
  std::vector<Template> templates;
  std::vector<Instantiation> system;

  const Template *find_template(const std::string &name) const;
};

struct Diagnostic {
  std::string code;
  SourceSpan span;
  std::string message;
};

struct ValidationReport {
  std::vector<Diagnostic> errors;
  std::vector<Diagnostic> warnings;

  bool ok() const { return errors.empty(); }
  bool has_error(const std::string &code) const;
};

std::string to_string(const ValidationReport &report);

class ModelError : public std::runtime_error {
public:
  explicit ModelError(ValidationReport report);
  const ValidationReport &report() const { return report_; }

private:
  ValidationReport report_;
};

// ---------------------------------------------------------------------------
// Instantiated network

struct Channel {
  std::string name;
  bool broadcast = false;
};

struct VarInfo {
  std::string name; // qualified for locals: `Comp.x`
  ValueKind kind = ValueKind::Int;
  Value initial;
};

struct ClockInfo {
  std::string name;
  bool integrated = false; // some location gives it a clock-dependent rate
  double initial = 0.0;
};

struct NetAssignment {
  bool to_clock = false;
  int slot = -1;
  ValueKind kind = ValueKind::Real;
  CompiledExpr value;
};

struct NetEdge {
  int source = -1;
  int target = -1;
  std::optional<CompiledExpr> guard;
  int channel = -1;
  SyncDir dir = SyncDir::Emit;
  double weight = 1.0;
  std::vector<NetAssignment> updates;
  std::string label; // `src->dst`

  /// Edges the owning component can take on its own (no sync, or emitting).
  bool active() const { return channel < 0 || dir == SyncDir::Emit; }
};

struct NetLocation {
  std::string name;
  bool committed = false;
  std::optional<CompiledExpr> invariant;
  std::vector<std::pair<int, CompiledExpr>> rates; // (clock slot, rate)
  double exit_rate = 1.0;
  std::vector<int> edges; // outgoing edge indices
};

struct Component {
  std::string name;
  std::string template_name;
  std::vector<NetLocation> locations;
  std::vector<NetEdge> edges;
  int initial = 0;

  int location_index(const std::string &id) const;
};

/// Flat, immutable network of component instances. Safe to share between
/// concurrent simulation workers.
class Network {
public:
  std::vector<Component> components;
  std::vector<VarInfo> vars;
  std::vector<ClockInfo> clocks;
  std::vector<Channel> channels;

  int component_index(const std::string &name) const;
  int channel_index(const std::string &name) const;
  int var_index(const std::string &name) const;
  int clock_index(const std::string &name) const;

  /// Resolves a global name, `time`, or a qualified `Comp.member`.
  std::optional<Ref> lookup(const std::string &name) const;
  /// Compiles a state expression (queries, watches). Throws std::invalid_argument.
  CompiledExpr compile(const Expr &e) const;

private:
  friend class NetworkBuilder;
  std::unordered_map<std::string, Ref> globals_;
};

/// Returns every structural violation. Pure and idempotent.
ValidationReport validate_model(const Model &model);

/// Flattens the model into a network, substituting parameters. Component
/// order equals system declaration order. Throws ModelError exactly when
/// validate_model reports errors.
Network instantiate(const Model &model);

} // namespace stasmc
