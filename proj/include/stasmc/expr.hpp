#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stasmc/value.hpp"

namespace stasmc {

/// Position of a construct in a source text. Line and column are 1-based.
struct SourceSpan {
  std::string file;
  int line = 0;
  int column = 0;
  int length = 0;
};

enum class ExprOp : std::uint8_t {
  Literal,
  Ident,
  Neg,
  Not,
  Add,
  Sub,
  Mul,
  Div,
  Mod,
  Lt,
  Le,
  Gt,
  Ge,
  Eq,
  Ne,
  And,
  Or,
  Imply,
  Cond, // c ? a : b
  Call, // min, max, abs, random
};

/// Untyped expression tree as written in a model or query.
struct Expr {
  ExprOp op = ExprOp::Literal;
  Value literal;
  std::string name; // identifier (possibly `Comp.member`) or function name
  std::vector<Expr> args;
  SourceSpan span;

  static Expr lit(Value v);
  static Expr ident(std::string n);
  static Expr unary(ExprOp op, Expr a);
  static Expr binary(ExprOp op, Expr a, Expr b);
  static Expr cond(Expr c, Expr a, Expr b);
  static Expr call(std::string fn, std::vector<Expr> args);

  bool is_true_literal() const { return op == ExprOp::Literal && literal.truthy(); }
};

std::string to_string(const Expr &e);
/// Structural equality, ignoring source spans.
bool same_structure(const Expr &a, const Expr &b);
/// Calls `f` for every identifier in `e`.
void for_each_ident(const Expr &e, const std::function<void(const Expr &)> &f);

// ---------------------------------------------------------------------------
// Resolved expressions

enum class RefKind : std::uint8_t { Const, Var, Clock, Location, Time };

struct Ref {
  RefKind kind = RefKind::Const;
  int slot = -1; // variable/clock slot, or component index for Location
  int loc = -1;  // location index for Location refs
  Value constant;
};

/// Expression with every identifier bound to a slot of the network state.
struct CompiledExpr {
  ExprOp op = ExprOp::Literal;
  Ref ref;
  std::string fn;
  std::vector<CompiledExpr> args;
  std::int8_t degree = -1; // clock_degree, filled by compile

  bool is_const() const { return op == ExprOp::Literal; }
};

/// Uniform random draws used by `random(x)` in updates.
class UniformSource {
public:
  virtual ~UniformSource() = default;
  virtual double uniform01() = 0;
};

struct EvalEnv {
  std::span<const Value> vars;
  std::span<const double> clocks;
  std::span<const int> locs;
  double time = 0.0;
  UniformSource *rng = nullptr;
};

Value eval(const CompiledExpr &e, const EvalEnv &env);
inline bool eval_bool(const CompiledExpr &e, const EvalEnv &env) { return eval(e, env).truthy(); }
double eval_real(const CompiledExpr &e, const EvalEnv &env);

/// Tolerance used when comparing reals. Non-strict comparisons are lenient
/// and strict ones are strict by this amount, so a clock that reaches a
/// guard bound by integration satisfies `x >= c` but not `x > c`.
double compare_tolerance(double a, double b);

/// 0 if `e` does not depend on clocks, 1 if it is affine in clocks, 2 otherwise.
int clock_degree(const CompiledExpr &e);
/// Boolean combination of comparisons whose sides are affine in clocks.
bool is_linear_constraint(const CompiledExpr &e);
bool uses_random(const CompiledExpr &e);
bool uses_clocks(const CompiledExpr &e);

using Resolver = std::function<std::optional<Ref>(const std::string &name)>;

/// Binds identifiers via `resolve`. Unresolvable names and unknown functions
/// are appended to `errors` as (message, span) pairs.
CompiledExpr compile(const Expr &e, const Resolver &resolve,
                     std::vector<std::pair<std::string, SourceSpan>> &errors);

/// Compiles and throws std::invalid_argument on the first error.
CompiledExpr compile_or_throw(const Expr &e, const Resolver &resolve);

} // namespace stasmc
