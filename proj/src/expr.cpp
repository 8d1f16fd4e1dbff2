#include "stasmc/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace stasmc {

Value coerce(const Value &v, ValueKind target) {
  switch (target) {
  case ValueKind::Bool:
    return Value::boolean(v.truthy());
  case ValueKind::Int:
    if (v.kind == ValueKind::Real) {
      if (v.r != std::floor(v.r) || std::abs(v.r) > 9.0e18)
        throw EvalError("cannot assign non-integral real " + to_string(v) + " to int");
      return Value::integer(static_cast<std::int64_t>(v.r));
    }
    return Value::integer(v.i);
  case ValueKind::Real:
    return Value::real(v.as_real());
  }
  return v;
}

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_string(const Value &v) {
  switch (v.kind) {
  case ValueKind::Bool:
    return v.i ? "true" : "false";
  case ValueKind::Int:
    return std::to_string(v.i);
  case ValueKind::Real: {
    std::string s = format_real(v.r);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  }
  return "?";
}

const char *kind_name(ValueKind k) {
  switch (k) {
  case ValueKind::Bool:
    return "bool";
  case ValueKind::Int:
    return "int";
  case ValueKind::Real:
    return "real";
  }
  return "?";
}

// ---------------------------------------------------------------------------

Expr Expr::lit(Value v) {
  Expr e;
  e.op = ExprOp::Literal;
  e.literal = v;
  return e;
}

Expr Expr::ident(std::string n) {
  Expr e;
  e.op = ExprOp::Ident;
  e.name = std::move(n);
  return e;
}

Expr Expr::unary(ExprOp op, Expr a) {
  Expr e;
  e.op = op;
  e.args.push_back(std::move(a));
  return e;
}

Expr Expr::binary(ExprOp op, Expr a, Expr b) {
  Expr e;
  e.op = op;
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

Expr Expr::cond(Expr c, Expr a, Expr b) {
  Expr e;
  e.op = ExprOp::Cond;
  e.args.push_back(std::move(c));
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

Expr Expr::call(std::string fn, std::vector<Expr> args) {
  Expr e;
  e.op = ExprOp::Call;
  e.name = std::move(fn);
  e.args = std::move(args);
  return e;
}

namespace {

int precedence(ExprOp op) {
  switch (op) {
  case ExprOp::Cond:
    return 0;
  case ExprOp::Imply:
    return 1;
  case ExprOp::Or:
    return 2;
  case ExprOp::And:
    return 3;
  case ExprOp::Eq:
  case ExprOp::Ne:
    return 4;
  case ExprOp::Lt:
  case ExprOp::Le:
  case ExprOp::Gt:
  case ExprOp::Ge:
    return 5;
  case ExprOp::Add:
  case ExprOp::Sub:
    return 6;
  case ExprOp::Mul:
  case ExprOp::Div:
  case ExprOp::Mod:
    return 7;
  case ExprOp::Neg:
  case ExprOp::Not:
    return 8;
  default:
    return 9;
  }
}

const char *op_text(ExprOp op) {
  switch (op) {
  case ExprOp::Add:
    return "+";
  case ExprOp::Sub:
    return "-";
  case ExprOp::Mul:
    return "*";
  case ExprOp::Div:
    return "/";
  case ExprOp::Mod:
    return "%";
  case ExprOp::Lt:
    return "<";
  case ExprOp::Le:
    return "<=";
  case ExprOp::Gt:
    return ">";
  case ExprOp::Ge:
    return ">=";
  case ExprOp::Eq:
    return "==";
  case ExprOp::Ne:
    return "!=";
  case ExprOp::And:
    return "&&";
  case ExprOp::Or:
    return "||";
  case ExprOp::Imply:
    return "imply";
  default:
    return "?";
  }
}

void print(const Expr &e, std::string &out);

void print_child(const Expr &child, int min_prec, std::string &out) {
  if (precedence(child.op) < min_prec) {
    out += '(';
    print(child, out);
    out += ')';
  } else {
    print(child, out);
  }
}

void print(const Expr &e, std::string &out) {
  switch (e.op) {
  case ExprOp::Literal:
    out += to_string(e.literal);
    return;
  case ExprOp::Ident:
    out += e.name;
    return;
  case ExprOp::Neg:
    out += '-';
    print_child(e.args[0], 9, out);
    return;
  case ExprOp::Not:
    out += '!';
    print_child(e.args[0], 9, out);
    return;
  case ExprOp::Cond:
    print_child(e.args[0], 1, out);
    out += " ? ";
    print_child(e.args[1], 1, out);
    out += " : ";
    print_child(e.args[2], 0, out);
    return;
  case ExprOp::Call:
    out += e.name;
    out += '(';
    for (std::size_t i = 0; i < e.args.size(); ++i) {
      if (i) out += ", ";
      print(e.args[i], out);
    }
    out += ')';
    return;
  case ExprOp::Imply: // right-associative
    print_child(e.args[0], 2, out);
    out += " imply ";
    print_child(e.args[1], 1, out);
    return;
  default: {
    const int p = precedence(e.op);
    print_child(e.args[0], p, out);
    out += ' ';
    out += op_text(e.op);
    out += ' ';
    print_child(e.args[1], p + 1, out);
  }
  }
}

} // namespace

std::string to_string(const Expr &e) {
  std::string out;
  print(e, out);
  return out;
}

bool same_structure(const Expr &a, const Expr &b) {
  if (a.op != b.op || a.name != b.name || a.args.size() != b.args.size()) return false;
  if (a.op == ExprOp::Literal && !(a.literal == b.literal)) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!same_structure(a.args[i], b.args[i])) return false;
  return true;
}

void for_each_ident(const Expr &e, const std::function<void(const Expr &)> &f) {
  if (e.op == ExprOp::Ident) f(e);
  for (const auto &a : e.args) for_each_ident(a, f);
}

// ---------------------------------------------------------------------------

double compare_tolerance(double a, double b) {
  return 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

namespace {

std::int64_t checked(std::int64_t a, std::int64_t b, ExprOp op) {
  std::int64_t r = 0;
  bool overflow = false;
  switch (op) {
  case ExprOp::Add:
    overflow = __builtin_add_overflow(a, b, &r);
    break;
  case ExprOp::Sub:
    overflow = __builtin_sub_overflow(a, b, &r);
    break;
  case ExprOp::Mul:
    overflow = __builtin_mul_overflow(a, b, &r);
    break;
  case ExprOp::Div:
    if (b == 0) throw EvalError("integer division by zero");
    if (a == INT64_MIN && b == -1) overflow = true;
    else r = a / b;
    break;
  case ExprOp::Mod:
    if (b == 0) throw EvalError("integer modulo by zero");
    if (a == INT64_MIN && b == -1) r = 0;
    else r = a % b;
    break;
  default:
    break;
  }
  if (overflow) throw EvalError("integer overflow");
  return r;
}

bool is_integral(const Value &v) { return v.kind != ValueKind::Real; }

Value arith(ExprOp op, const Value &a, const Value &b) {
  if (is_integral(a) && is_integral(b)) return Value::integer(checked(a.i, b.i, op));
  const double x = a.as_real(), y = b.as_real();
  switch (op) {
  case ExprOp::Add:
    return Value::real(x + y);
  case ExprOp::Sub:
    return Value::real(x - y);
  case ExprOp::Mul:
    return Value::real(x * y);
  case ExprOp::Div:
    return Value::real(x / y);
  case ExprOp::Mod:
    return Value::real(std::fmod(x, y));
  default:
    return Value::real(0.0);
  }
}

bool compare(ExprOp op, const Value &a, const Value &b) {
  if (is_integral(a) && is_integral(b)) {
    switch (op) {
    case ExprOp::Lt:
      return a.i < b.i;
    case ExprOp::Le:
      return a.i <= b.i;
    case ExprOp::Gt:
      return a.i > b.i;
    case ExprOp::Ge:
      return a.i >= b.i;
    case ExprOp::Eq:
      return a.i == b.i;
    case ExprOp::Ne:
      return a.i != b.i;
    default:
      return false;
    }
  }
  const double x = a.as_real(), y = b.as_real();
  const double tol = compare_tolerance(x, y);
  switch (op) {
  case ExprOp::Lt:
    return x < y - tol;
  case ExprOp::Le:
    return x <= y + tol;
  case ExprOp::Gt:
    return x > y + tol;
  case ExprOp::Ge:
    return x >= y - tol;
  case ExprOp::Eq:
    return std::abs(x - y) <= tol;
  case ExprOp::Ne:
    return std::abs(x - y) > tol;
  default:
    return false;
  }
}

} // namespace

Value eval(const CompiledExpr &e, const EvalEnv &env) {
  switch (e.op) {
  case ExprOp::Literal:
    return e.ref.constant;
  case ExprOp::Ident:
    switch (e.ref.kind) {
    case RefKind::Const:
      return e.ref.constant;
    case RefKind::Var:
      return env.vars[static_cast<std::size_t>(e.ref.slot)];
    case RefKind::Clock:
      return Value::real(env.clocks[static_cast<std::size_t>(e.ref.slot)]);
    case RefKind::Location:
      return Value::boolean(env.locs[static_cast<std::size_t>(e.ref.slot)] == e.ref.loc);
    case RefKind::Time:
      return Value::real(env.time);
    }
    break;
  case ExprOp::Neg: {
    const Value a = eval(e.args[0], env);
    if (is_integral(a)) return Value::integer(checked(0, a.i, ExprOp::Sub));
    return Value::real(-a.r);
  }
  case ExprOp::Not:
    return Value::boolean(!eval(e.args[0], env).truthy());
  case ExprOp::Add:
  case ExprOp::Sub:
  case ExprOp::Mul:
  case ExprOp::Div:
  case ExprOp::Mod:
    return arith(e.op, eval(e.args[0], env), eval(e.args[1], env));
  case ExprOp::Lt:
  case ExprOp::Le:
  case ExprOp::Gt:
  case ExprOp::Ge:
  case ExprOp::Eq:
  case ExprOp::Ne:
    return Value::boolean(compare(e.op, eval(e.args[0], env), eval(e.args[1], env)));
  case ExprOp::And:
    return Value::boolean(eval(e.args[0], env).truthy() && eval(e.args[1], env).truthy());
  case ExprOp::Or:
    return Value::boolean(eval(e.args[0], env).truthy() || eval(e.args[1], env).truthy());
  case ExprOp::Imply:
    return Value::boolean(!eval(e.args[0], env).truthy() || eval(e.args[1], env).truthy());
  case ExprOp::Cond:
    return eval(e.args[0], env).truthy() ? eval(e.args[1], env) : eval(e.args[2], env);
  case ExprOp::Call: {
    if (e.fn == "random") {
      if (!env.rng) throw EvalError("random() is only allowed in updates");
      const double hi = eval(e.args[0], env).as_real();
      return Value::real(hi * env.rng->uniform01());
    }
    if (e.fn == "abs") {
      const Value a = eval(e.args[0], env);
      if (is_integral(a)) return Value::integer(a.i < 0 ? checked(0, a.i, ExprOp::Sub) : a.i);
      return Value::real(std::abs(a.r));
    }
    const Value a = eval(e.args[0], env);
    const Value b = eval(e.args[1], env);
    const bool take_a = e.fn == "min" ? a.as_real() <= b.as_real() : a.as_real() >= b.as_real();
    if (is_integral(a) && is_integral(b)) return take_a ? a : b;
    return Value::real(take_a ? a.as_real() : b.as_real());
  }
  }
  throw EvalError("malformed expression");
}

double eval_real(const CompiledExpr &e, const EvalEnv &env) { return eval(e, env).as_real(); }

int clock_degree(const CompiledExpr &e) {
  if (e.degree >= 0) return e.degree;
  switch (e.op) {
  case ExprOp::Literal:
    return 0;
  case ExprOp::Ident:
    return e.ref.kind == RefKind::Clock || e.ref.kind == RefKind::Time ? 1 : 0;
  case ExprOp::Neg:
    return clock_degree(e.args[0]);
  case ExprOp::Add:
  case ExprOp::Sub:
    return std::max(clock_degree(e.args[0]), clock_degree(e.args[1]));
  case ExprOp::Mul: {
    const int a = clock_degree(e.args[0]), b = clock_degree(e.args[1]);
    return std::min(2, a + b);
  }
  case ExprOp::Div:
    return clock_degree(e.args[1]) > 0 ? 2 : clock_degree(e.args[0]);
  default: {
    int d = 0;
    for (const auto &a : e.args) d = std::max(d, clock_degree(a));
    return d > 0 ? 2 : 0;
  }
  }
}

bool is_linear_constraint(const CompiledExpr &e) {
  switch (e.op) {
  case ExprOp::And:
  case ExprOp::Or:
  case ExprOp::Not:
  case ExprOp::Imply:
  case ExprOp::Cond:
    return std::all_of(e.args.begin(), e.args.end(), [](const auto &a) { return is_linear_constraint(a); });
  case ExprOp::Lt:
  case ExprOp::Le:
  case ExprOp::Gt:
  case ExprOp::Ge:
  case ExprOp::Eq:
  case ExprOp::Ne:
    return clock_degree(e.args[0]) <= 1 && clock_degree(e.args[1]) <= 1;
  default:
    return clock_degree(e) == 0;
  }
}

bool uses_random(const CompiledExpr &e) {
  if (e.op == ExprOp::Call && e.fn == "random") return true;
  return std::any_of(e.args.begin(), e.args.end(), [](const auto &a) { return uses_random(a); });
}

bool uses_clocks(const CompiledExpr &e) { return clock_degree(e) > 0; }

CompiledExpr compile(const Expr &e, const Resolver &resolve,
                     std::vector<std::pair<std::string, SourceSpan>> &errors) {
  CompiledExpr c;
  c.op = e.op;
  if (e.op == ExprOp::Literal) {
    c.ref.kind = RefKind::Const;
    c.ref.constant = e.literal;
    c.degree = 0;
    return c;
  }
  if (e.op == ExprOp::Ident) {
    if (auto r = resolve(e.name)) {
      c.ref = *r;
      if (c.ref.kind == RefKind::Const) c.op = ExprOp::Literal;
    } else {
      errors.emplace_back("unknown identifier '" + e.name + "'", e.span);
      c.op = ExprOp::Literal;
      c.ref.constant = Value::integer(0);
    }
    c.degree = static_cast<std::int8_t>(clock_degree(c));
    return c;
  }
  if (e.op == ExprOp::Call) {
    c.fn = e.name;
    std::size_t arity = 0;
    if (e.name == "random" || e.name == "abs") arity = 1;
    else if (e.name == "min" || e.name == "max") arity = 2;
    if (arity == 0) errors.emplace_back("unknown function '" + e.name + "'", e.span);
    else if (e.args.size() != arity)
      errors.emplace_back("function '" + e.name + "' expects " + std::to_string(arity) +
                              " argument(s)",
                          e.span);
  }
  for (const auto &a : e.args) c.args.push_back(compile(a, resolve, errors));
  c.degree = static_cast<std::int8_t>(clock_degree(c));
  return c;
}

CompiledExpr compile_or_throw(const Expr &e, const Resolver &resolve) {
  std::vector<std::pair<std::string, SourceSpan>> errors;
  CompiledExpr c = compile(e, resolve, errors);
  if (!errors.empty()) throw std::invalid_argument(errors.front().first);
  return c;
}

} // namespace stasmc
