#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stasmc {

/// Raised for run-time faults in expression evaluation (integer overflow,
/// division by zero, type misuse). Verification runs must fail loudly.
class EvalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class ValueKind : std::uint8_t { Bool, Int, Real };

/// A scalar in the model language: bool, 64-bit signed int, or double.
struct Value {
  ValueKind kind = ValueKind::Int;
  std::int64_t i = 0;
  double r = 0.0;

  static Value boolean(bool b) { return Value{ValueKind::Bool, b ? 1 : 0, b ? 1.0 : 0.0}; }
  static Value integer(std::int64_t v) { return Value{ValueKind::Int, v, static_cast<double>(v)}; }
  static Value real(double v) { return Value{ValueKind::Real, 0, v}; }

  double as_real() const { return kind == ValueKind::Real ? r : static_cast<double>(i); }
  bool truthy() const { return kind == ValueKind::Real ? r != 0.0 : i != 0; }
  std::int64_t as_int() const;

  bool operator==(const Value &o) const {
    if (kind != o.kind) return false;
    return kind == ValueKind::Real ? r == o.r : i == o.i;
  }
};

inline std::int64_t Value::as_int() const {
  if (kind != ValueKind::Real) return i;
  throw EvalError("real value used where an integer is required");
}

/// Converts `v` to the declared kind of a variable on assignment.
/// Reals are not silently truncated into ints.
Value coerce(const Value &v, ValueKind target);

std::string to_string(const Value &v);
/// Shortest text that reads back as exactly `v`.
std::string format_real(double v);
const char *kind_name(ValueKind k);

} // namespace stasmc
