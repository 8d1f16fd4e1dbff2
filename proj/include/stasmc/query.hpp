#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stasmc/expr.hpp"

namespace stasmc {

enum class PathKind : std::uint8_t { Eventually, Globally };

/// `<> phi` or `[] phi` over a bounded run.
struct PathFormula {
  PathKind kind = PathKind::Eventually;
  Expr state;
};

enum class Relation : std::uint8_t { AtLeast, AtMost };
enum class ExtremumMode : std::uint8_t { Max, Min };

/// Pr[<=bound](path)
struct EstimateQuery {
  PathFormula path;
  double bound = 0.0;
};

/// Pr[<=bound](path) >= p0   (or <= p0)
struct HypothesisQuery {
  PathFormula path;
  double bound = 0.0;
  double p0 = 0.0;
  Relation relation = Relation::AtLeast;
};

/// simulate N [<=bound] {e1, ..., ek}
struct SimulateQuery {
  long long runs = 1;
  double bound = 0.0;
  std::vector<Expr> exprs;
  double sample_step = 1.0; // set from the command line, not the query text
};

/// Pr[<=b1](f1) >= Pr[<=b2](f2)
struct CompareQuery {
  PathFormula left;
  double left_bound = 0.0;
  PathFormula right;
  double right_bound = 0.0;
};

/// E[<=bound; N](max: expr)
struct ExpectedQuery {
  double bound = 0.0;
  long long runs = 1;
  ExtremumMode mode = ExtremumMode::Max;
  Expr expr;
};

using Query =
    std::variant<EstimateQuery, HypothesisQuery, SimulateQuery, CompareQuery, ExpectedQuery>;

/// Verdict names shared by expectations and results.
enum class Verdict : std::uint8_t { Valid, Invalid, EstimateOnly, Undecided };
const char *to_string(Verdict v);
std::optional<Verdict> parse_verdict(const std::string &s);

/// What a requirement is expected to produce: a verdict, or a range the
/// point estimate (or the whole confidence interval) must fall into.
struct Expectation {
  std::optional<Verdict> verdict;
  std::optional<std::pair<double, double>> range;
};

struct NamedQuery {
  std::string name; // empty when the line had no `Name:` prefix
  Query query;
  std::optional<Expectation> expected;
  SourceSpan span;
};

double query_bound(const Query &q);
std::string to_string(const PathFormula &f);
std::string to_string(const Query &q);
bool same_structure(const Query &a, const Query &b);

} // namespace stasmc
