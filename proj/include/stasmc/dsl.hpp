#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stasmc/constraint.hpp"
#include "stasmc/model.hpp"
#include "stasmc/query.hpp"

namespace stasmc {

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string &msg, SourceSpan span, std::vector<std::string> expected);

  const SourceSpan &span() const { return span_; }
  const std::vector<std::string> &expected() const { return expected_; }

private:
  SourceSpan span_;
  std::vector<std::string> expected_;
};

/// Contents of a query file: named queries, weakly-hard constraint
/// definitions, and expected outcomes.
struct QueryFile {
  std::vector<NamedQuery> queries;
  std::vector<WhConstraint> constraints;
};

Model parse_model(std::string_view text, const std::string &file = "");

/// One NamedQuery per non-comment query line. Constraint and expectation
/// lines are accepted and ignored here; use parse_query_file to get them.
std::vector<NamedQuery> parse_queries(std::string_view text, const std::string &file = "");
QueryFile parse_query_file(std::string_view text, const std::string &file = "");

Query parse_query(std::string_view text);
Expr parse_expr(std::string_view text);

std::string print_model(const Model &model);
std::string print_query_file(const QueryFile &file);
std::string to_string(const WhConstraint &c);

bool same_structure(const Model &a, const Model &b);

} // namespace stasmc
