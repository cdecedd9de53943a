#pragma once

#include "folcoil/field.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace folcoil {

/// Parse failure; offset is the byte position of the offending token.
class ExprError : public DomainError {
 public:
  ExprError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Arithmetic expression over the chart coordinates.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?          (right-associative)
///   primary := number | name | func '(' expr ')' | '(' expr ')'
///
/// Names: x, y, z, y1..y3, q1..q3, t, and the constant pi.
/// Functions: sin, cos, exp, log, sech, tanh.
class ExprAst {
 public:
  enum class Kind { Number, Variable, Negate, Function, Binary };

  struct Node {
    Kind kind = Kind::Number;
    double value = 0;  // Number
    std::string name;  // Variable or Function
    char op = 0;       // Binary: + - * / ^
    std::shared_ptr<const Node> lhs, rhs;  // Negate and Function use lhs
  };

  ExprAst() = default;
  explicit ExprAst(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

  const Node& root() const { return *root_; }
  bool empty() const { return !root_; }

  /// Canonical text with minimal parentheses; parse(to_string()) is a fixed
  /// point of to_string.
  std::string to_string() const;

  /// Variable names referenced (pi excluded).
  std::set<std::string> variables() const;

  /// Value at one point; vars[i] binds names[i].
  double evaluate(const std::vector<std::string>& names, const std::vector<double>& vars) const;

 private:
  std::shared_ptr<const Node> root_;
};

ExprAst parse_expr(std::string_view text);

/// Throws unless every variable is a grid axis (or t when allow_time).
void check_expr(const ExprAst& e, const PeriodicGrid& grid, bool allow_time);

/// Samples the expression on the grid, with t bound to `time` when given.
/// Domain errors (log of a non-positive value, division by zero,
/// non-finite results) raise DomainError.
ScalarField evaluate_on_grid(const ExprAst& e, const PeriodicGrid& grid, std::optional<double> time = std::nullopt);

/// Splits a comma-separated list of expressions.
std::vector<ExprAst> parse_expr_list(std::string_view text);

}  // namespace folcoil
