#pragma once

#include <memory>
#include <string>
#include <vector>

#include "marglp/grid.hpp"

// Closed-vocabulary expression evaluator for generating-function specs:
// polynomials in the axis variables, exp, abs, and indicator factors.
// Variables: x, y, z (axes 0..2) or x1..x9. Operators: + - * / and ^ with a
// numeric exponent. Functions: exp(e), abs(e), ind(var, lo, hi) which is 1
// when lo <= var < hi and 0 otherwise.

namespace marglp {

class Expr {
 public:
  virtual ~Expr() = default;
  virtual double eval(const std::vector<double>& point) const = 0;
  /// Largest axis index referenced, or -1 for constants.
  virtual int max_axis() const = 0;
};

using ExprPtr = std::unique_ptr<Expr>;

/// Parses `text`; throws ConfigError with a pointer to the offending token on
/// malformed input.
ExprPtr parse_expression(const std::string& text);

/// Samples a parsed expression on every grid node.
ScalarField evaluate_on_grid(const Expr& e, const GridSpec& grid);

/// One-dimensional convenience: evaluate in the single variable x at each node.
Eigen::ArrayXd evaluate_on_axis(const Expr& e, const Axis& axis);

}  // namespace marglp
