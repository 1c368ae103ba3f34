#pragma once

// Closed-form expression grammar for function-valued model parameters.
// Supported: numeric literals, coordinates r1..r99, the 1-D argument w,
// + - * / ^, unary minus, exp, log, sqrt, and parentheses. Parsed once at
// model load; evaluation is allocation-free. Partial derivatives are exact
// (symbolic), which is what makes analytic potential gradients possible for
// expression-backed models.

#include <memory>
#include <string>

#include "nlmarkov/simplex.hpp"

namespace nlmarkov {

class Expression {
  public:
    // Throws InvalidParameters on syntax errors or unknown identifiers.
    static Expression parse(const std::string& text);

    // Evaluate with coordinates r (may be empty when only w is used) and
    // 1-D argument w (ignored unless the expression references it).
    Scalar eval(const Vector& r, Scalar w = 0.0) const;
    Scalar eval1d(Scalar w) const { return eval(Vector(), w); }

    // Exact partial derivative with respect to r_{index} (0-based) or w.
    Expression derivative_r(Eigen::Index index) const;
    Expression derivative_w() const;

    bool uses_w() const;
    // Largest coordinate index referenced, 0 when none (r1 -> 1, r3 -> 3).
    Eigen::Index max_coordinate() const;

    const std::string& text() const { return text_; }

    struct Node;

  private:
    explicit Expression(std::shared_ptr<const Node> root, std::string text);
    std::shared_ptr<const Node> root_;
    std::string text_;
};

}  // namespace nlmarkov
