#pragma once

// Geometry of the probability simplex: the simplex S, its interior, the
// tangent hyperplane H0 = {v : sum v = 0}, and differentiation along H0.

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "nlmarkov/errors.hpp"

namespace nlmarkov {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Scalar field evaluatable on a neighborhood of the simplex inside the
// hyperplane {sum = 1}. Raw vectors rather than SimplexPoint so finite
// difference probes slightly off the simplex are representable.
using ScalarField = std::function<Scalar(const Vector&)>;

inline constexpr Scalar kSimplexSumTol = 1e-12;

// Orthogonal projection onto H0: v - mean(v) * 1. Works on any Eigen
// expression of a vector.
template <typename Derived>
Vector project_onto_tangent(const Eigen::MatrixBase<Derived>& v) {
    Vector out = v;
    out.array() -= out.mean();
    return out;
}

// Probability vector on {1..d}. Components are clamped (only within
// [-1e-12, 0)) and renormalized on construction; anything further outside
// the simplex is rejected.
class SimplexPoint {
  public:
    explicit SimplexPoint(Vector weights);

    static SimplexPoint uniform(Eigen::Index d);
    // Clamps any negative coordinate to zero and renormalizes; for points
    // produced by integrators or samplers that drift at roundoff scale.
    static SimplexPoint from_nearby(Vector v);

    const Vector& weights() const noexcept { return w_; }
    operator const Vector&() const noexcept { return w_; }
    Scalar operator[](Eigen::Index i) const { return w_(i); }
    Eigen::Index dim() const noexcept { return w_.size(); }
    Scalar min_coeff() const { return w_.minCoeff(); }
    bool is_interior(Scalar margin = 0.0) const { return w_.minCoeff() > margin; }

  private:
    SimplexPoint() = default;
    Vector w_;
};

// Element of H0: a signed mass flux. Checked on construction.
class TangentVector {
  public:
    explicit TangentVector(Vector components);

    const Vector& components() const noexcept { return v_; }
    operator const Vector&() const noexcept { return v_; }
    Scalar operator[](Eigen::Index i) const { return v_(i); }
    Eigen::Index dim() const noexcept { return v_.size(); }
    Scalar norm_l1() const { return v_.lpNorm<1>(); }

  private:
    Vector v_;
};

struct SimplexGrid {
    std::vector<SimplexPoint> points;
    int resolution = 0;
    Scalar margin = 0.0;

    std::size_t size() const noexcept { return points.size(); }
};

// v - mean(v) * 1, as a checked TangentVector. Linear, idempotent,
// annihilates the constant vector.
TangentVector tangent_project(const Vector& v);

// Deterministic orthonormal basis of H0, one Helmert column per dimension.
// Column k has k+1 leading entries 1/sqrt((k+1)(k+2)) followed by
// -(k+1)/sqrt((k+1)(k+2)).
Matrix helmert_basis(Eigen::Index d);

inline Scalar default_fd_step(const Vector& r) {
    return 1e-5 * std::max(1.0, r.lpNorm<Eigen::Infinity>());
}

// Central finite differences of f along the Helmert basis of H0, assembled
// as sum_i <Df, h_i> h_i and re-projected. r must stay at least 2h from the
// boundary so every probe point remains in the simplex.
TangentVector tangent_gradient(const ScalarField& f, const SimplexPoint& r, Scalar h);
TangentVector tangent_gradient(const ScalarField& f, const SimplexPoint& r);

// Lattice points {k/resolution} of the simplex with all coordinates >= margin,
// enumerated in lexicographic order of the weight vector. Stable across runs.
SimplexGrid interior_grid(Eigen::Index d, int resolution, Scalar margin);

}  // namespace nlmarkov
