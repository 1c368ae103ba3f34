#include "nlmarkov/simplex.hpp"

#include <cmath>

namespace nlmarkov {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

SimplexPoint::SimplexPoint(Vector weights) : w_(std::move(weights)) {
    require(w_.size() >= 1 && all_finite(w_), ErrorCode::InvalidInput,
            "simplex point must be a nonempty finite vector");
    Scalar lo = w_.minCoeff();
    require(lo >= -kSimplexSumTol, ErrorCode::InvalidInput,
            "simplex point has a negative coordinate beyond tolerance");
    if (lo < 0.0) w_ = w_.cwiseMax(0.0);
    Scalar s = w_.sum();
    require(std::abs(s - 1.0) <= 1e-8, ErrorCode::InvalidInput,
            "simplex point coordinates do not sum to 1");
    w_ /= s;
}

SimplexPoint SimplexPoint::uniform(Eigen::Index d) {
    require(d >= 1, ErrorCode::InvalidInput, "dimension must be positive");
    return SimplexPoint(Vector::Constant(d, 1.0 / static_cast<Scalar>(d)));
}

SimplexPoint SimplexPoint::from_nearby(Vector v) {
    require(v.size() >= 1 && all_finite(v), ErrorCode::InvalidInput,
            "expected a nonempty finite vector");
    v = v.cwiseMax(0.0);
    Scalar s = v.sum();
    require(s > 0.0, ErrorCode::InvalidInput, "vector has no positive mass");
    SimplexPoint p;
    p.w_ = v / s;
    return p;
}

TangentVector::TangentVector(Vector components) : v_(std::move(components)) {
    require(v_.size() >= 1 && all_finite(v_), ErrorCode::InvalidInput,
            "tangent vector must be a nonempty finite vector");
    require(std::abs(v_.sum()) <= 1e-12 * std::max(1.0, v_.lpNorm<1>()), ErrorCode::InvalidInput,
            "tangent vector coordinates must sum to 0");
}

TangentVector tangent_project(const Vector& v) {
    require(v.size() >= 1 && v.allFinite(), ErrorCode::InvalidInput,
            "projection input must be finite");
    return TangentVector(project_onto_tangent(v));
}

Matrix helmert_basis(Eigen::Index d) {
    require(d >= 2, ErrorCode::InvalidInput, "basis needs dimension >= 2");
    Matrix basis = Matrix::Zero(d, d - 1);
    for (Eigen::Index k = 0; k < d - 1; ++k) {
        Scalar norm = std::sqrt(static_cast<Scalar>((k + 1) * (k + 2)));
        for (Eigen::Index i = 0; i <= k; ++i) basis(i, k) = 1.0 / norm;
        basis(k + 1, k) = -static_cast<Scalar>(k + 1) / norm;
    }
    return basis;
}

TangentVector tangent_gradient(const ScalarField& f, const SimplexPoint& r, Scalar h) {
    require(h > 0.0, ErrorCode::InvalidInput, "finite difference step must be positive");
    require(r.min_coeff() >= 2.0 * h, ErrorCode::BoundaryProximity,
            "point too close to the simplex boundary for the requested step");
    const Eigen::Index d = r.dim();
    const Matrix basis = helmert_basis(d);
    const Vector& rw = r.weights();
    Vector grad = Vector::Zero(d);
    for (Eigen::Index k = 0; k < d - 1; ++k) {
        Vector dir = basis.col(k);
        Scalar df = (f(rw + h * dir) - f(rw - h * dir)) / (2.0 * h);
        grad += df * dir;
    }
    return TangentVector(project_onto_tangent(grad));
}

TangentVector tangent_gradient(const ScalarField& f, const SimplexPoint& r) {
    return tangent_gradient(f, r, default_fd_step(r.weights()));
}

SimplexGrid interior_grid(Eigen::Index d, int resolution, Scalar margin) {
    require(d >= 2, ErrorCode::InvalidParameters, "grid needs dimension >= 2");
    require(resolution >= 1, ErrorCode::InvalidParameters, "grid resolution must be >= 1");
    require(margin >= 0.0 && margin * static_cast<Scalar>(d) < 1.0, ErrorCode::InvalidParameters,
            "grid margin must satisfy margin * d < 1");

    SimplexGrid grid;
    grid.resolution = resolution;
    grid.margin = margin;

    // Depth-first enumeration of compositions of `resolution` into d parts,
    // lexicographic in the resulting weight vector.
    std::vector<int> counts(static_cast<std::size_t>(d), 0);
    const Scalar res = static_cast<Scalar>(resolution);
    auto emit = [&]() {
        Vector w(d);
        for (Eigen::Index i = 0; i < d; ++i) w(i) = static_cast<Scalar>(counts[static_cast<std::size_t>(i)]) / res;
        if (w.minCoeff() >= margin) grid.points.push_back(SimplexPoint(std::move(w)));
    };
    std::function<void(Eigen::Index, int)> walk = [&](Eigen::Index pos, int remaining) {
        if (pos == d - 1) {
            counts[static_cast<std::size_t>(pos)] = remaining;
            emit();
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            counts[static_cast<std::size_t>(pos)] = k;
            walk(pos + 1, remaining - k);
        }
    };
    walk(0, resolution);

    require(!grid.points.empty(), ErrorCode::InvalidParameters,
            "grid parameters leave no lattice point inside the margin");
    return grid;
}

}  // namespace nlmarkov
