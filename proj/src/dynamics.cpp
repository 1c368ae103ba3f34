#include "nlmarkov/dynamics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "nlmarkov/rng.hpp"

namespace nlmarkov {

namespace {

Vector field_at(const RateFamily& model, const Vector& p) {
    return model(p).entries().transpose() * p;
}

// One RK4 step with renormalization; throws StepTooLarge if the raw update
// leaves the simplex by more than `neg_tol`.
Vector rk4_step(const RateFamily& model, const Vector& p, Scalar dt, Scalar neg_tol) {
    Vector k1 = field_at(model, p);
    Vector k2 = field_at(model, p + 0.5 * dt * k1);
    Vector k3 = field_at(model, p + 0.5 * dt * k2);
    Vector k4 = field_at(model, p + dt * k3);
    Vector next = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    require(next.minCoeff() >= -neg_tol, ErrorCode::StepTooLarge,
            "integration step left the simplex; reduce dt");
    next = next.cwiseMax(0.0);
    next /= next.sum();
    return next;
}

}  // namespace

const char* to_string(Stability s) noexcept {
    switch (s) {
        case Stability::Stable: return "Stable";
        case Stability::Unstable: return "Unstable";
        case Stability::Inconclusive: return "Inconclusive";
    }
    return "Inconclusive";
}

SimplexPoint stationary_distribution(const RateMatrix& gamma) {
    require(check_irreducible(gamma), ErrorCode::NotIrreducible,
            "generator is not irreducible");
    const Eigen::Index d = gamma.dim();
    Matrix a = gamma.entries().transpose();
    a.row(0).setOnes();
    Vector b = Vector::Zero(d);
    b(0) = 1.0;
    Eigen::PartialPivLU<Matrix> lu(a);
    Vector pi = lu.solve(b);
    // One round of iterative refinement keeps the balance residual at
    // roundoff even for stiff rate scales.
    pi += lu.solve(b - a * pi);
    require(pi.allFinite() && pi.minCoeff() > 0.0, ErrorCode::SolverSingular,
            "stationary solve failed or produced a boundary law");
    pi /= pi.sum();
    Scalar residual = (gamma.entries().transpose() * pi).lpNorm<1>();
    require(residual <= 1e-12 * std::max(1.0, gamma.entries().cwiseAbs().maxCoeff()),
            ErrorCode::SolverSingular, "stationary residual did not reach tolerance");
    return SimplexPoint(std::move(pi));
}

TangentVector vector_field(const RateFamily& model, const SimplexPoint& r) {
    return TangentVector(field_at(model, r.weights()));
}

Trajectory integrate_ode(const RateFamily& model, const SimplexPoint& p0, Scalar t_end, Scalar dt,
                         const IntegrateOptions& opts) {
    require(dt > 0.0, ErrorCode::InvalidParameters, "dt must be positive");
    require(t_end >= 0.0, ErrorCode::InvalidParameters, "t_end must be nonnegative");
    require(opts.record_every >= 1, ErrorCode::InvalidParameters, "record_every must be >= 1");

    Trajectory traj;
    traj.model_label = model.label();
    const long steps = static_cast<long>(std::ceil(t_end / dt - 1e-12));
    traj.times.reserve(static_cast<std::size_t>(steps / opts.record_every) + 2);
    traj.points.reserve(traj.times.capacity());
    traj.times.push_back(0.0);
    traj.points.push_back(p0);

    Vector p = p0.weights();
    for (long k = 0; k < steps; ++k) {
        Scalar step = std::min(dt, t_end - static_cast<Scalar>(k) * dt);
        p = rk4_step(model, p, step, opts.negative_tolerance);
        if ((k + 1) % opts.record_every == 0 || k + 1 == steps) {
            traj.times.push_back(std::min(static_cast<Scalar>(k + 1) * dt, t_end));
            traj.points.push_back(SimplexPoint::from_nearby(p));
        }
    }
    return traj;
}

namespace {

// Jacobian of the vector field restricted to H0, expressed in the Helmert
// basis, by central finite differences.
Matrix restricted_jacobian(const RateFamily& model, const Vector& p) {
    const Eigen::Index d = p.size();
    const Matrix basis = helmert_basis(d);
    const Scalar eps = 1e-6;
    Matrix jac(d - 1, d - 1);
    for (Eigen::Index j = 0; j < d - 1; ++j) {
        Vector fp = field_at(model, p + eps * basis.col(j));
        Vector fm = field_at(model, p - eps * basis.col(j));
        Vector column = (fp - fm) / (2.0 * eps);
        jac.col(j) = basis.transpose() * column;
    }
    return jac;
}

struct PicardResult {
    Vector point;
    bool converged = false;
};

PicardResult damped_picard(const RateFamily& model, Vector p, const FixedPointSearchOptions& opts) {
    PicardResult res;
    for (int it = 0; it < opts.max_iterations; ++it) {
        Vector pi = stationary_distribution(model(p)).weights();
        Scalar gap = (p - pi).lpNorm<1>();
        if (gap <= opts.tolerance) {
            res.point = pi;
            res.converged = true;
            return res;
        }
        p = (1.0 - opts.picard_damping) * p + opts.picard_damping * pi;
    }
    res.point = p;
    return res;
}

// Newton polish on the H0-restricted residual g(p) = B^T (p Gamma(p)).
Vector newton_polish(const RateFamily& model, Vector p, Scalar tol) {
    const Eigen::Index d = p.size();
    const Matrix basis = helmert_basis(d);
    for (int it = 0; it < 50; ++it) {
        Vector residual = field_at(model, p);
        if (residual.lpNorm<1>() <= tol * 0.01) break;
        Matrix jac = restricted_jacobian(model, p);
        Vector rhs = basis.transpose() * residual;
        Eigen::FullPivLU<Matrix> lu(jac);
        if (!lu.isInvertible()) break;
        Vector step = basis * lu.solve(rhs);
        Vector next = p - step;
        if (next.minCoeff() <= 0.0 || !next.allFinite()) break;
        next /= next.sum();
        if ((next - p).lpNorm<1>() < 1e-16) break;
        p = next;
    }
    return p;
}

}  // namespace

std::vector<FixedPointReport> find_fixed_points(const RateFamily& model, int multistarts,
                                                std::uint64_t seed,
                                                const FixedPointSearchOptions& opts) {
    require(multistarts >= 1, ErrorCode::InvalidParameters, "multistarts must be >= 1");
    const Eigen::Index d = model.dim();

    std::vector<Vector> starts;
    if (d >= 2) {
        SimplexGrid grid = interior_grid(d, opts.grid_resolution, opts.grid_margin);
        for (const auto& p : grid.points) starts.push_back(p.weights());
    }
    std::mt19937_64 rng = make_stream(seed, 3);
    for (int k = 0; k < multistarts; ++k)
        starts.push_back(random_simplex_point(rng, d, 1e-3).weights());

    std::vector<Vector> found;
    for (const auto& start : starts) {
        PicardResult res = damped_picard(model, start, opts);
        if (!res.converged) continue;  // per-start failure is not fatal
        bool duplicate = false;
        for (const auto& q : found)
            duplicate = duplicate || (q - res.point).lpNorm<1>() <= opts.dedup_distance;
        if (!duplicate) found.push_back(res.point);
    }

    std::vector<FixedPointReport> reports;
    for (const auto& q : found) {
        Vector polished = newton_polish(model, q, opts.tolerance);
        FixedPointReport rep{SimplexPoint::from_nearby(polished), 0.0, Stability::Inconclusive, {}};
        rep.residual = field_at(model, rep.point.weights()).lpNorm<1>();
        Matrix jac = restricted_jacobian(model, rep.point.weights());
        Eigen::EigenSolver<Matrix> eig(jac);
        Scalar max_real = -std::numeric_limits<Scalar>::infinity();
        Scalar min_real = std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index i = 0; i < jac.rows(); ++i) {
            std::complex<Scalar> ev = eig.eigenvalues()(i);
            rep.jacobian_spectrum.push_back(ev);
            max_real = std::max(max_real, ev.real());
            min_real = std::min(min_real, ev.real());
        }
        if (max_real < -opts.classify_threshold) rep.classification = Stability::Stable;
        else if (max_real > opts.classify_threshold) rep.classification = Stability::Unstable;
        else rep.classification = Stability::Inconclusive;
        reports.push_back(std::move(rep));
    }

    // Stable presentation order: lexicographic on the coordinates.
    std::sort(reports.begin(), reports.end(), [](const FixedPointReport& a, const FixedPointReport& b) {
        return std::lexicographical_compare(
            a.point.weights().data(), a.point.weights().data() + a.point.dim(),
            b.point.weights().data(), b.point.weights().data() + b.point.dim());
    });
    return reports;
}

}  // namespace nlmarkov
