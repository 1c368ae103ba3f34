#include "nlmarkov/lyapunov.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "nlmarkov/quadrature.hpp"
#include "nlmarkov/rng.hpp"

namespace nlmarkov {

namespace {

constexpr Scalar kInteriorFloor = 1e-6;

void validate_candidate(const LyapunovCandidate& J, Eigen::Index d) {
    std::mt19937_64 rng = make_stream(0xCAFE, 5);
    for (int k = 0; k < 25; ++k) {
        SimplexPoint r = random_simplex_point(rng, d, kInteriorFloor);
        Scalar v = J(r.weights());
        require(std::isfinite(v), ErrorCode::InvalidParameters,
                "candidate value is not finite on the interior");
    }
    if (!J.has_analytic_gradient()) return;
    // The entropy term makes finite differences degrade near the boundary, so
    // the agreement check samples at the working grid margin.
    for (int k = 0; k < 25; ++k) {
        SimplexPoint r = random_simplex_point(rng, d, 0.02);
        Vector analytic = J.gradient(r).components();
        Vector fd = tangent_gradient(J.field(), r, J.fd_step()).components();
        require((analytic - fd).lpNorm<Eigen::Infinity>() <= 1e-6, ErrorCode::InvalidParameters,
                "analytic gradient of candidate disagrees with finite differences");
    }
}

}  // namespace

LyapunovCandidate::LyapunovCandidate(CandidateKind kind, std::string description, ScalarField value,
                                     std::function<Vector(const Vector&)> analytic_gradient,
                                     Scalar fd_step)
    : kind_(kind),
      description_(std::move(description)),
      value_(std::move(value)),
      analytic_gradient_(std::move(analytic_gradient)),
      fd_step_(fd_step) {}

TangentVector LyapunovCandidate::gradient(const SimplexPoint& r) const {
    if (analytic_gradient_) return TangentVector(project_onto_tangent(analytic_gradient_(r.weights())));
    return tangent_gradient(value_, r, fd_step_);
}

LyapunovCandidate make_relative_entropy_candidate(const SimplexPoint& pi) {
    require(pi.is_interior(), ErrorCode::InvalidParameters,
            "relative entropy reference must be interior");
    Vector log_pi = pi.weights().array().log().matrix();
    ScalarField value = [log_pi](const Vector& r) {
        Scalar acc = 0.0;
        for (Eigen::Index x = 0; x < r.size(); ++x)
            if (r(x) > 0.0) acc += r(x) * (std::log(r(x)) - log_pi(x));
        return acc;
    };
    auto gradient = [log_pi](const Vector& r) {
        return Vector((r.array().log() - log_pi.array() + 1.0).matrix());
    };
    LyapunovCandidate J(CandidateKind::RelativeEntropy, "relative entropy", std::move(value),
                        std::move(gradient));
    validate_candidate(J, pi.dim());
    return J;
}

LyapunovCandidate make_free_energy_candidate(const RateFamily& model) {
    require(model.has_gibbs_structure(), ErrorCode::InvalidParameters,
            "free energy requires a Gibbs model");
    GibbsStructure gibbs = model.gibbs_structure();
    ScalarField value = [gibbs](const Vector& r) {
        Vector k = gibbs.K(r);
        Scalar acc = 0.0;
        for (Eigen::Index x = 0; x < r.size(); ++x)
            acc += (k(x) + (r(x) > 0.0 ? std::log(r(x)) : 0.0)) * r(x);
        return acc;
    };
    auto gradient = [gibbs](const Vector& r) {
        return Vector((r.array().log() + 1.0).matrix() + gibbs.H(r));
    };
    LyapunovCandidate J(CandidateKind::GibbsFreeEnergy, "free energy of " + model.label(),
                        std::move(value), std::move(gradient));
    validate_candidate(J, model.dim());
    return J;
}

LyapunovCandidate make_locally_gibbs_candidate(const RateFamily& model) {
    require(model.has_analytic_potential(), ErrorCode::InvalidParameters,
            "model carries no closed-form potential");
    PotentialField u = model.analytic_potential();
    ScalarField value = [u](const Vector& r) {
        Scalar acc = u.value(r);
        for (Eigen::Index x = 0; x < r.size(); ++x)
            if (r(x) > 0.0) acc += r(x) * std::log(r(x));
        return acc;
    };
    auto gradient = [u](const Vector& r) {
        return Vector((r.array().log() + 1.0).matrix() + u.gradient(r));
    };
    LyapunovCandidate J(CandidateKind::LocallyGibbsJ, "locally Gibbs J of " + model.label(),
                        std::move(value), std::move(gradient));
    validate_candidate(J, model.dim());
    return J;
}

LyapunovCandidate make_zero_candidate(Eigen::Index d) {
    LyapunovCandidate J(CandidateKind::Custom, "zero", [](const Vector&) { return 0.0; },
                        [d](const Vector&) { return Vector(Vector::Zero(d)); });
    validate_candidate(J, d);
    return J;
}

LyapunovCandidate make_custom_candidate(Eigen::Index d, ScalarField value, std::string description,
                                        std::function<Vector(const Vector&)> gradient) {
    LyapunovCandidate J(CandidateKind::Custom, std::move(description), std::move(value),
                        std::move(gradient));
    validate_candidate(J, d);
    return J;
}

// ---------------------------------------------------------------------------
// Scalar functionals
// ---------------------------------------------------------------------------

Scalar relative_entropy(const SimplexPoint& p, const SimplexPoint& q) {
    require(p.dim() == q.dim(), ErrorCode::InvalidInput, "dimension mismatch");
    Scalar acc = 0.0;
    for (Eigen::Index x = 0; x < p.dim(); ++x) {
        if (p[x] == 0.0) continue;
        require(q[x] > 0.0, ErrorCode::SupportViolation,
                "p charges a state with zero mass under q");
        acc += p[x] * std::log(p[x] / q[x]);
    }
    return std::max(acc, 0.0);
}

Scalar gibbs_free_energy(const std::function<Vector(const Vector&)>& K, const SimplexPoint& r) {
    require(r.min_coeff() >= 1e-12, ErrorCode::BoundaryProximity,
            "free energy needs an interior point");
    Vector k = K(r.weights());
    Scalar acc = 0.0;
    for (Eigen::Index x = 0; x < r.dim(); ++x) acc += (k(x) + std::log(r[x])) * r[x];
    return acc;
}

Scalar gibbs_free_energy(const RateFamily& model, const SimplexPoint& r) {
    require(model.has_gibbs_structure(), ErrorCode::InvalidParameters,
            "free energy requires a Gibbs model");
    return gibbs_free_energy(model.gibbs_structure().K, r);
}

Scalar locally_gibbs_J(const ScalarField& U, const SimplexPoint& r) {
    require(r.min_coeff() >= 1e-12, ErrorCode::BoundaryProximity, "J needs an interior point");
    Scalar acc = U(r.weights());
    for (Eigen::Index x = 0; x < r.dim(); ++x) acc += r[x] * std::log(r[x]);
    return acc;
}

Scalar ggibbs_potential(const std::function<Vector(const Vector&)>& K,
                        const std::vector<std::function<Scalar(Scalar)>>& R,
                        const SimplexPoint& r) {
    require(static_cast<Eigen::Index>(R.size()) == r.dim(), ErrorCode::InvalidParameters,
            "need one 1-D field R_z per state");
    Scalar acc = K(r.weights()).dot(r.weights());
    for (Eigen::Index z = 0; z < r.dim(); ++z)
        acc += integrate(R[static_cast<std::size_t>(z)], 0.0, r[z]);
    return acc;
}

// ---------------------------------------------------------------------------
// Positive definiteness probe
// ---------------------------------------------------------------------------

PositiveDefinitenessReport positive_definiteness_probe(const LyapunovCandidate& J,
                                                       const SimplexPoint& pi_star, Scalar radius,
                                                       int samples, std::uint64_t seed) {
    require(pi_star.is_interior(), ErrorCode::InvalidParameters, "pi_star must be interior");
    // The ball is intersected with the simplex, so it may poke outside.
    require(radius > 0.0 && radius < 1.0, ErrorCode::InvalidParameters,
            "radius must lie in (0, 1)");
    require(samples >= 10, ErrorCode::InvalidParameters, "need at least 10 samples");

    const Eigen::Index d = pi_star.dim();
    std::mt19937_64 rng = make_stream(seed, 13);
    std::uniform_real_distribution<Scalar> unif(0.0, 1.0);

    const Scalar center_value = J(pi_star.weights());
    PositiveDefinitenessReport report;
    report.samples = samples;
    report.radius = radius;
    report.minimum_ok = true;

    std::vector<Vector> points;
    std::vector<Scalar> values;
    Scalar max_value = center_value;
    for (int k = 0; k < samples; ++k) {
        // Uniform draw from the radius ball of H0 around pi*.
        Vector dir = random_tangent_vector(rng, d, 1.0).components();
        Scalar rho = radius * std::pow(unif(rng), 1.0 / static_cast<Scalar>(std::max<Eigen::Index>(d - 1, 1)));
        Vector p = pi_star.weights() + rho * dir;
        if (p.minCoeff() <= 1e-9) continue;
        Scalar v = J(p);
        points.push_back(p);
        values.push_back(v);
        max_value = std::max(max_value, v);
        if ((p - pi_star.weights()).lpNorm<1>() > 1e-12 && v <= center_value) {
            report.minimum_ok = false;
            report.witnesses.push_back(p);
        }
    }

    // Sublevel radii across 10 evenly spaced levels above J(pi*).
    report.shrinkage_ok = true;
    Scalar prev_radius = 0.0;
    for (int level = 1; level <= 10; ++level) {
        Scalar K = center_value + (max_value - center_value) * static_cast<Scalar>(level) / 10.0;
        Scalar level_radius = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (values[i] <= K)
                level_radius = std::max(level_radius, (points[i] - pi_star.weights()).norm());
        report.level_values.push_back(K);
        report.level_radii.push_back(level_radius);
        if (level_radius + 1e-15 < prev_radius) report.shrinkage_ok = false;
        prev_radius = std::max(prev_radius, level_radius);
    }
    report.pass = report.minimum_ok && report.shrinkage_ok;
    return report;
}

// ---------------------------------------------------------------------------
// Descent check
// ---------------------------------------------------------------------------

DescentReport descent_check(const LyapunovCandidate& J, const RateFamily& model,
                            const Trajectory& traj, const SimplexPoint& pi_star, Scalar eps) {
    require(!traj.points.empty(), ErrorCode::InvalidInput, "empty trajectory");
    for (const auto& p : traj.points)
        require(p.min_coeff() >= 1e-8, ErrorCode::BoundaryProximity,
                "trajectory leaves the interior of the simplex");

    DescentReport report;
    report.trajectory_label = traj.model_label;
    report.epsilon_ball = eps;
    report.samples.reserve(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const SimplexPoint& p = traj.points[k];
        DescentSample s;
        s.t = traj.times[k];
        s.value = J(p.weights());
        Vector grad = J.gradient(p).components();
        Vector beta = vector_field(model, p).components();
        s.orbital_derivative = grad.dot(beta);
        if (k + 1 < traj.size()) s.discrete_difference = J(traj.points[k + 1].weights()) - s.value;
        bool outside = (p.weights() - pi_star.weights()).lpNorm<1>() > eps;
        if (outside && s.orbital_derivative > -report.margin) ++report.violations;
        report.samples.push_back(s);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Potential existence test
// ---------------------------------------------------------------------------

namespace {

// Stationary law at an arbitrary interior vector, preferring the closed form.
Vector stationary_at(const RateFamily& model, const Vector& r) {
    if (model.has_analytic_stationary()) return model.analytic_stationary(r).weights();
    return stationary_distribution(model(r)).weights();
}

// Value of the log-ratio 1-form at r on tangent direction v, assembled from
// the canonical edge decomposition v = sum_k s_k (e_{k+1} - e_k).
Scalar one_form(const RateFamily& model, const Vector& r, const Vector& v) {
    Vector pi = stationary_at(model, r);
    Vector log_pi = pi.array().log().matrix();
    Scalar acc = 0.0;
    Scalar partial = 0.0;
    for (Eigen::Index k = 0; k + 1 < r.size(); ++k) {
        partial -= v(k);  // s_k = -sum_{j<=k} v_j
        acc += partial * (log_pi(k) - log_pi(k + 1));
    }
    return acc;
}

}  // namespace

PotentialExistenceReport potential_existence_test(const RateFamily& model, const SimplexGrid& grid,
                                                  Scalar h) {
    require(h > 0.0, ErrorCode::InvalidParameters, "step must be positive");
    require(grid.margin >= 2.0 * h, ErrorCode::BoundaryProximity,
            "grid margin must be at least twice the probe step");
    const Eigen::Index d = model.dim();
    require(!grid.points.empty() && grid.points.front().dim() == d, ErrorCode::InvalidParameters,
            "grid dimension mismatch");

    // Canonical edge directions e_y - e_x, x < y.
    std::vector<Vector> dirs;
    for (Eigen::Index x = 0; x < d; ++x)
        for (Eigen::Index y = x + 1; y < d; ++y) {
            Vector v = Vector::Zero(d);
            v(x) = -1.0;
            v(y) = 1.0;
            dirs.push_back(v);
        }

    PotentialExistenceReport report;
    report.worst_point = grid.points.front().weights();
    for (const auto& point : grid.points) {
        const Vector& r = point.weights();
        // Central derivative of omega(.)(v) along direction u, for all pairs.
        std::vector<std::vector<Scalar>> deriv(dirs.size(), std::vector<Scalar>(dirs.size(), 0.0));
        for (std::size_t iu = 0; iu < dirs.size(); ++iu) {
            Vector plus = r + h * dirs[iu];
            Vector minus = r - h * dirs[iu];
            for (std::size_t iv = 0; iv < dirs.size(); ++iv)
                deriv[iu][iv] =
                    (one_form(model, plus, dirs[iv]) - one_form(model, minus, dirs[iv])) / (2.0 * h);
        }
        for (std::size_t iu = 0; iu < dirs.size(); ++iu)
            for (std::size_t iv = iu + 1; iv < dirs.size(); ++iv) {
                Scalar asym = std::abs(deriv[iu][iv] - deriv[iv][iu]);
                if (asym > report.max_asymmetry) {
                    report.max_asymmetry = asym;
                    report.worst_point = r;
                }
            }
    }
    report.pass = report.max_asymmetry <= report.threshold;
    if (!report.pass) return report;

    // Closedness certified; reconstruct U by integrating the 1-form along the
    // straight segment from the barycenter to each grid point.
    const Vector center = Vector::Constant(d, 1.0 / static_cast<Scalar>(d));
    // 7-point Gauss-Legendre nodes/weights on [0,1], composited over panels.
    static const Scalar nodes[7] = {0.0254460438286207377369052, 0.1292344072003027800680676,
                                    0.2970774243113014165466968, 0.5,
                                    0.7029225756886985834533032, 0.8707655927996972199319324,
                                    0.9745539561713792622630948};
    static const Scalar weights[7] = {0.0647424830844348466353057, 0.1398526957446383339507339,
                                      0.1909150252525594724751849, 0.2089795918367346938775510,
                                      0.1909150252525594724751849, 0.1398526957446383339507339,
                                      0.0647424830844348466353057};
    const int panels = 16;
    report.reconstructed_potential.reserve(grid.points.size());
    for (const auto& point : grid.points) {
        Vector delta = point.weights() - center;
        Scalar integral = 0.0;
        for (int p = 0; p < panels; ++p) {
            Scalar a = static_cast<Scalar>(p) / panels;
            for (int q = 0; q < 7; ++q) {
                Scalar s = a + nodes[q] / panels;
                integral += weights[q] / panels * one_form(model, center + s * delta, delta);
            }
        }
        report.reconstructed_potential.push_back(integral);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Slow adaptation bounds
// ---------------------------------------------------------------------------

SlowAdaptationBoundReport slow_adaptation_bounds(const RateFamily& model,
                                                 const SimplexPoint& pi_star, int samples) {
    RateMatrix frozen = model(pi_star);
    require(check_irreducible(frozen), ErrorCode::NotIrreducible,
            "Gamma(pi*) must be irreducible");
    Vector residual = frozen.entries().transpose() * pi_star.weights();
    require(residual.lpNorm<1>() <= 1e-10, ErrorCode::NotFixedPoint,
            "pi_star is not a fixed point of the flow");

    const Eigen::Index d = pi_star.dim();
    SlowAdaptationBoundReport report;
    report.pi_star_min = pi_star.min_coeff();

    Scalar gamma_min = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index y = 0; y < d; ++y)
        for (Eigen::Index x = 0; x < d; ++x)
            if (x != y && frozen(y, x) > 0.0) gamma_min = std::min(gamma_min, frozen(y, x));
    report.gamma_min = gamma_min;

    report.lipschitz_C = lipschitz_estimate(model, samples, 0x10ad).value;

    // Quadratic form r -> sum_{x != y} pi*_y (r_y/pi*_y - r_x/pi*_x)^2
    // Gamma_yx(pi*), restricted to H0; c is half its smallest eigenvalue.
    Matrix form = Matrix::Zero(d, d);
    for (Eigen::Index y = 0; y < d; ++y)
        for (Eigen::Index x = 0; x < d; ++x) {
            if (x == y || frozen(y, x) <= 0.0) continue;
            Vector u = Vector::Zero(d);
            u(y) = 1.0 / pi_star[y];
            u(x) = -1.0 / pi_star[x];
            form += pi_star[y] * frozen(y, x) * (u * u.transpose());
        }
    Matrix basis = helmert_basis(d);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(basis.transpose() * form * basis);
    report.quadratic_c = 0.5 * eig.eigenvalues().minCoeff();

    const Scalar C = report.lipschitz_C;
    if (C <= 1e-15) {
        report.lambda_1 = 1.0;
        report.lambda_2 = 1.0;
    } else {
        report.lambda_1 = std::min(report.gamma_min / (16.0 * C), 1.0);
        report.lambda_2 = std::min(report.lambda_1, report.quadratic_c * report.pi_star_min / (8.0 * C));
    }
    require(report.lambda_1 > 0.0 && report.lambda_2 > 0.0, ErrorCode::InvalidParameters,
            "slow adaptation bounds collapsed to zero");
    return report;
}

}  // namespace nlmarkov
