#include "nlmarkov/hamiltonian.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "nlmarkov/parallel.hpp"
#include "nlmarkov/rng.hpp"

namespace nlmarkov {

namespace {

constexpr Scalar kExponentGuard = 700.0;
constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

struct Edge {
    Eigen::Index x, y;
    Scalar rate;  // r_x Gamma_xy(r) > 0
};

std::vector<Edge> active_edges(const RateFamily& model, const Vector& r) {
    Matrix gamma = model(r).entries();
    const Eigen::Index d = gamma.rows();
    std::vector<Edge> edges;
    for (Eigen::Index x = 0; x < d; ++x) {
        if (r(x) <= 0.0) continue;
        for (Eigen::Index y = 0; y < d; ++y) {
            if (y == x) continue;
            Scalar c = r(x) * gamma(x, y);
            if (c > 0.0) edges.push_back({x, y, c});
        }
    }
    return edges;
}

// H over precomputed edges; +inf signals an exponent overflow.
Scalar eval_H(const std::vector<Edge>& edges, const Vector& alpha) {
    Scalar acc = 0.0;
    for (const Edge& e : edges) {
        Scalar expo = alpha(e.x) - alpha(e.y);
        if (expo > kExponentGuard) return kInf;
        acc -= e.rate * std::expm1(expo);
    }
    return acc;
}

Vector eval_H_gradient(const std::vector<Edge>& edges, const Vector& alpha, Eigen::Index d) {
    Vector g = Vector::Zero(d);
    for (const Edge& e : edges) {
        Scalar w = e.rate * std::exp(alpha(e.x) - alpha(e.y));
        g(e.y) += w;
        g(e.x) -= w;
    }
    return g;
}

Matrix eval_H_hessian(const std::vector<Edge>& edges, const Vector& alpha, Eigen::Index d) {
    Matrix h = Matrix::Zero(d, d);
    for (const Edge& e : edges) {
        Scalar w = e.rate * std::exp(alpha(e.x) - alpha(e.y));
        h(e.x, e.x) -= w;
        h(e.y, e.y) -= w;
        h(e.x, e.y) += w;
        h(e.y, e.x) += w;
    }
    return h;
}

}  // namespace

Scalar hamiltonian_H(const RateFamily& model, const SimplexPoint& r, const Vector& alpha) {
    require(alpha.size() == model.dim() && alpha.allFinite(), ErrorCode::InvalidInput,
            "alpha must be a finite vector of the model dimension");
    Scalar value = eval_H(active_edges(model, r.weights()), alpha);
    require(std::isfinite(value), ErrorCode::OverflowGuard,
            "Hamiltonian exponent exceeded 700; alpha is pathological");
    return value;
}

Vector hamiltonian_gradient(const RateFamily& model, const SimplexPoint& r, const Vector& alpha) {
    require(alpha.size() == model.dim() && alpha.allFinite(), ErrorCode::InvalidInput,
            "alpha must be a finite vector of the model dimension");
    return eval_H_gradient(active_edges(model, r.weights()), alpha, model.dim());
}

Scalar hamiltonian_second_derivative(const RateFamily& model, const SimplexPoint& r,
                                     const Vector& alpha, const Vector& w, Scalar rho) {
    Scalar acc = 0.0;
    for (const Edge& e : active_edges(model, r.weights())) {
        Scalar diff = w(e.y) - w(e.x);
        Scalar expo = (alpha(e.x) + rho * w(e.x)) - (alpha(e.y) + rho * w(e.y));
        acc -= diff * diff * std::exp(expo) * e.rate;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Dual ascent for L
// ---------------------------------------------------------------------------

Scalar lagrangian_L(const RateFamily& model, const SimplexPoint& r, const TangentVector& beta,
                    const LagrangianOptions& opts) {
    const Eigen::Index d = model.dim();
    require(beta.dim() == d, ErrorCode::InvalidInput, "beta dimension mismatch");
    const std::vector<Edge> edges = active_edges(model, r.weights());
    const Vector b = beta.components();

    // Reduced coordinates: alpha = (a, 0), a in R^{d-1}.
    auto embed = [d](const Vector& a) {
        Vector alpha = Vector::Zero(d);
        alpha.head(d - 1) = a;
        return alpha;
    };
    auto objective = [&](const Vector& a) {
        Vector alpha = embed(a);
        Scalar h = eval_H(edges, alpha);
        return std::isfinite(h) ? h - alpha.dot(b) : -kInf;
    };

    Vector a = Vector::Zero(d - 1);
    Scalar value = objective(a);
    for (int it = 0; it < opts.max_iterations; ++it) {
        Vector alpha = embed(a);
        Vector grad_full = eval_H_gradient(edges, alpha, d) - b;
        Vector grad = grad_full.head(d - 1);
        if (grad.lpNorm<Eigen::Infinity>() <= opts.gradient_tolerance)
            return std::max(value, 0.0);
        require(a.lpNorm<Eigen::Infinity>() <= opts.divergence_norm, ErrorCode::Infeasible,
                "dual ascent diverged; beta lies outside the effective domain of L");

        Matrix hess = eval_H_hessian(edges, alpha, d).topLeftCorner(d - 1, d - 1);
        // Newton direction on the concave objective; Levenberg damping covers
        // the singular cases (e.g. boundary r with inactive states).
        Vector step;
        Scalar damping = 0.0;
        for (;;) {
            Matrix m = -hess + damping * Matrix::Identity(d - 1, d - 1);
            Eigen::LDLT<Matrix> ldlt(m);
            if (ldlt.info() == Eigen::Success) {
                step = ldlt.solve(grad);
                if (step.allFinite() && step.dot(grad) > 0.0) break;
            }
            damping = damping == 0.0 ? 1e-10 : damping * 100.0;
            require(damping < 1e12, ErrorCode::Infeasible,
                    "dual ascent stalled on a degenerate Hessian");
        }

        // Quadratic zone: objective improvements fall below machine
        // resolution before the gradient meets the tolerance, so take the
        // raw Newton step as long as it contracts the gradient.
        if (grad.lpNorm<Eigen::Infinity>() <= 1e-6) {
            Vector trial = a + step;
            Vector trial_grad =
                (eval_H_gradient(edges, embed(trial), d) - b).head(d - 1);
            if (trial_grad.allFinite() &&
                trial_grad.lpNorm<Eigen::Infinity>() < grad.lpNorm<Eigen::Infinity>()) {
                a = trial;
                value = objective(a);
                continue;
            }
            return std::max(value, 0.0);  // at the floating-point optimum
        }

        Scalar t = 1.0;
        Scalar directional = grad.dot(step);
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            Vector trial = a + t * step;
            Scalar trial_value = objective(trial);
            if (std::isfinite(trial_value) &&
                (trial_value >= value + 0.3 * t * directional || trial_value > value)) {
                a = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // No numerical headroom left; the iterate is optimal to roundoff
            // when the gradient is already small, infeasible otherwise.
            require(grad.lpNorm<Eigen::Infinity>() <= 1e-6, ErrorCode::Infeasible,
                    "dual ascent line search failed; beta lies outside the effective domain of L");
            return std::max(value, 0.0);
        }
    }
    fail(ErrorCode::MaxIterations, "dual ascent did not converge within the iteration cap");
}

// ---------------------------------------------------------------------------
// Primal flow minimization for L
// ---------------------------------------------------------------------------

namespace {

// Shortest directed path between nodes over the active edge list (BFS on
// edge indices); empty when unreachable.
std::vector<std::size_t> shortest_path(const std::vector<Edge>& edges, Eigen::Index d,
                                       Eigen::Index from, Eigen::Index to) {
    std::vector<int> incoming(static_cast<std::size_t>(d), -1);
    std::vector<char> seen(static_cast<std::size_t>(d), 0);
    std::deque<Eigen::Index> queue{from};
    seen[static_cast<std::size_t>(from)] = 1;
    while (!queue.empty()) {
        Eigen::Index node = queue.front();
        queue.pop_front();
        if (node == to) break;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (edges[e].x != node || seen[static_cast<std::size_t>(edges[e].y)]) continue;
            seen[static_cast<std::size_t>(edges[e].y)] = 1;
            incoming[static_cast<std::size_t>(edges[e].y)] = static_cast<int>(e);
            queue.push_back(edges[e].y);
        }
    }
    if (!seen[static_cast<std::size_t>(to)]) return {};
    std::vector<std::size_t> path;
    for (Eigen::Index node = to; node != from;) {
        int e = incoming[static_cast<std::size_t>(node)];
        path.push_back(static_cast<std::size_t>(e));
        node = edges[static_cast<std::size_t>(e)].x;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace

Scalar lagrangian_L_primal(const RateFamily& model, const SimplexPoint& r,
                           const TangentVector& beta) {
    const Eigen::Index d = model.dim();
    require(beta.dim() == d, ErrorCode::InvalidInput, "beta dimension mismatch");
    const std::vector<Edge> edges = active_edges(model, r.weights());
    const std::size_t ne = edges.size();
    const Vector b = beta.components();
    if (ne == 0) {
        require(b.lpNorm<1>() <= 1e-14, ErrorCode::Infeasible,
                "no active edges can carry the requested flux");
        return 0.0;
    }

    // Feasible flow by greedy source-to-sink routing along shortest paths.
    Vector u = Vector::Zero(static_cast<Eigen::Index>(ne));
    Vector net = -b;  // net(x) > 0: x must ship mass out
    for (;;) {
        Eigen::Index source = -1, sink = -1;
        for (Eigen::Index x = 0; x < d; ++x) {
            if (net(x) > 1e-14 && source < 0) source = x;
            if (net(x) < -1e-14 && sink < 0) sink = x;
        }
        if (source < 0) break;
        require(sink >= 0, ErrorCode::Infeasible, "flow balance is inconsistent");
        std::vector<std::size_t> path = shortest_path(edges, d, source, sink);
        require(!path.empty(), ErrorCode::Infeasible,
                "flow polytope is empty: no active route between imbalance nodes");
        Scalar amount = std::min(net(source), -net(sink));
        for (std::size_t e : path) u(static_cast<Eigen::Index>(e)) += amount;
        net(source) -= amount;
        net(sink) += amount;
    }

    // Strictly positive start where cycles permit; edges stuck at zero stay
    // fixed and contribute rate * l(0) = rate.
    Scalar bump = 0.0;
    for (const Edge& e : edges) bump = std::max(bump, e.rate);
    bump *= 0.05;
    std::vector<char> variable(ne, 0);
    for (std::size_t e = 0; e < ne; ++e) {
        if (u(static_cast<Eigen::Index>(e)) > 0.0) {
            variable[e] = 1;
            continue;
        }
        std::vector<std::size_t> back = shortest_path(edges, d, edges[e].y, edges[e].x);
        if (back.empty()) continue;
        u(static_cast<Eigen::Index>(e)) += bump;
        for (std::size_t e2 : back) u(static_cast<Eigen::Index>(e2)) += bump;
        variable[e] = 1;
    }
    for (std::size_t e = 0; e < ne; ++e)
        if (u(static_cast<Eigen::Index>(e)) > 0.0) variable[e] = 1;

    // Circulation basis over the variable edges: fundamental cycles of an
    // undirected spanning forest, plus opposite-edge 2-cycles.
    std::vector<Vector> basis;
    {
        std::vector<Eigen::Index> component(static_cast<std::size_t>(d));
        for (Eigen::Index x = 0; x < d; ++x) component[static_cast<std::size_t>(x)] = x;
        std::function<Eigen::Index(Eigen::Index)> find = [&](Eigen::Index x) {
            while (component[static_cast<std::size_t>(x)] != x) {
                component[static_cast<std::size_t>(x)] =
                    component[static_cast<std::size_t>(component[static_cast<std::size_t>(x)])];
                x = component[static_cast<std::size_t>(x)];
            }
            return x;
        };
        // Tree edges: signed incidence columns used to resolve non-tree edges.
        std::vector<std::size_t> tree;
        std::vector<std::size_t> non_tree;
        for (std::size_t e = 0; e < ne; ++e) {
            if (!variable[e]) continue;
            Eigen::Index cx = find(edges[e].x), cy = find(edges[e].y);
            if (cx != cy) {
                component[static_cast<std::size_t>(cx)] = cy;
                tree.push_back(e);
            } else {
                non_tree.push_back(e);
            }
        }
        // For each non-tree edge, solve for the unique tree combination that
        // cancels its divergence: small dense solve on the incidence columns.
        if (!non_tree.empty()) {
            Matrix tree_inc = Matrix::Zero(d, static_cast<Eigen::Index>(tree.size()));
            for (std::size_t t = 0; t < tree.size(); ++t) {
                tree_inc(edges[tree[t]].x, static_cast<Eigen::Index>(t)) = -1.0;
                tree_inc(edges[tree[t]].y, static_cast<Eigen::Index>(t)) = 1.0;
            }
            Eigen::ColPivHouseholderQR<Matrix> qr(tree_inc);
            for (std::size_t e : non_tree) {
                Vector div = Vector::Zero(d);
                div(edges[e].x) = -1.0;
                div(edges[e].y) = 1.0;
                Vector coeffs = qr.solve(div);
                Vector cycle = Vector::Zero(static_cast<Eigen::Index>(ne));
                cycle(static_cast<Eigen::Index>(e)) = 1.0;
                for (std::size_t t = 0; t < tree.size(); ++t)
                    cycle(static_cast<Eigen::Index>(tree[t])) = -coeffs(static_cast<Eigen::Index>(t));
                basis.push_back(cycle);
            }
        }
    }

    auto cost = [&](const Vector& flow) {
        Scalar acc = 0.0;
        for (std::size_t e = 0; e < ne; ++e) {
            Scalar z = flow(static_cast<Eigen::Index>(e)) / edges[e].rate;
            if (z < 0.0) return kInf;
            acc += edges[e].rate * (z > 0.0 ? z * std::log(z) - z + 1.0 : 1.0);
        }
        return acc;
    };

    if (basis.empty()) return cost(u);

    Matrix Z(static_cast<Eigen::Index>(ne), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t k = 0; k < basis.size(); ++k) Z.col(static_cast<Eigen::Index>(k)) = basis[k];

    Scalar value = cost(u);
    for (int it = 0; it < 300; ++it) {
        Vector grad_u(static_cast<Eigen::Index>(ne));
        Vector inv_u(static_cast<Eigen::Index>(ne));
        for (std::size_t e = 0; e < ne; ++e) {
            Scalar ue = u(static_cast<Eigen::Index>(e));
            if (variable[e]) {
                grad_u(static_cast<Eigen::Index>(e)) = std::log(ue / edges[e].rate);
                inv_u(static_cast<Eigen::Index>(e)) = 1.0 / ue;
            } else {
                grad_u(static_cast<Eigen::Index>(e)) = 0.0;
                inv_u(static_cast<Eigen::Index>(e)) = 0.0;
            }
        }
        Vector grad = Z.transpose() * grad_u;
        if (grad.lpNorm<Eigen::Infinity>() <= 1e-11) break;
        Matrix hess = Z.transpose() * inv_u.asDiagonal() * Z;
        Eigen::LDLT<Matrix> ldlt(hess);
        Vector step = ldlt.solve(-grad);
        if (!step.allFinite()) break;
        Vector du = Z * step;
        // Stay strictly inside the positive orthant on variable edges.
        Scalar tmax = 1.0;
        for (std::size_t e = 0; e < ne; ++e) {
            if (!variable[e] || du(static_cast<Eigen::Index>(e)) >= 0.0) continue;
            tmax = std::min(tmax, -0.99 * u(static_cast<Eigen::Index>(e)) /
                                      du(static_cast<Eigen::Index>(e)));
        }
        Scalar t = tmax;
        Scalar directional = grad.dot(step);
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            Vector trial = u + t * du;
            Scalar trial_value = cost(trial);
            if (trial_value <= value + 0.3 * t * directional) {
                u = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        if (std::abs(directional) * tmax < 1e-15) break;
    }
    return value;
}

// ---------------------------------------------------------------------------
// Duality and concavity
// ---------------------------------------------------------------------------

DualityReport duality_check(const RateFamily& model, int samples, std::uint64_t seed) {
    require(samples >= 1, ErrorCode::InvalidParameters, "need at least one sample");
    const Eigen::Index d = model.dim();
    std::mt19937_64 rng = make_stream(seed, 17);
    std::uniform_real_distribution<Scalar> scale(0.1, 2.0);

    DualityReport report;
    report.samples = samples;
    for (int k = 0; k < samples; ++k) {
        SimplexPoint r = random_simplex_point(rng, d, 1e-3);
        Vector alpha = random_tangent_vector(rng, d, scale(rng)).components();

        Scalar h = hamiltonian_H(model, r, alpha);
        // Envelope: the optimal beta for this alpha is the H-gradient.
        Vector beta_star = hamiltonian_gradient(model, r, alpha);
        Scalar roundtrip =
            std::abs(alpha.dot(beta_star) + lagrangian_L(model, r, TangentVector(beta_star)) - h);
        report.max_roundtrip_error = std::max(report.max_roundtrip_error, roundtrip);

        Vector drift = vector_field(model, r).components();
        Scalar dual1 = std::abs(lagrangian_L(model, r, TangentVector(drift)));
        report.max_dual1_error = std::max(report.max_dual1_error, dual1);
    }
    return report;
}

ConcavityReport concavity_probe(const RateFamily& model, const SimplexPoint& r,
                                const Vector& alpha, const Vector& w,
                                const std::vector<Scalar>& rho_grid) {
    require(rho_grid.size() >= 3, ErrorCode::InvalidParameters, "rho grid needs >= 3 nodes");
    ConcavityReport report;
    report.rho = rho_grid;
    std::vector<Scalar> values;
    values.reserve(rho_grid.size());
    for (Scalar rho : rho_grid) values.push_back(hamiltonian_H(model, r, alpha + rho * w));
    report.max_second_difference = -kInf;
    for (std::size_t k = 1; k + 1 < values.size(); ++k) {
        Scalar dl = rho_grid[k] - rho_grid[k - 1];
        Scalar dr = rho_grid[k + 1] - rho_grid[k];
        Scalar second = (values[k + 1] - 2.0 * values[k] + values[k - 1]) / (dl * dr);
        report.second_differences.push_back(second);
        report.max_second_difference = std::max(report.max_second_difference, second);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Subsolution checking
// ---------------------------------------------------------------------------

const char* to_string(SubsolutionVerdict v) noexcept {
    switch (v) {
        case SubsolutionVerdict::Solution: return "Solution";
        case SubsolutionVerdict::Subsolution: return "Subsolution";
        case SubsolutionVerdict::Violation: return "Violation";
    }
    return "Violation";
}

SubsolutionReport subsolution_check(const RateFamily& model, const LyapunovCandidate& J,
                                    const SimplexGrid& grid, const SubsolutionOptions& opts) {
    require(grid.margin >= 1e-3, ErrorCode::BoundaryProximity,
            "subsolution grid must keep a margin of at least 1e-3");
    require(!grid.points.empty(), ErrorCode::InvalidParameters, "empty grid");

    SubsolutionReport report;
    report.grid_size = grid.points.size();
    report.tolerance = opts.tolerance > 0.0
                           ? opts.tolerance
                           : (J.has_analytic_gradient() ? 1e-7 : 1e-4);
    report.values.assign(grid.points.size(), 0.0);

    parallel_for(grid.points.size(), opts.jobs, [&](std::size_t i) {
        const SimplexPoint& r = grid.points[i];
        Vector alpha = -J.gradient(r).components();
        report.values[i] = hamiltonian_H(model, r, alpha);
    });

    report.min_value = kInf;
    report.worst_point = grid.points.front().weights();
    for (std::size_t i = 0; i < report.values.size(); ++i) {
        Scalar v = report.values[i];
        report.max_abs_value = std::max(report.max_abs_value, std::abs(v));
        if (v < report.min_value) {
            report.min_value = v;
            report.worst_point = grid.points[i].weights();
        }
    }
    if (report.max_abs_value <= report.tolerance) report.verdict = SubsolutionVerdict::Solution;
    else if (report.min_value >= -report.tolerance) report.verdict = SubsolutionVerdict::Subsolution;
    else report.verdict = SubsolutionVerdict::Violation;
    return report;
}

Scalar orbital_derivative(const RateFamily& model, const LyapunovCandidate& J,
                          const SimplexPoint& r) {
    require(r.min_coeff() >= 1e-8, ErrorCode::BoundaryProximity,
            "orbital derivative needs an interior point");
    return J.gradient(r).components().dot(vector_field(model, r).components());
}

// ---------------------------------------------------------------------------
// Dirichlet forms
// ---------------------------------------------------------------------------

Scalar dirichlet_form(const RateMatrix& gamma, const SimplexPoint& pi, const Vector& f,
                      const Vector& g) {
    const Eigen::Index d = gamma.dim();
    require(f.size() == d && g.size() == d, ErrorCode::InvalidInput, "dimension mismatch");
    Vector balance = gamma.entries().transpose() * pi.weights();
    require(balance.lpNorm<1>() <= 1e-10, ErrorCode::NotStationary,
            "pi is not stationary for gamma");
    Vector gen_g = gamma.entries() * g;
    Scalar acc = 0.0;
    for (Eigen::Index x = 0; x < d; ++x) acc += f(x) * gen_g(x) * pi[x];
    return -acc;
}

Scalar dv_rate_reversible(const RateMatrix& gamma, const SimplexPoint& pi, const SimplexPoint& mu) {
    const Eigen::Index d = gamma.dim();
    for (Eigen::Index x = 0; x < d; ++x)
        for (Eigen::Index y = x + 1; y < d; ++y)
            require(std::abs(pi[x] * gamma(x, y) - pi[y] * gamma(y, x)) <= 1e-10,
                    ErrorCode::NotReversible, "gamma is not reversible with respect to pi");
    Vector density(d);
    for (Eigen::Index x = 0; x < d; ++x) {
        if (mu[x] > 0.0)
            require(pi[x] > 0.0, ErrorCode::SupportViolation, "mu is not dominated by pi");
        density(x) = pi[x] > 0.0 ? mu[x] / pi[x] : 0.0;
    }
    Vector root = density.cwiseSqrt();
    return dirichlet_form(gamma, pi, root, root);
}

}  // namespace nlmarkov
