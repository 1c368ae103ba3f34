#include "nlmarkov/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nlmarkov/quadrature.hpp"
#include "nlmarkov/rng.hpp"

namespace nlmarkov {

namespace {

constexpr Scalar kRowSumTol = 1e-12;
constexpr Scalar kStationaryCheckTol = 1e-10;

Vector clamp_nonnegative(const Vector& r) {
    return r.cwiseMax(0.0);
}

// Null left vector of an ergodic generator by the augmented dense solve:
// replace the first balance equation with the normalization sum = 1.
Vector dense_stationary_weights(const Matrix& gamma) {
    const Eigen::Index d = gamma.rows();
    Matrix a = gamma.transpose();
    a.row(0).setOnes();
    Vector b = Vector::Zero(d);
    b(0) = 1.0;
    Eigen::PartialPivLU<Matrix> lu(a);
    Vector pi = lu.solve(b);
    require(pi.allFinite(), ErrorCode::SolverSingular, "stationary solve produced non-finite values");
    return pi;
}

Matrix complete_adjacency(Eigen::Index d) {
    Matrix a = Matrix::Ones(d, d);
    a.diagonal().setZero();
    return a;
}

void validate_adjacency(const Matrix& a) {
    const Eigen::Index d = a.rows();
    require(a.cols() == d && d >= 2, ErrorCode::InvalidParameters, "adjacency must be square, d >= 2");
    for (Eigen::Index i = 0; i < d; ++i) {
        require(a(i, i) == 0.0, ErrorCode::InvalidParameters, "adjacency diagonal must be zero");
        for (Eigen::Index j = 0; j < d; ++j) {
            require(a(i, j) == 0.0 || a(i, j) == 1.0, ErrorCode::InvalidParameters,
                    "adjacency entries must be 0 or 1");
            require(a(i, j) == a(j, i), ErrorCode::InvalidParameters, "adjacency must be symmetric");
        }
    }
    require(check_irreducible(RateMatrix::from_off_diagonal(a)), ErrorCode::NotIrreducible,
            "adjacency graph is not connected");
}

std::string format_arg(Scalar w) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", w);
    return buf;
}

void check_positive_on_unit_interval(const Expression& f, const std::string& what) {
    for (int i = 0; i <= 100; ++i) {
        Scalar w = static_cast<Scalar>(i) / 100.0;
        Scalar v = f.eval1d(w);
        require(std::isfinite(v) && v > 0.0, ErrorCode::InvalidParameters,
                what + " must be positive on [0,1]; fails near w=" + format_arg(w));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// RateMatrix
// ---------------------------------------------------------------------------

RateMatrix::RateMatrix(Matrix entries) : m_(std::move(entries)) {
    require(m_.rows() == m_.cols() && m_.rows() >= 1, ErrorCode::InvalidParameters,
            "rate matrix must be square");
    require(m_.allFinite(), ErrorCode::InvalidParameters, "rate matrix entries must be finite");
    const Eigen::Index d = m_.rows();
    for (Eigen::Index x = 0; x < d; ++x) {
        for (Eigen::Index y = 0; y < d; ++y) {
            if (x != y)
                require(m_(x, y) >= 0.0, ErrorCode::InvalidParameters,
                        "off-diagonal rate must be nonnegative");
        }
        Scalar row = m_.row(x).sum();
        require(std::abs(row) <= kRowSumTol * std::max(1.0, m_.row(x).cwiseAbs().sum()),
                ErrorCode::InvalidParameters, "rate matrix rows must sum to zero");
    }
}

RateMatrix RateMatrix::from_off_diagonal(Matrix off_diagonal) {
    const Eigen::Index d = off_diagonal.rows();
    for (Eigen::Index x = 0; x < d; ++x) {
        off_diagonal(x, x) = 0.0;
        off_diagonal(x, x) = -off_diagonal.row(x).sum();
    }
    return RateMatrix(std::move(off_diagonal));
}

bool check_irreducible(const RateMatrix& gamma) {
    const Matrix& m = gamma.entries();
    const Eigen::Index d = m.rows();
    auto reaches_all = [&](bool transpose) {
        std::vector<char> seen(static_cast<std::size_t>(d), 0);
        std::vector<Eigen::Index> stack{0};
        seen[0] = 1;
        Eigen::Index count = 1;
        while (!stack.empty()) {
            Eigen::Index x = stack.back();
            stack.pop_back();
            for (Eigen::Index y = 0; y < d; ++y) {
                if (y == x || seen[static_cast<std::size_t>(y)]) continue;
                Scalar rate = transpose ? m(y, x) : m(x, y);
                if (rate > 0.0) {
                    seen[static_cast<std::size_t>(y)] = 1;
                    stack.push_back(y);
                    ++count;
                }
            }
        }
        return count == d;
    };
    return reaches_all(false) && reaches_all(true);
}

// ---------------------------------------------------------------------------
// Telecom state space
// ---------------------------------------------------------------------------

TelecomStateSpace telecom_state_space(int capacity, const std::vector<int>& requirement) {
    require(capacity >= 1, ErrorCode::InvalidParameters, "capacity must be >= 1");
    require(!requirement.empty(), ErrorCode::InvalidParameters, "at least one class required");
    for (int a : requirement)
        require(a >= 1, ErrorCode::InvalidParameters, "capacity requirements must be >= 1");

    const int classes = static_cast<int>(requirement.size());
    TelecomStateSpace space;
    Eigen::VectorXi x = Eigen::VectorXi::Zero(classes);
    std::function<void(int, int)> walk = [&](int m, int used) {
        if (m == classes) {
            space.states.push_back(x);
            return;
        }
        for (int k = 0; used + k * requirement[static_cast<std::size_t>(m)] <= capacity; ++k) {
            x(m) = k;
            walk(m + 1, used + k * requirement[static_cast<std::size_t>(m)]);
        }
        x(m) = 0;
    };
    walk(0, 0);
    std::sort(space.states.begin(), space.states.end(),
              [](const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
                  int sa = a.sum(), sb = b.sum();
                  if (sa != sb) return sa < sb;
                  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                                      b.data() + b.size());
              });
    return space;
}

Eigen::Index TelecomStateSpace::index_of(const Eigen::VectorXi& x) const {
    for (Eigen::Index i = 0; i < dim(); ++i)
        if (states[static_cast<std::size_t>(i)] == x) return i;
    fail(ErrorCode::InvalidInput, "state is not in the telecom state space");
}

// ---------------------------------------------------------------------------
// RateFamily
// ---------------------------------------------------------------------------

RateMatrix RateFamily::operator()(const Vector& r) const {
    require(r.size() == dim_, ErrorCode::InvalidInput, "point dimension does not match the model");
    require(r.allFinite(), ErrorCode::InvalidInput, "point must be finite");
    return RateMatrix::from_off_diagonal(entries_(clamp_nonnegative(r)));
}

SimplexPoint RateFamily::analytic_stationary(const Vector& r) const {
    require(static_cast<bool>(stationary_), ErrorCode::InvalidParameters,
            "model has no closed-form stationary law");
    return SimplexPoint::from_nearby(stationary_(clamp_nonnegative(r)));
}

const PotentialField& RateFamily::analytic_potential() const {
    require(potential_.has_value(), ErrorCode::InvalidParameters,
            "model has no closed-form potential");
    return *potential_;
}

const GibbsStructure& RateFamily::gibbs_structure() const {
    require(gibbs_.has_value(), ErrorCode::InvalidParameters,
            "model has no Gibbs potential structure");
    return *gibbs_;
}

const char* variant_name(const ModelSpec& spec) {
    struct Visitor {
        const char* operator()(const ConstantSpec&) const { return "constant"; }
        const char* operator()(const GibbsAffineSpec&) const { return "gibbs_affine"; }
        const char* operator()(const SlowAdaptationSpec&) const { return "slow_adaptation"; }
        const char* operator()(const BirthDeathPhiPsiSpec&) const { return "birth_death_phi_psi"; }
        const char* operator()(const MetropolisGGibbsSpec&) const { return "metropolis_ggibbs"; }
        const char* operator()(const ThreeStateBSpec&) const { return "three_state_b"; }
        const char* operator()(const ThreeStateNonGibbsSpec&) const { return "three_state_non_gibbs"; }
        const char* operator()(const NearestNeighborCostSpec&) const { return "nearest_neighbor_cost"; }
        const char* operator()(const TelecomSpec&) const { return "telecom"; }
        const char* operator()(const NonLocallyGibbsSpec&) const { return "non_locally_gibbs"; }
    };
    return std::visit(Visitor{}, spec.value);
}

// ---------------------------------------------------------------------------
// Per-variant builders
// ---------------------------------------------------------------------------

namespace {

struct Built {
    Eigen::Index dim = 0;
    std::function<Matrix(const Vector&)> entries;
    std::function<Vector(const Vector&)> stationary;
    std::optional<PotentialField> potential;
    std::optional<GibbsStructure> gibbs;
};

Built build_constant(const ConstantSpec& spec) {
    RateMatrix gamma(spec.gamma);
    Built out;
    out.dim = gamma.dim();
    Matrix off = gamma.entries();
    off.diagonal().setZero();
    out.entries = [off](const Vector&) { return off; };
    // The stationary law and the relative-entropy potential exist only in
    // the ergodic case; a reducible constant generator is still a valid
    // (bare) family, e.g. for absorbing-chain simulations.
    if (check_irreducible(gamma)) {
        Vector pi = dense_stationary_weights(gamma.entries());
        Vector log_pi = pi.array().log().matrix();
        out.stationary = [pi](const Vector&) { return pi; };
        out.potential = PotentialField{
            [log_pi](const Vector& r) { return -r.dot(log_pi); },
            [log_pi](const Vector&) { return Vector(-log_pi); },
        };
    }
    return out;
}

Built build_gibbs_affine(const GibbsAffineSpec& spec) {
    const Eigen::Index d = spec.V.size();
    require(d >= 2, ErrorCode::InvalidParameters, "gibbs_affine needs d >= 2");
    require(spec.W.rows() == d && spec.W.cols() == d, ErrorCode::InvalidParameters,
            "W must be d x d");
    require((spec.W - spec.W.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
            ErrorCode::InvalidParameters, "W must be symmetric");
    require(spec.beta >= 0.0, ErrorCode::InvalidParameters, "beta must be >= 0");
    Matrix adj = spec.adjacency.size() == 0 ? complete_adjacency(d) : spec.adjacency;
    validate_adjacency(adj);
    require(adj.rows() == d, ErrorCode::InvalidParameters, "adjacency dimension mismatch");

    const Vector V = spec.V;
    const Matrix W = spec.W;
    const Scalar beta = spec.beta;

    auto field_K = [V, W, beta](const Vector& r) { return Vector(V + beta * (W * r)); };
    auto field_H = [V, W, beta](const Vector& r) { return Vector(V + 2.0 * beta * (W * r)); };

    Built out;
    out.dim = d;
    out.entries = [d, adj, field_H](const Vector& r) {
        Vector H = field_H(r);
        Matrix off = Matrix::Zero(d, d);
        for (Eigen::Index x = 0; x < d; ++x)
            for (Eigen::Index y = 0; y < d; ++y) {
                if (x == y || adj(x, y) == 0.0) continue;
                off(x, y) = std::exp(-std::max(H(y) - H(x), 0.0));
            }
        return off;
    };
    out.stationary = [field_H](const Vector& r) {
        Vector H = field_H(r);
        Scalar shift = H.minCoeff();
        return Vector((-(H.array() - shift)).exp().matrix());
    };
    out.potential = PotentialField{
        [V, W, beta](const Vector& r) { return r.dot(V) + beta * r.dot(W * r); },
        field_H,
    };
    out.gibbs = GibbsStructure{field_K, field_H};
    return out;
}

Built build_slow_adaptation(const SlowAdaptationSpec& spec, const RateFamily& base) {
    require(spec.lambda >= 0.0 && spec.lambda <= 1.0, ErrorCode::InvalidParameters,
            "lambda must lie in [0, 1]");
    SimplexPoint pi_star(spec.pi_star);
    require(pi_star.dim() == base.dim(), ErrorCode::InvalidParameters,
            "pi_star dimension does not match the base model");

    const Scalar lambda = spec.lambda;
    const Vector star = pi_star.weights();
    auto warp = [lambda, star](const Vector& p) { return Vector(star + lambda * (p - star)); };

    Built out;
    out.dim = base.dim();
    out.entries = [base, warp](const Vector& p) {
        Matrix off = base(warp(p)).entries();
        off.diagonal().setZero();
        return off;
    };
    if (base.has_analytic_stationary())
        out.stationary = [base, warp](const Vector& p) {
            return Vector(base.analytic_stationary(warp(p)).weights());
        };

    if (const auto* affine = std::get_if<GibbsAffineSpec>(&base.spec().value)) {
        // The slowed family is again of Gibbs type with the adjusted
        // potentials V + 2 beta (1-lambda) W pi_star and lambda W.
        const Vector V = affine->V;
        const Matrix W = affine->W;
        const Scalar beta = affine->beta;
        Vector v_lambda = V + 2.0 * beta * (1.0 - lambda) * (W * star);
        auto field_K = [v_lambda, W, beta, lambda](const Vector& p) {
            return Vector(v_lambda + lambda * beta * (W * p));
        };
        auto field_H = [v_lambda, W, beta, lambda](const Vector& p) {
            return Vector(v_lambda + 2.0 * lambda * beta * (W * p));
        };
        out.gibbs = GibbsStructure{field_K, field_H};
        out.potential = PotentialField{
            [v_lambda, W, beta, lambda](const Vector& p) {
                return p.dot(v_lambda) + lambda * beta * p.dot(W * p);
            },
            field_H,
        };
    } else if (lambda > 0.0 && base.has_analytic_potential()) {
        // Pullback potential: U(p) = U_base(warp(p)) / lambda has exactly the
        // tangent derivatives the frozen stationary laws require.
        PotentialField pb = base.analytic_potential();
        out.potential = PotentialField{
            [pb, warp, lambda](const Vector& p) { return pb.value(warp(p)) / lambda; },
            [pb, warp](const Vector& p) { return pb.gradient(warp(p)); },
        };
    } else if (lambda == 0.0) {
        Vector pi0 = base.has_analytic_stationary()
                         ? Vector(base.analytic_stationary(star).weights())
                         : dense_stationary_weights(base(star).entries());
        pi0 /= pi0.sum();
        Vector log_pi0 = pi0.array().log().matrix();
        out.potential = PotentialField{
            [log_pi0](const Vector& p) { return -p.dot(log_pi0); },
            [log_pi0](const Vector&) { return Vector(-log_pi0); },
        };
    }
    return out;
}

Built build_birth_death(const BirthDeathPhiPsiSpec& spec) {
    const Eigen::Index d = static_cast<Eigen::Index>(spec.phi.size());
    require(d >= 2, ErrorCode::InvalidParameters, "birth_death_phi_psi needs d >= 2");
    require(static_cast<Eigen::Index>(spec.psi.size()) == d, ErrorCode::InvalidParameters,
            "psi must list d functions (psi_0..psi_{d-1})");
    for (const auto& phi : spec.phi) {
        require(phi.max_coordinate() == 0, ErrorCode::InvalidParameters,
                "phi_i must be a function of w only");
        check_positive_on_unit_interval(phi, "phi");
    }
    std::mt19937_64 rng = make_stream(0x5eedf00d, 1);
    for (const auto& psi : spec.psi) {
        require(psi.max_coordinate() <= d, ErrorCode::InvalidParameters,
                "psi references coordinates beyond the dimension");
        for (int k = 0; k < 25; ++k) {
            Vector r = random_simplex_point(rng, d).weights();
            Scalar v = psi.eval(r);
            require(std::isfinite(v) && v > 0.0, ErrorCode::InvalidParameters,
                    "psi_i must be positive on the simplex");
        }
    }

    auto psi = spec.psi;
    auto phi = spec.phi;
    Built out;
    out.dim = d;
    out.entries = [d, psi, phi](const Vector& r) {
        Matrix off = Matrix::Zero(d, d);
        for (Eigen::Index x = 0; x + 1 < d; ++x)
            off(x, x + 1) = psi[static_cast<std::size_t>(x + 1)].eval(r) *
                            phi[static_cast<std::size_t>(x)].eval1d(r(x));
        for (Eigen::Index x = 1; x < d; ++x)
            off(x, x - 1) = psi[static_cast<std::size_t>(x)].eval(r) *
                            phi[static_cast<std::size_t>(x)].eval1d(r(x));
        return off;
    };
    out.stationary = [d, phi](const Vector& r) {
        Vector w(d);
        for (Eigen::Index x = 0; x < d; ++x)
            w(x) = 1.0 / phi[static_cast<std::size_t>(x)].eval1d(r(x));
        return w;
    };
    out.potential = PotentialField{
        [d, phi](const Vector& r) {
            Scalar u = 0.0;
            for (Eigen::Index x = 0; x < d; ++x) {
                const auto& f = phi[static_cast<std::size_t>(x)];
                u += integrate([&f](Scalar w) { return std::log(f.eval1d(w)); }, 0.0, r(x));
            }
            return u;
        },
        [d, phi](const Vector& r) {
            Vector g(d);
            for (Eigen::Index x = 0; x < d; ++x)
                g(x) = std::log(phi[static_cast<std::size_t>(x)].eval1d(r(x)));
            return g;
        },
    };
    return out;
}

Built build_metropolis(const MetropolisGGibbsSpec& spec) {
    const Eigen::Index d = static_cast<Eigen::Index>(spec.K.size());
    require(d >= 2, ErrorCode::InvalidParameters, "metropolis_ggibbs needs d >= 2");
    require(static_cast<Eigen::Index>(spec.R.size()) == d, ErrorCode::InvalidParameters,
            "R must list one function per state");
    Matrix adj = spec.adjacency.size() == 0 ? complete_adjacency(d) : spec.adjacency;
    validate_adjacency(adj);
    require(adj.rows() == d, ErrorCode::InvalidParameters, "adjacency dimension mismatch");
    for (const auto& k : spec.K)
        require(k.max_coordinate() <= d, ErrorCode::InvalidParameters,
                "K references coordinates beyond the dimension");
    for (const auto& rfun : spec.R)
        require(rfun.max_coordinate() == 0, ErrorCode::InvalidParameters,
                "R_x must be a function of w only");

    // Exact partials dK[z][x] = d K^z / d r_x, so H is evaluated in closed form.
    auto K = spec.K;
    auto R = spec.R;
    std::vector<std::vector<Expression>> dK;
    dK.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index z = 0; z < d; ++z) {
        std::vector<Expression> row;
        row.reserve(static_cast<std::size_t>(d));
        for (Eigen::Index x = 0; x < d; ++x)
            row.push_back(K[static_cast<std::size_t>(z)].derivative_r(x));
        dK.push_back(std::move(row));
    }

    auto field_K = [d, K](const Vector& r) {
        Vector out(d);
        for (Eigen::Index x = 0; x < d; ++x) out(x) = K[static_cast<std::size_t>(x)].eval(r);
        return out;
    };
    auto field_H = [d, K, dK](const Vector& r) {
        Vector out(d);
        for (Eigen::Index x = 0; x < d; ++x) {
            Scalar h = K[static_cast<std::size_t>(x)].eval(r);
            for (Eigen::Index z = 0; z < d; ++z)
                h += dK[static_cast<std::size_t>(z)][static_cast<std::size_t>(x)].eval(r) * r(z);
            out(x) = h;
        }
        return out;
    };
    auto field_E = [d, field_H, R](const Vector& r) {
        Vector e = field_H(r);
        for (Eigen::Index x = 0; x < d; ++x) e(x) += R[static_cast<std::size_t>(x)].eval1d(r(x));
        return e;
    };

    Built out;
    out.dim = d;
    out.entries = [d, adj, field_E](const Vector& r) {
        Vector e = field_E(r);
        Matrix off = Matrix::Zero(d, d);
        for (Eigen::Index x = 0; x < d; ++x)
            for (Eigen::Index y = 0; y < d; ++y) {
                if (x == y || adj(x, y) == 0.0) continue;
                off(x, y) = std::exp(-std::max(e(y) - e(x), 0.0));
            }
        return off;
    };
    out.stationary = [field_E](const Vector& r) {
        Vector e = field_E(r);
        Scalar shift = e.minCoeff();
        return Vector((-(e.array() - shift)).exp().matrix());
    };
    out.potential = PotentialField{
        [d, R, field_K](const Vector& r) {
            Scalar u = field_K(r).dot(r);
            for (Eigen::Index z = 0; z < d; ++z) {
                const auto& f = R[static_cast<std::size_t>(z)];
                u += integrate([&f](Scalar w) { return f.eval1d(w); }, 0.0, r(z));
            }
            return u;
        },
        [d, R, field_H](const Vector& r) {
            Vector g = field_H(r);
            for (Eigen::Index x = 0; x < d; ++x) g(x) += R[static_cast<std::size_t>(x)].eval1d(r(x));
            return g;
        },
    };
    out.gibbs = GibbsStructure{field_K, field_H};
    return out;
}

struct ThreeStateParams {
    Scalar a1, a2, b2, b3, kappa;
    Vector c;
    Vector r_star;
};

ThreeStateParams resolve_three_state(Scalar a1, Scalar a2, Scalar b2, Scalar b3, Scalar kappa,
                                     const Vector& c, const std::optional<Vector>& r_star) {
    require(a1 > 0.0 && a2 > 0.0 && b2 > 0.0 && b3 > 0.0, ErrorCode::InvalidParameters,
            "three-state rates must be positive");
    require(c.size() == 3, ErrorCode::InvalidParameters, "c must have 3 entries");
    ThreeStateParams p{a1, a2, b2, b3, kappa, c, Vector()};
    if (r_star.has_value()) {
        p.r_star = SimplexPoint(*r_star).weights();
        require(p.r_star.size() == 3, ErrorCode::InvalidParameters, "r_star must have 3 entries");
    } else {
        Vector w(3);
        w << b2 * b3, a1 * b3, a1 * a2;
        p.r_star = w / w.sum();
    }
    return p;
}

Scalar three_state_B(const ThreeStateParams& p, const Vector& r) {
    return std::exp(p.kappa * (r - p.r_star).dot(p.c));
}

Vector three_state_stationary(const ThreeStateParams& p, const Vector& r) {
    Vector w(3);
    w << p.b2 * p.b3 * three_state_B(p, r), p.a1 * p.b3, p.a1 * p.a2;
    return w;
}

std::optional<PotentialField> three_state_potential(const ThreeStateParams& p) {
    if (p.kappa != 0.0 && std::abs(p.c(1) - p.c(2)) > 1e-14) return std::nullopt;
    const ThreeStateParams q = p;
    return PotentialField{
        [q](const Vector& r) {
            return q.kappa * r(0) * (q.r_star - r).dot(q.c) +
                   std::log(q.a1 * q.a2 / (q.b2 * q.b3)) * r(0) + std::log(q.a2 / q.b3) * r(1) +
                   0.5 * q.kappa * r(0) * r(0) * (q.c(0) - q.c(1));
        },
        [q](const Vector& r) {
            Vector g(3);
            g(0) = q.kappa * (q.r_star - r).dot(q.c) - q.kappa * r(0) * q.c(1) +
                   std::log(q.a1 * q.a2 / (q.b2 * q.b3));
            g(1) = -q.kappa * r(0) * q.c(1) + std::log(q.a2 / q.b3);
            g(2) = -q.kappa * r(0) * q.c(2);
            return g;
        },
    };
}

Built build_three_state_b(const ThreeStateBSpec& spec) {
    ThreeStateParams p =
        resolve_three_state(spec.a1, spec.a2, spec.b2, spec.b3, spec.kappa, spec.c, spec.r_star);
    Built out;
    out.dim = 3;
    out.entries = [p](const Vector& r) {
        Matrix off = Matrix::Zero(3, 3);
        off(0, 1) = p.a1;
        off(1, 0) = p.b2 * three_state_B(p, r);
        off(1, 2) = p.a2;
        off(2, 1) = p.b3;
        return off;
    };
    out.stationary = [p](const Vector& r) { return three_state_stationary(p, r); };
    out.potential = three_state_potential(p);
    return out;
}

Built build_three_state_non_gibbs(const ThreeStateNonGibbsSpec& spec) {
    require(spec.c.size() == 3, ErrorCode::InvalidParameters, "c must have 3 entries");
    require(std::abs(spec.c(1) - spec.c(2)) <= 1e-14, ErrorCode::InvalidParameters,
            "three_state_non_gibbs requires c2 == c3");
    ThreeStateParams p = resolve_three_state(spec.a1, spec.a2, spec.b2, spec.b3, spec.kappa, spec.c,
                                             std::nullopt);
    Built out;
    out.dim = 3;
    out.entries = [p](const Vector& r) {
        Vector w = three_state_stationary(p, r);
        Vector q = w / w.sum();
        Matrix off = Matrix::Zero(3, 3);
        off(0, 1) = q(1) * q(2);
        off(0, 2) = q(1) * q(2);
        off(1, 0) = 2.0 * q(0) * q(2);
        off(1, 2) = 2.0 * q(0) * q(2);
        off(2, 1) = 3.0 * q(0) * q(1);
        return off;
    };
    out.stationary = [p](const Vector& r) { return three_state_stationary(p, r); };
    out.potential = three_state_potential(p);
    return out;
}

Built build_nearest_neighbor(const NearestNeighborCostSpec& spec) {
    const Eigen::Index d = spec.d;
    require(d >= 2, ErrorCode::InvalidParameters, "nearest_neighbor_cost needs d >= 2");
    require(static_cast<Eigen::Index>(spec.up.size()) == d - 1 &&
                static_cast<Eigen::Index>(spec.down.size()) == d - 1,
            ErrorCode::InvalidParameters, "need d-1 up rates a^i and d-1 down rates b^{i+1}");
    for (const auto& f : spec.up) {
        require(f.max_coordinate() == 0, ErrorCode::InvalidParameters,
                "a^i must be a 1-D function");
        check_positive_on_unit_interval(f, "a^i");
    }
    for (const auto& f : spec.down) {
        require(f.max_coordinate() == 0, ErrorCode::InvalidParameters,
                "b^{i+1} must be a 1-D function");
        check_positive_on_unit_interval(f, "b^{i+1}");
    }

    auto up = spec.up;
    auto down = spec.down;
    // Cost arguments u_i = <r, c^i> with c^i = sum_{k > i} e_k: tail sums.
    auto tail_sums = [d](const Vector& r) {
        Vector u = Vector::Zero(d - 1);
        Scalar acc = 0.0;
        for (Eigen::Index i = d - 1; i >= 1; --i) {
            acc += r(i);
            u(i - 1) = acc;
        }
        return u;
    };

    Built out;
    out.dim = d;
    out.entries = [d, up, down, tail_sums](const Vector& r) {
        Vector u = tail_sums(r);
        Matrix off = Matrix::Zero(d, d);
        for (Eigen::Index i = 0; i + 1 < d; ++i) {
            off(i, i + 1) = up[static_cast<std::size_t>(i)].eval1d(u(i));
            off(i + 1, i) = down[static_cast<std::size_t>(i)].eval1d(u(i));
        }
        return off;
    };
    auto log_psi = [up, down](Eigen::Index i, Scalar u) {
        return std::log(down[static_cast<std::size_t>(i)].eval1d(u)) -
               std::log(up[static_cast<std::size_t>(i)].eval1d(u));
    };
    out.stationary = [d, log_psi, tail_sums](const Vector& r) {
        Vector u = tail_sums(r);
        Vector w(d);
        Scalar log_w = 0.0;
        w(0) = 1.0;
        for (Eigen::Index i = 0; i + 1 < d; ++i) {
            log_w -= log_psi(i, u(i));
            w(i + 1) = std::exp(log_w);
        }
        return w;
    };
    out.potential = PotentialField{
        [d, log_psi, tail_sums](const Vector& r) {
            Vector u = tail_sums(r);
            Scalar total = 0.0;
            for (Eigen::Index i = 0; i + 1 < d; ++i)
                total -= integrate([&](Scalar w) { return log_psi(i, w); }, 0.0, u(i));
            return total;
        },
        [d, log_psi, tail_sums](const Vector& r) {
            Vector u = tail_sums(r);
            Vector g = Vector::Zero(d);
            Scalar acc = 0.0;
            for (Eigen::Index x = 1; x < d; ++x) {
                acc -= log_psi(x - 1, u(x - 1));
                g(x) = acc;
            }
            return g;
        },
    };
    return out;
}

Built build_telecom(const TelecomSpec& spec) {
    const int classes = static_cast<int>(spec.requirement.size());
    require(classes >= 1, ErrorCode::InvalidParameters, "telecom needs at least one class");
    require(spec.lambda.size() == classes && spec.mu.size() == classes &&
                spec.gamma.size() == classes,
            ErrorCode::InvalidParameters, "lambda, mu, gamma must list one entry per class");
    require(spec.lambda.minCoeff() > 0.0 && spec.mu.minCoeff() > 0.0 &&
                spec.gamma.minCoeff() > 0.0,
            ErrorCode::InvalidParameters, "telecom rates must be positive");
    TelecomStateSpace space = telecom_state_space(spec.capacity, spec.requirement);
    const Eigen::Index d = space.dim();
    require(d >= 2, ErrorCode::InvalidParameters, "telecom state space is degenerate");

    // Precompute neighbors: up[i][m] is the index of state + f_m, or -1.
    std::vector<std::vector<Eigen::Index>> up(static_cast<std::size_t>(d)),
        down(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        const Eigen::VectorXi& x = space.states[static_cast<std::size_t>(i)];
        up[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(classes), -1);
        down[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(classes), -1);
        for (int m = 0; m < classes; ++m) {
            Eigen::VectorXi y = x;
            y(m) += 1;
            int used = 0;
            for (int k = 0; k < classes; ++k) used += y(k) * spec.requirement[static_cast<std::size_t>(k)];
            if (used <= spec.capacity) up[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] = space.index_of(y);
            if (x(m) >= 1) {
                Eigen::VectorXi z = x;
                z(m) -= 1;
                down[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] = space.index_of(z);
            }
        }
    }
    // occupancy(m, i) = x_m of state i, so mean occupancies are a matrix-vector product.
    Matrix occupancy(classes, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (int m = 0; m < classes; ++m)
            occupancy(m, i) = static_cast<Scalar>(space.states[static_cast<std::size_t>(i)](m));

    const Vector lam = spec.lambda, mu = spec.mu, gam = spec.gamma;
    Vector log_factorial_sum(d);  // sum_m log(x_m!)
    for (Eigen::Index i = 0; i < d; ++i) {
        Scalar s = 0.0;
        for (int m = 0; m < classes; ++m)
            s += std::lgamma(static_cast<Scalar>(space.states[static_cast<std::size_t>(i)](m)) + 1.0);
        log_factorial_sum(i) = s;
    }

    Built out;
    out.dim = d;
    out.entries = [d, classes, up, down, occupancy, lam, mu, gam](const Vector& r) {
        Vector mean = occupancy * r;
        Matrix off = Matrix::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (int m = 0; m < classes; ++m) {
                Eigen::Index j = up[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)];
                if (j >= 0) off(i, j) += lam(m) + gam(m) * mean(m);
                Eigen::Index k = down[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)];
                if (k >= 0) off(i, k) += occupancy(m, i) * (mu(m) + gam(m));
            }
        }
        return off;
    };
    out.stationary = [d, classes, occupancy, lam, mu, gam, log_factorial_sum](const Vector& r) {
        Vector mean = occupancy * r;
        Vector log_rho(classes);
        for (int m = 0; m < classes; ++m)
            log_rho(m) = std::log(lam(m) + gam(m) * mean(m)) - std::log(mu(m) + gam(m));
        Vector w(d);
        for (Eigen::Index i = 0; i < d; ++i)
            w(i) = std::exp(occupancy.col(i).dot(log_rho) - log_factorial_sum(i));
        return w;
    };
    out.potential = PotentialField{
        [classes, occupancy, lam, mu, gam, log_factorial_sum](const Vector& r) {
            Vector mean = occupancy * r;
            Scalar u = r.dot(log_factorial_sum);
            for (int m = 0; m < classes; ++m) {
                u += std::log(mu(m) + gam(m)) * mean(m);
                u -= integrate([&](Scalar w) { return std::log(lam(m) + gam(m) * w); }, 0.0,
                               mean(m));
            }
            return u;
        },
        [d, classes, occupancy, lam, mu, gam, log_factorial_sum](const Vector& r) {
            Vector mean = occupancy * r;
            Vector g = log_factorial_sum;
            for (int m = 0; m < classes; ++m) {
                Scalar coef = std::log(mu(m) + gam(m)) - std::log(lam(m) + gam(m) * mean(m));
                g += coef * occupancy.row(m).transpose();
            }
            return g;
        },
    };
    return out;
}

Built build_non_locally_gibbs(const NonLocallyGibbsSpec& spec) {
    require(spec.a1.max_coordinate() <= 3 && spec.a2.max_coordinate() <= 3,
            ErrorCode::InvalidParameters, "a1, a2 are fields on the 3-state simplex");
    require(spec.psi.max_coordinate() == 0, ErrorCode::InvalidParameters,
            "psi must be a 1-D function");
    for (int i = 0; i <= 100; ++i) {
        Scalar w = static_cast<Scalar>(i) / 100.0;
        Scalar v = spec.psi.eval1d(w);
        require(std::isfinite(v) && v > 0.0 && v < 1.0, ErrorCode::InvalidParameters,
                "psi must map [0,1] into (0,1)");
    }
    std::mt19937_64 rng = make_stream(0x5eedf00d, 2);
    for (int k = 0; k < 50; ++k) {
        Vector r = random_simplex_point(rng, 3).weights();
        Scalar v1 = spec.a1.eval(r), v2 = spec.a2.eval(r);
        require(v1 > 0.0 && v1 < 1.0 && v2 > 0.0 && v2 < 1.0, ErrorCode::InvalidParameters,
                "a1 and a2 must map the simplex into (0,1)");
    }

    const Expression a1 = spec.a1, a2 = spec.a2, psi = spec.psi;
    auto rates = [a1, a2, psi](const Vector& r) {
        Scalar v1 = a1.eval(r), v2 = a2.eval(r), p3 = psi.eval1d(r(2));
        Scalar b2 = (1.0 + (r(1) - r(2) * p3) * v2) * v1;
        Scalar b3 = p3 * v2 * (1.0 + (r(1) - r(0)) * v1);
        return Eigen::Vector4d(v1, v2, b2, b3);
    };

    Built out;
    out.dim = 3;
    out.entries = [rates](const Vector& r) {
        Eigen::Vector4d v = rates(r);
        Matrix off = Matrix::Zero(3, 3);
        off(0, 1) = v(0);
        off(1, 0) = v(2);
        off(1, 2) = v(1);
        off(2, 1) = v(3);
        return off;
    };
    out.stationary = [rates](const Vector& r) {
        Eigen::Vector4d v = rates(r);
        Vector w(3);
        w(2) = 1.0;
        w(1) = v(3) / v(1);         // pi_2 / pi_3 = b3 / a2
        w(0) = w(1) * v(2) / v(0);  // pi_1 / pi_2 = b2 / a1
        return w;
    };
    out.potential = PotentialField{
        [psi](const Vector& r) {
            return integrate([&psi](Scalar w) { return std::log(psi.eval1d(w)); }, 0.0, r(2));
        },
        [psi](const Vector& r) {
            Vector g = Vector::Zero(3);
            g(2) = std::log(psi.eval1d(r(2)));
            return g;
        },
    };
    return out;
}

}  // namespace

RateFamily build_model(ModelSpec spec) {
    if (spec.label.empty()) spec.label = variant_name(spec);

    Built built;
    if (const auto* s = std::get_if<ConstantSpec>(&spec.value)) built = build_constant(*s);
    else if (const auto* s = std::get_if<GibbsAffineSpec>(&spec.value)) built = build_gibbs_affine(*s);
    else if (const auto* s = std::get_if<SlowAdaptationSpec>(&spec.value)) {
        require(s->base != nullptr, ErrorCode::InvalidParameters, "slow_adaptation needs a base model");
        RateFamily base = build_model(*s->base);
        built = build_slow_adaptation(*s, base);
    } else if (const auto* s = std::get_if<BirthDeathPhiPsiSpec>(&spec.value)) built = build_birth_death(*s);
    else if (const auto* s = std::get_if<MetropolisGGibbsSpec>(&spec.value)) built = build_metropolis(*s);
    else if (const auto* s = std::get_if<ThreeStateBSpec>(&spec.value)) built = build_three_state_b(*s);
    else if (const auto* s = std::get_if<ThreeStateNonGibbsSpec>(&spec.value)) built = build_three_state_non_gibbs(*s);
    else if (const auto* s = std::get_if<NearestNeighborCostSpec>(&spec.value)) built = build_nearest_neighbor(*s);
    else if (const auto* s = std::get_if<TelecomSpec>(&spec.value)) built = build_telecom(*s);
    else if (const auto* s = std::get_if<NonLocallyGibbsSpec>(&spec.value)) built = build_non_locally_gibbs(*s);
    else fail(ErrorCode::InvalidParameters, "unknown model variant");

    RateFamily family;
    family.spec_ = std::make_shared<const ModelSpec>(std::move(spec));
    family.dim_ = built.dim;
    family.entries_ = std::move(built.entries);
    family.stationary_ = std::move(built.stationary);
    family.potential_ = std::move(built.potential);
    family.gibbs_ = std::move(built.gibbs);

    // Spot-check the closed-form stationary law against the generator.
    if (family.has_analytic_stationary()) {
        std::mt19937_64 rng = make_stream(0x57a710, 7);
        for (int k = 0; k < 25; ++k) {
            SimplexPoint r = random_simplex_point(rng, family.dim(), 1e-3);
            Vector pi = family.analytic_stationary(r.weights()).weights();
            Matrix gamma = family(r).entries();
            Scalar residual = (gamma.transpose() * pi).lpNorm<1>();
            require(residual <= kStationaryCheckTol, ErrorCode::InvalidParameters,
                    "closed-form stationary law fails pi Gamma = 0 for model " + family.label());
        }
    }
    return family;
}

LipschitzEstimate lipschitz_estimate(const RateFamily& model, int samples, std::uint64_t seed) {
    require(samples >= 2, ErrorCode::InvalidParameters, "need at least two samples");
    std::mt19937_64 rng = make_stream(seed, 11);
    const Eigen::Index d = model.dim();

    std::vector<Vector> points;
    points.reserve(static_cast<std::size_t>(2 * samples));
    for (int i = 0; i < samples; ++i) {
        Vector r = random_simplex_point(rng, d, 1e-3).weights();
        points.push_back(r);
        // A nearby twin sharpens the estimate toward the local derivative sup.
        Vector delta = random_tangent_vector(rng, d, 1e-3).components();
        Vector twin = r + delta;
        if (twin.minCoeff() > 0.0) points.push_back(twin);
    }

    std::vector<Matrix> gammas;
    gammas.reserve(points.size());
    for (const auto& p : points) gammas.push_back(model(p).entries());

    LipschitzEstimate est;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            Scalar dist = (points[i] - points[j]).lpNorm<1>();
            if (dist < 1e-12) continue;
            Scalar diff = (gammas[i] - gammas[j]).cwiseAbs().sum();
            est.value = std::max(est.value, diff / dist);
            ++est.pairs;
        }
    }
    return est;
}

}  // namespace nlmarkov
