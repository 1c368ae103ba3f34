#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "catalog.hpp"
#include "nlmarkov/hamiltonian.hpp"
#include "nlmarkov/rng.hpp"

using namespace nlmarkov;

namespace {

std::vector<ModelSpec> duality_specs() {
    return {catalog::symmetric_walk_d2(), catalog::two_state_gibbs(2.0),
            catalog::gibbs_affine_d3(),   catalog::birth_death_d3(),
            catalog::metropolis_d3(),     catalog::three_state_b(0.7, 0.5, 1.0, 1.0),
            catalog::three_state_non_gibbs(), catalog::telecom_m1_c2(),
            catalog::non_locally_gibbs()};
}

}  // namespace

TEST_CASE("Hamiltonian basics") {
    std::mt19937_64 rng = make_stream(3, 0);
    for (const ModelSpec& spec : duality_specs()) {
        RateFamily model = build_model(spec);
        for (int k = 0; k < 5; ++k) {
            SimplexPoint r = random_simplex_point(rng, model.dim());
            CHECK(hamiltonian_H(model, r, Vector::Zero(model.dim())) == 0.0);

            Vector alpha = random_tangent_vector(rng, model.dim(), 1.3).components();
            Scalar base = hamiltonian_H(model, r, alpha);
            Scalar shifted = hamiltonian_H(model, r, alpha + 5.0 * Vector::Ones(model.dim()));
            CHECK(std::abs(base - shifted) <= 1e-12 * std::max(1.0, std::abs(base)));
        }
    }
}

TEST_CASE("two-state Hamiltonian closed form") {
    RateFamily walk = build_model(catalog::symmetric_walk_d2());
    SimplexPoint r = SimplexPoint::uniform(2);
    for (Scalar a : {-2.0, -0.5, 0.3, 1.7}) {
        Vector alpha(2);
        alpha << a, 0.0;
        CHECK(hamiltonian_H(walk, r, alpha) ==
              doctest::Approx(1.0 - std::cosh(a)).epsilon(1e-14));
    }
}

TEST_CASE("overflow guard") {
    RateFamily walk = build_model(catalog::symmetric_walk_d2());
    Vector alpha(2);
    alpha << 800.0, 0.0;
    CHECK_THROWS_AS(hamiltonian_H(walk, SimplexPoint::uniform(2), alpha), Error);
}

TEST_CASE("drift cost vanishes: L(r, r Gamma(r)) = 0") {
    std::mt19937_64 rng = make_stream(4, 0);
    for (const ModelSpec& spec : duality_specs()) {
        RateFamily model = build_model(spec);
        for (int k = 0; k < 5; ++k) {
            SimplexPoint r = random_simplex_point(rng, model.dim(), 1e-3);
            TangentVector drift = vector_field(model, r);
            CHECK(std::abs(lagrangian_L(model, r, drift)) <= 1e-8);
            CHECK(std::abs(lagrangian_L_primal(model, r, drift)) <= 1e-8);
        }
    }
}

TEST_CASE("nonzero-sum flux vectors are rejected at the type level") {
    Vector not_tangent(3);
    not_tangent << 1.0, 0.0, 0.5;
    CHECK_THROWS_AS(TangentVector{not_tangent}, Error);
}

TEST_CASE("primal and dual Lagrangian agree") {
    std::mt19937_64 rng = make_stream(5, 0);
    for (const ModelSpec& spec :
         {catalog::gibbs_affine_d3(), catalog::birth_death_d3(), catalog::three_state_non_gibbs()}) {
        RateFamily model = build_model(spec);
        for (int k = 0; k < 8; ++k) {
            SimplexPoint r = random_simplex_point(rng, model.dim(), 1e-2);
            TangentVector beta = random_tangent_vector(rng, model.dim(), 0.4);
            Scalar dual = lagrangian_L(model, r, beta);
            Scalar primal = lagrangian_L_primal(model, r, beta);
            CHECK(std::abs(dual - primal) <= 1e-6);
            CHECK(dual >= 0.0);
        }
    }
}

TEST_CASE("single-pair Lagrangian has a closed form") {
    // d = 2: minimize c1 l(s/c1) + c2 l((s-b)/c2) over s >= max(0, b);
    // the optimum solves s(s-b) = c1 c2.
    Matrix off(2, 2);
    off << 0.0, 2.0, 1.0, 0.0;
    RateFamily model =
        build_model(catalog::constant_model(RateMatrix::from_off_diagonal(off).entries()));
    SimplexPoint r(Vector((Vector(2) << 0.3, 0.7).finished()));
    const Scalar c1 = 0.3 * 2.0, c2 = 0.7 * 1.0;

    auto ell = [](Scalar z) { return z > 0.0 ? z * std::log(z) - z + 1.0 : 1.0; };
    for (Scalar b : {-0.5, -0.1, 0.2, 0.8}) {
        Vector beta(2);
        beta << -b, b;
        Scalar s = 0.5 * (b + std::sqrt(b * b + 4.0 * c1 * c2));
        Scalar closed = c1 * ell(s / c1) + c2 * ell((s - b) / c2);
        CHECK(std::abs(lagrangian_L(model, r, TangentVector(beta)) - closed) <= 1e-10);
        CHECK(std::abs(lagrangian_L_primal(model, r, TangentVector(beta)) - closed) <= 1e-10);
    }
}

TEST_CASE("flux through dead edges is infeasible") {
    // At the boundary point (0, 1) only the 2 -> 1 edge is active, so flux
    // toward state 2 cannot be produced.
    RateFamily walk = build_model(catalog::symmetric_walk_d2());
    SimplexPoint boundary(Vector((Vector(2) << 0.0, 1.0).finished()));
    Vector beta(2);
    beta << -1.0, 1.0;
    CHECK_THROWS_AS(lagrangian_L(walk, boundary, TangentVector(beta)), Error);
    CHECK_THROWS_AS(lagrangian_L_primal(walk, boundary, TangentVector(beta)), Error);
}

TEST_CASE("duality suite per model") {
    for (const ModelSpec& spec : duality_specs()) {
        RateFamily model = build_model(spec);
        DualityReport report = duality_check(model, 25, 2027);
        CHECK(report.max_dual1_error <= 1e-8);
        CHECK(report.max_roundtrip_error <= 1e-6);
    }
}

TEST_CASE("concavity probe") {
    RateFamily model = build_model(catalog::two_state_gibbs(1.5));
    SimplexPoint r(Vector((Vector(2) << 0.4, 0.6).finished()));
    Vector alpha(2);
    alpha << 0.3, -0.3;

    std::vector<Scalar> rho;
    for (int k = 0; k <= 20; ++k) rho.push_back(-1.0 + 0.1 * k);

    // Along the constant direction the Hamiltonian is flat.
    ConcavityReport flat = concavity_probe(model, r, alpha, Vector::Ones(2), rho);
    CHECK(std::abs(flat.max_second_difference) <= 1e-12);

    // Along a genuine direction it is strictly concave.
    Vector w(2);
    w << 1.0, -1.0;
    ConcavityReport strict = concavity_probe(model, r, alpha, w, rho);
    CHECK(strict.max_second_difference <= -1e-8);

    // The closed-form second derivative matches fine-step finite differences
    // (the coarse grid above carries O(spacing^2) truncation).
    std::vector<Scalar> fine = {-2e-4, 0.0, 2e-4};
    for (Scalar center : {-0.8, -0.2, 0.4, 0.9}) {
        std::vector<Scalar> local;
        for (Scalar offset : fine) local.push_back(center + offset);
        ConcavityReport probe = concavity_probe(model, r, alpha, w, local);
        Scalar analytic = hamiltonian_second_derivative(model, r, alpha, w, center);
        CHECK(std::abs(analytic - probe.second_differences[0]) <= 1e-6);
    }
}

TEST_CASE("strict domination of the linear functional") {
    // H(r, alpha) < <alpha, r Gamma(r)> for alpha in H0 \ {0}.
    std::mt19937_64 rng = make_stream(6, 0);
    std::uniform_real_distribution<Scalar> scale(0.25, 2.0);
    for (const ModelSpec& spec : duality_specs()) {
        RateFamily model = build_model(spec);
        for (int k = 0; k < 20; ++k) {
            SimplexPoint r = random_simplex_point(rng, model.dim(), 0.05);
            Vector alpha = random_tangent_vector(rng, model.dim(), scale(rng)).components();
            Vector drift = vector_field(model, r).components();
            CHECK(hamiltonian_H(model, r, alpha) < alpha.dot(drift) - 1e-12);
        }
    }
}

TEST_CASE("subsolution checks") {
    SimplexGrid grid2 = interior_grid(2, 100, 0.02);
    RateFamily strong = build_model(catalog::two_state_gibbs(2.0));

    // The zero candidate is trivially a solution.
    SubsolutionReport zero = subsolution_check(strong, make_zero_candidate(2), grid2);
    CHECK(zero.verdict == SubsolutionVerdict::Solution);
    CHECK(zero.max_abs_value == 0.0);

    // The locally Gibbs J solves the PDE with analytic gradients.
    SubsolutionReport gibbs =
        subsolution_check(strong, make_locally_gibbs_candidate(strong), grid2);
    CHECK(gibbs.verdict == SubsolutionVerdict::Solution);
    CHECK(gibbs.max_abs_value <= 1e-7);

    // The solvable model outside the locally Gibbs class also solves it.
    RateFamily nlg = build_model(catalog::non_locally_gibbs());
    SimplexGrid grid3 = interior_grid(3, 25, 0.02);
    SubsolutionReport outside =
        subsolution_check(nlg, make_locally_gibbs_candidate(nlg), grid3);
    CHECK(outside.verdict == SubsolutionVerdict::Solution);
    CHECK(outside.max_abs_value <= 1e-7);

    // Relative entropy against the wrong reference violates the PDE.
    Vector skew(2);
    skew << 0.9, 0.1;
    SubsolutionReport wrong = subsolution_check(
        strong, make_relative_entropy_candidate(SimplexPoint(skew)), grid2);
    CHECK(wrong.verdict == SubsolutionVerdict::Violation);
}

TEST_CASE("orbital derivatives") {
    RateFamily model = build_model(catalog::birth_death_d3());
    LyapunovCandidate J = make_locally_gibbs_candidate(model);

    std::vector<FixedPointReport> fps = find_fixed_points(model, 6, 3);
    REQUIRE(!fps.empty());
    CHECK(std::abs(orbital_derivative(model, J, fps[0].point)) <= 1e-9);

    // Strictly negative away from equilibrium, for every locally Gibbs model.
    std::mt19937_64 rng = make_stream(7, 0);
    for (const auto& entry : catalog::solution_suite()) {
        RateFamily m = build_model(entry.spec);
        LyapunovCandidate candidate = make_locally_gibbs_candidate(m);
        std::vector<FixedPointReport> equilibria = find_fixed_points(m, 4, 3);
        int checked = 0;
        while (checked < 100) {
            SimplexPoint r = random_simplex_point(rng, m.dim(), 1e-3);
            bool near = false;
            for (const auto& fp : equilibria)
                near = near || (r.weights() - fp.point.weights()).lpNorm<1>() < 1e-3;
            if (near) continue;
            CHECK(orbital_derivative(m, candidate, r) <= -1e-10);
            ++checked;
        }
    }

    CHECK(orbital_derivative(model, make_zero_candidate(3),
                             SimplexPoint::uniform(3)) == 0.0);
}

TEST_CASE("Dirichlet form identities") {
    Matrix sym(2, 2);
    sym << -1.0, 1.0, 1.0, -1.0;
    RateMatrix gamma(sym);
    SimplexPoint pi = SimplexPoint::uniform(2);

    // Constants are annihilated.
    Vector f(2);
    f << 0.3, -1.2;
    CHECK(dirichlet_form(gamma, pi, f, Vector::Constant(2, 4.2)) == doctest::Approx(0.0));

    // Reversible symmetrization oracle on a 3-state reversible chain.
    Matrix off(3, 3);
    off << 0.0, 1.0, 0.5,
           2.0, 0.0, 1.5,
           0.25, 0.75, 0.0;
    RateMatrix rev = RateMatrix::from_off_diagonal(off);
    SimplexPoint pi3 = stationary_distribution(rev);
    // Force detailed balance by reweighting the upper triangle.
    Matrix balanced = Matrix::Zero(3, 3);
    for (Eigen::Index x = 0; x < 3; ++x)
        for (Eigen::Index y = 0; y < 3; ++y)
            if (x != y) balanced(x, y) = off(x, y);
    balanced(1, 0) = pi3[0] * balanced(0, 1) / pi3[1];
    balanced(2, 0) = pi3[0] * balanced(0, 2) / pi3[2];
    balanced(2, 1) = pi3[1] * balanced(1, 2) / pi3[2];
    RateMatrix gamma3 = RateMatrix::from_off_diagonal(balanced);
    SimplexPoint pib = stationary_distribution(gamma3);

    std::mt19937_64 rng = make_stream(8, 0);
    std::normal_distribution<Scalar> gauss;
    for (int k = 0; k < 10; ++k) {
        Vector a(3), b(3);
        for (int i = 0; i < 3; ++i) {
            a(i) = gauss(rng);
            b(i) = gauss(rng);
        }
        Scalar direct = dirichlet_form(gamma3, pib, a, b);
        Scalar sym_form = 0.0;
        for (Eigen::Index x = 0; x < 3; ++x)
            for (Eigen::Index y = 0; y < 3; ++y)
                if (x != y)
                    sym_form += pib[x] * gamma3(x, y) * (a(y) - a(x)) * (b(y) - b(x));
        CHECK(direct == doctest::Approx(0.5 * sym_form).epsilon(1e-12));
    }

    // Stationarity precondition.
    Vector wrong(2);
    wrong << 0.9, 0.1;
    CHECK_THROWS_AS(dirichlet_form(gamma, SimplexPoint(wrong), f, f), Error);
}

TEST_CASE("the two Dirichlet descent representations are not proportional") {
    Matrix sym(2, 2);
    sym << -1.0, 1.0, 1.0, -1.0;
    RateMatrix gamma(sym);
    SimplexPoint pi = SimplexPoint::uniform(2);

    auto ratio_at = [&](Scalar f1, Scalar f2) {
        Vector f(2);
        f << f1, f2;
        Vector root = f.cwiseSqrt();
        Vector logf = f.array().log().matrix();
        return dirichlet_form(gamma, pi, root, root) / dirichlet_form(gamma, pi, f, logf);
    };
    Scalar first = ratio_at(1.2, 0.8);
    Scalar second = ratio_at(1.8, 0.2);
    CHECK(std::abs(first - second) > 0.01);
}

TEST_CASE("Donsker-Varadhan rate for reversible chains") {
    Matrix sym(2, 2);
    sym << -1.0, 1.0, 1.0, -1.0;
    RateMatrix gamma(sym);
    SimplexPoint pi = SimplexPoint::uniform(2);

    CHECK(dv_rate_reversible(gamma, pi, pi) == doctest::Approx(0.0));

    // Oracle: the sup form, maximized over f = (1, g) by golden section in
    // log g.
    SimplexPoint mu(Vector((Vector(2) << 0.8, 0.2).finished()));
    auto objective = [&](Scalar logg) {
        Scalar g = std::exp(logg);
        Scalar gen1 = g - 1.0;      // (Gamma f)(1) with f = (1, g)
        Scalar gen2 = 1.0 - g;      // (Gamma f)(2)
        return -(mu[0] * gen1 / 1.0 + mu[1] * gen2 / g);
    };
    Scalar lo = -20.0, hi = 20.0;
    const Scalar golden = 0.5 * (std::sqrt(5.0) - 1.0);
    Scalar x1 = hi - golden * (hi - lo), x2 = lo + golden * (hi - lo);
    for (int it = 0; it < 200; ++it) {
        if (objective(x1) < objective(x2)) {
            lo = x1;
            x1 = x2;
            x2 = lo + golden * (hi - lo);
        } else {
            hi = x2;
            x2 = x1;
            x1 = hi - golden * (hi - lo);
        }
    }
    Scalar sup_form = objective(0.5 * (lo + hi));
    CHECK(std::abs(dv_rate_reversible(gamma, pi, mu) - sup_form) <= 1e-6);

    // Nonnegativity on random laws.
    std::mt19937_64 rng = make_stream(9, 0);
    for (int k = 0; k < 20; ++k)
        CHECK(dv_rate_reversible(gamma, pi, random_simplex_point(rng, 2)) >= 0.0);

    // Non-reversible input is rejected.
    Matrix skewed(3, 3);
    skewed << -1.0, 1.0, 0.0,
              0.0, -1.0, 1.0,
              1.0, 0.0, -1.0;
    RateMatrix cycle(skewed);
    SimplexPoint pi3 = stationary_distribution(cycle);
    CHECK_THROWS_AS(dv_rate_reversible(cycle, pi3, pi3), Error);
}
