#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "catalog.hpp"
#include "nlmarkov/models.hpp"
#include "nlmarkov/rng.hpp"

using namespace nlmarkov;

namespace {

std::vector<RateFamily> all_catalog_models() {
    std::vector<RateFamily> models;
    for (auto& entry : catalog::solution_suite()) models.push_back(build_model(entry.spec));
    models.push_back(build_model(catalog::symmetric_walk_d2()));
    models.push_back(build_model(catalog::telecom_m1_c2()));
    return models;
}

}  // namespace

TEST_CASE("rate matrix invariants") {
    Matrix ok(2, 2);
    ok << -1.0, 1.0, 2.0, -2.0;
    CHECK_NOTHROW(RateMatrix{ok});

    Matrix negative(2, 2);
    negative << 1.0, -1.0, 2.0, -2.0;
    CHECK_THROWS_AS(RateMatrix{negative}, Error);

    Matrix unbalanced(2, 2);
    unbalanced << -1.0, 2.0, 1.0, -1.0;
    CHECK_THROWS_AS(RateMatrix{unbalanced}, Error);

    Matrix off(2, 2);
    off << 99.0, 3.0, 4.0, 99.0;  // diagonal is rebuilt
    RateMatrix built = RateMatrix::from_off_diagonal(off);
    CHECK(built(0, 0) == -3.0);
    CHECK(built(1, 1) == -4.0);
}

TEST_CASE("irreducibility check") {
    Matrix cycle(2, 2);
    cycle << -1.0, 1.0, 1.0, -1.0;
    CHECK(check_irreducible(RateMatrix(cycle)));

    Matrix absorbing(2, 2);
    absorbing << 0.0, 0.0, 1.0, -1.0;
    CHECK_FALSE(check_irreducible(RateMatrix(absorbing)));

    RateFamily three_state = build_model(catalog::three_state_b(0.7, 0.5, 1.0, 1.0));
    std::mt19937_64 rng = make_stream(7, 0);
    for (int k = 0; k < 5; ++k)
        CHECK(check_irreducible(three_state(random_simplex_point(rng, 3))));
}

TEST_CASE("two-state Gibbs rates by hand") {
    // d = 2, beta = 1, V = 0, W offdiagonal 1, r = (1/2, 1/2):
    // H^1 = H^2, so Psi = 0 and both rates equal 1.
    RateFamily model = build_model(catalog::two_state_gibbs(1.0));
    RateMatrix gamma = evaluate_rates(model, SimplexPoint::uniform(2));
    CHECK(gamma(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(gamma(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("three-state stationary law at kappa = 0") {
    ThreeStateBSpec spec;
    spec.a1 = 1.3;
    spec.a2 = 0.8;
    spec.b2 = 1.1;
    spec.b3 = 0.9;
    spec.kappa = 0.0;
    spec.c = Vector::Zero(3);
    RateFamily model = build_model(ModelSpec{spec, ""});
    Vector pi = model.analytic_stationary(SimplexPoint::uniform(3).weights()).weights();
    Vector expected(3);
    expected << spec.b2 * spec.b3, spec.a1 * spec.b3, spec.a1 * spec.a2;
    expected /= expected.sum();
    CHECK((pi - expected).lpNorm<Eigen::Infinity>() <= 1e-14);

    // All parameters 1: the uniform law.
    ThreeStateBSpec unit;
    unit.c = Vector::Zero(3);
    RateFamily uniform_model = build_model(ModelSpec{unit, ""});
    Vector uniform_pi = uniform_model.analytic_stationary(SimplexPoint::uniform(3).weights()).weights();
    CHECK((uniform_pi - Vector::Constant(3, 1.0 / 3.0)).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("telecom single class enumerates a tridiagonal chain") {
    RateFamily model = build_model(catalog::telecom_m1_c2());
    CHECK(model.dim() == 3);  // occupancies {0, 1, 2}

    SimplexPoint r(Vector((Vector(3) << 0.5, 0.3, 0.2).finished()));
    Scalar mean = 0.3 + 2.0 * 0.2;
    Matrix gamma = model(r).entries();
    Scalar lambda = 1.1, mu = 0.9, g = 0.6;
    CHECK(gamma(0, 1) == doctest::Approx(lambda + g * mean).epsilon(1e-14));
    CHECK(gamma(1, 2) == doctest::Approx(lambda + g * mean).epsilon(1e-14));
    CHECK(gamma(1, 0) == doctest::Approx(mu + g).epsilon(1e-14));
    CHECK(gamma(2, 1) == doctest::Approx(2.0 * (mu + g)).epsilon(1e-14));
    CHECK(gamma(0, 2) == 0.0);
    CHECK(gamma(2, 0) == 0.0);
}

TEST_CASE("telecom state space is graded lexicographic") {
    TelecomStateSpace space = telecom_state_space(3, {1, 2});
    REQUIRE(space.dim() == 6);
    // (0,0), then singles (0,1), (1,0), then (1,1), (2,0), then (3,0).
    CHECK(space.states[0] == Eigen::Vector2i(0, 0));
    CHECK(space.states[1] == Eigen::Vector2i(0, 1));
    CHECK(space.states[2] == Eigen::Vector2i(1, 0));
    CHECK(space.states[3] == Eigen::Vector2i(1, 1));
    CHECK(space.states[4] == Eigen::Vector2i(2, 0));
    CHECK(space.states[5] == Eigen::Vector2i(3, 0));
    CHECK(space.index_of(Eigen::Vector2i(1, 1)) == 3);
}

TEST_CASE("slow adaptation endpoints") {
    ModelSpec base_spec = catalog::two_state_gibbs(2.0);
    RateFamily base = build_model(base_spec);
    Vector pi_star(2);
    pi_star << 0.3, 0.7;

    RateFamily frozen = build_model(catalog::slow_adaptation(base_spec, pi_star, 0.0));
    RateFamily full = build_model(catalog::slow_adaptation(base_spec, pi_star, 1.0));
    Matrix at_star = base(SimplexPoint(pi_star)).entries();

    std::mt19937_64 rng = make_stream(11, 0);
    for (int k = 0; k < 10; ++k) {
        SimplexPoint r = random_simplex_point(rng, 2);
        CHECK((frozen(r).entries() - at_star).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((full(r).entries() - base(r).entries()).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("lipschitz estimates") {
    RateFamily constant = build_model(catalog::symmetric_walk_d2());
    CHECK(lipschitz_estimate(constant, 20, 3).value == 0.0);

    RateFamily gibbs = build_model(catalog::two_state_gibbs(2.0));
    Scalar est = lipschitz_estimate(gibbs, 50, 3).value;
    CHECK(est > 0.0);
    CHECK(std::isfinite(est));

    // The slowed family contracts the argument by lambda, so the estimate
    // scales linearly once lambda is small enough for the local regime.
    ModelSpec base_spec = catalog::two_state_gibbs(1.0);
    Vector pi_star(2);
    pi_star << 0.4, 0.6;
    Scalar est_l = lipschitz_estimate(
        build_model(catalog::slow_adaptation(base_spec, pi_star, 0.04)), 60, 3).value;
    Scalar est_half = lipschitz_estimate(
        build_model(catalog::slow_adaptation(base_spec, pi_star, 0.02)), 60, 3).value;
    Scalar ratio = est_l / est_half;
    CHECK(ratio >= 1.8);
    CHECK(ratio <= 2.2);
}

TEST_CASE("catalog-wide rate matrix invariants") {
    std::mt19937_64 rng = make_stream(2024, 1);
    for (const RateFamily& model : all_catalog_models()) {
        for (int k = 0; k < 100; ++k) {
            SimplexPoint r = random_simplex_point(rng, model.dim());
            Matrix gamma = model(r).entries();
            for (Eigen::Index x = 0; x < gamma.rows(); ++x) {
                Scalar row = gamma.row(x).sum();
                CHECK(std::abs(row) <= 1e-12 * std::max(1.0, gamma.row(x).cwiseAbs().sum()));
                for (Eigen::Index y = 0; y < gamma.cols(); ++y)
                    if (x != y) CHECK(gamma(x, y) >= 0.0);
            }
        }
    }
}

TEST_CASE("detailed balance holds for Gibbs-type families") {
    std::mt19937_64 rng = make_stream(31, 2);
    for (const ModelSpec& spec :
         {catalog::two_state_gibbs(1.5), catalog::gibbs_affine_d3(), catalog::metropolis_d3()}) {
        RateFamily model = build_model(spec);
        for (int k = 0; k < 20; ++k) {
            SimplexPoint r = random_simplex_point(rng, model.dim(), 1e-3);
            Vector pi = model.analytic_stationary(r.weights()).weights();
            Matrix gamma = model(r).entries();
            for (Eigen::Index x = 0; x < model.dim(); ++x)
                for (Eigen::Index y = x + 1; y < model.dim(); ++y)
                    CHECK(std::abs(pi(x) * gamma(x, y) - pi(y) * gamma(y, x)) <= 1e-10);
        }
    }
}

TEST_CASE("the non-Gibbs three-state family breaks detailed balance by a factor of 2") {
    RateFamily model = build_model(catalog::three_state_non_gibbs());
    std::mt19937_64 rng = make_stream(57, 3);
    for (int k = 0; k < 10; ++k) {
        SimplexPoint r = random_simplex_point(rng, 3, 1e-3);
        Matrix gamma = model(r).entries();
        Vector pi = model.analytic_stationary(r.weights()).weights();
        Scalar rate_ratio = gamma(0, 1) / gamma(1, 0);
        Scalar law_ratio = pi(1) / pi(0);
        CHECK(rate_ratio == doctest::Approx(0.5 * law_ratio).epsilon(1e-12));
        CHECK(std::abs(rate_ratio - law_ratio) > 1e-3);
    }
}

TEST_CASE("telecom stationary law balances the generator") {
    RateFamily model = build_model(catalog::telecom_m2_c3());
    std::mt19937_64 rng = make_stream(77, 4);
    for (int k = 0; k < 10; ++k) {
        SimplexPoint r = random_simplex_point(rng, model.dim(), 1e-3);
        Vector pi = model.analytic_stationary(r.weights()).weights();
        Vector residual = model(r).entries().transpose() * pi;
        CHECK(residual.lpNorm<1>() <= 1e-10);
    }
}

TEST_CASE("invalid specifications are rejected") {
    GibbsAffineSpec bad;
    bad.V = Vector::Zero(2);
    bad.W = Matrix::Zero(2, 2);
    bad.W(0, 1) = 1.0;  // not symmetric
    bad.beta = 1.0;
    CHECK_THROWS_AS(build_model(ModelSpec{bad, ""}), Error);

    GibbsAffineSpec negative_beta;
    negative_beta.V = Vector::Zero(2);
    negative_beta.W = Matrix::Zero(2, 2);
    negative_beta.beta = -1.0;
    CHECK_THROWS_AS(build_model(ModelSpec{negative_beta, ""}), Error);

    // Disconnected adjacency.
    GibbsAffineSpec disconnected;
    disconnected.V = Vector::Zero(4);
    disconnected.W = Matrix::Zero(4, 4);
    disconnected.beta = 1.0;
    disconnected.adjacency = Matrix::Zero(4, 4);
    disconnected.adjacency(0, 1) = disconnected.adjacency(1, 0) = 1.0;
    disconnected.adjacency(2, 3) = disconnected.adjacency(3, 2) = 1.0;
    CHECK_THROWS_AS(build_model(ModelSpec{disconnected, ""}), Error);

    ThreeStateNonGibbsSpec mismatched;
    mismatched.c = Vector(3);
    mismatched.c << 0.0, 1.0, 0.5;  // c2 != c3
    CHECK_THROWS_AS(build_model(ModelSpec{mismatched, ""}), Error);

    NonLocallyGibbsSpec out_of_range{Expression::parse("1.5"), Expression::parse("0.5"),
                                     Expression::parse("0.5")};
    CHECK_THROWS_AS(build_model(ModelSpec{out_of_range, ""}), Error);
}
