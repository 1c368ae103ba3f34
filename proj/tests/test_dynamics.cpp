#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "catalog.hpp"
#include "nlmarkov/dynamics.hpp"
#include "nlmarkov/rng.hpp"

using namespace nlmarkov;

namespace {

// Bisection root of f'(x) = log x - log(1-x) + 2 beta - 4 beta x on (0, 1/2),
// the independent oracle for the stable branch of the two-state model.
Scalar bisect_x_beta(Scalar beta) {
    auto fprime = [beta](Scalar x) {
        return std::log(x) - std::log(1.0 - x) + 2.0 * beta - 4.0 * beta * x;
    };
    Scalar lo = 1e-12, hi = 0.5 - 1e-12;
    for (int it = 0; it < 200; ++it) {
        Scalar mid = 0.5 * (lo + hi);
        if (fprime(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

Matrix random_ergodic_generator(Eigen::Index d, std::uint64_t seed) {
    std::mt19937_64 rng = make_stream(seed, 0);
    std::uniform_real_distribution<Scalar> unif(0.1, 2.0);
    Matrix off = Matrix::Zero(d, d);
    for (Eigen::Index x = 0; x < d; ++x)
        for (Eigen::Index y = 0; y < d; ++y)
            if (x != y) off(x, y) = unif(rng);
    return off;
}

}  // namespace

TEST_CASE("stationary distribution of small generators") {
    Matrix sym(2, 2);
    sym << -1.0, 1.0, 1.0, -1.0;
    Vector pi = stationary_distribution(RateMatrix(sym)).weights();
    CHECK(pi(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(pi(1) == doctest::Approx(0.5).epsilon(1e-14));

    // Unit three-state chain: uniform law.
    ThreeStateBSpec unit;
    unit.c = Vector::Zero(3);
    RateFamily model = build_model(ModelSpec{unit, ""});
    Vector pi3 = stationary_distribution(model(SimplexPoint::uniform(3))).weights();
    CHECK((pi3 - Vector::Constant(3, 1.0 / 3.0)).lpNorm<Eigen::Infinity>() <= 1e-13);

    Matrix absorbing(2, 2);
    absorbing << 0.0, 0.0, 1.0, -1.0;
    CHECK_THROWS_AS(stationary_distribution(RateMatrix(absorbing)), Error);
}

TEST_CASE("stationary solve agrees with power iteration") {
    RateMatrix gamma = RateMatrix::from_off_diagonal(random_ergodic_generator(5, 99));
    Vector pi = stationary_distribution(gamma).weights();

    // Independent oracle: power iteration on the uniformized kernel.
    Scalar rate = 1.05 * gamma.entries().diagonal().cwiseAbs().maxCoeff();
    Matrix kernel = Matrix::Identity(5, 5) + gamma.entries() / rate;
    Vector mu = Vector::Constant(5, 0.2);
    for (int it = 0; it < 20000; ++it) mu = kernel.transpose() * mu;
    mu /= mu.sum();
    CHECK((pi - mu).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("vector field basics") {
    RateFamily constant = build_model(catalog::symmetric_walk_d2());
    Vector at_corner = vector_field(constant, SimplexPoint(Vector((Vector(2) << 1.0, 0.0).finished())))
                           .components();
    CHECK(at_corner(0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(at_corner(1) == doctest::Approx(1.0).epsilon(1e-15));

    // The uniform point is an equilibrium of the symmetric two-state model.
    RateFamily gibbs = build_model(catalog::two_state_gibbs(2.0));
    CHECK(vector_field(gibbs, SimplexPoint::uniform(2)).components().lpNorm<1>() <= 1e-10);

    // A computed fixed point has a vanishing field.
    Vector pi = stationary_distribution(gibbs(SimplexPoint::uniform(2))).weights();
    CHECK(vector_field(gibbs, SimplexPoint(pi)).components().lpNorm<1>() <= 1e-10);
}

TEST_CASE("integrator matches the matrix exponential on linear models") {
    Matrix off(3, 3);
    off << 0.0, 0.7, 0.2,
           0.4, 0.0, 0.9,
           0.3, 0.5, 0.0;
    RateMatrix gamma = RateMatrix::from_off_diagonal(off);
    RateFamily model = build_model(catalog::constant_model(gamma.entries()));
    Vector p0(3);
    p0 << 0.6, 0.3, 0.1;

    Trajectory traj = integrate_ode(model, SimplexPoint(p0), 1.0, 1e-3);
    Matrix propagator = (gamma.entries().transpose() * 1.0).exp();
    Vector exact = propagator * p0;
    CHECK((traj.back().weights() - exact).lpNorm<Eigen::Infinity>() <= 1e-8);

    // Classical fourth-order global error scaling.
    Vector e1 = integrate_ode(model, SimplexPoint(p0), 1.0, 2e-2).back().weights() - exact;
    Vector e2 = integrate_ode(model, SimplexPoint(p0), 1.0, 1e-2).back().weights() - exact;
    Scalar ratio = e1.lpNorm<Eigen::Infinity>() / e2.lpNorm<Eigen::Infinity>();
    CHECK(ratio >= 14.0);
    CHECK(ratio <= 18.0);
}

TEST_CASE("equilibrium initial conditions stay put") {
    RateFamily gibbs = build_model(catalog::two_state_gibbs(0.5));
    std::vector<FixedPointReport> fps = find_fixed_points(gibbs, 8, 1);
    REQUIRE(fps.size() == 1);
    Trajectory traj = integrate_ode(gibbs, fps[0].point, 10.0, 1e-3);
    CHECK((traj.back().weights() - fps[0].point.weights()).lpNorm<1>() <= 1e-10);
}

TEST_CASE("semigroup property of the flow") {
    RateFamily model = build_model(catalog::gibbs_affine_d3());
    SimplexPoint p0(Vector((Vector(3) << 0.5, 0.2, 0.3).finished()));
    Trajectory first = integrate_ode(model, p0, 1.0, 1e-3);
    Trajectory continued = integrate_ode(model, first.back(), 0.5, 1e-3);
    Trajectory direct = integrate_ode(model, p0, 1.5, 1e-3);
    CHECK((continued.back().weights() - direct.back().weights()).lpNorm<1>() <= 1e-9);
}

TEST_CASE("trajectories remain inside the simplex") {
    for (const auto& entry : catalog::solution_suite()) {
        RateFamily model = build_model(entry.spec);
        Trajectory traj = integrate_ode(model, SimplexPoint::uniform(model.dim()), 2.0, 1e-3,
                                        {1e-9, 10});
        for (const auto& p : traj.points) CHECK(p.min_coeff() >= 0.0);
    }
}

TEST_CASE("coarse steps on a stiff generator are rejected") {
    Matrix stiff(2, 2);
    stiff << -1000.0, 1000.0, 1.0, -1.0;
    RateFamily model = build_model(catalog::constant_model(stiff));
    SimplexPoint p0(Vector((Vector(2) << 1.0, 0.0).finished()));
    CHECK_THROWS_AS(integrate_ode(model, p0, 1.0, 0.01), Error);
}

TEST_CASE("two-state bifurcation: subcritical") {
    RateFamily model = build_model(catalog::two_state_gibbs(0.5));
    std::vector<FixedPointReport> fps = find_fixed_points(model, 12, 5);
    REQUIRE(fps.size() == 1);
    CHECK(fps[0].point[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(fps[0].classification == Stability::Stable);
    CHECK(fps[0].residual <= 1e-10);
}

TEST_CASE("two-state bifurcation: supercritical") {
    const Scalar beta = 2.0;
    RateFamily model = build_model(catalog::two_state_gibbs(beta));
    std::vector<FixedPointReport> fps = find_fixed_points(model, 12, 5);
    REQUIRE(fps.size() == 3);

    Scalar x_beta = bisect_x_beta(beta);
    // Reports are sorted lexicographically: (x_beta, .), (1/2, .), (1-x_beta, .).
    CHECK(fps[0].point[0] == doctest::Approx(x_beta).epsilon(1e-8));
    CHECK(fps[0].classification == Stability::Stable);
    CHECK(fps[1].point[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(fps[1].classification == Stability::Unstable);
    CHECK(fps[2].point[0] == doctest::Approx(1.0 - x_beta).epsilon(1e-8));
    CHECK(fps[2].classification == Stability::Stable);

    // Every reported point solves p = pi(p).
    for (const auto& fp : fps) {
        Vector pi = stationary_distribution(model(fp.point)).weights();
        CHECK((fp.point.weights() - pi).lpNorm<1>() <= 1e-10);
    }

    // Trajectory from (0.6, 0.4) rolls into the nearby minimum (1-x_beta, x_beta).
    Trajectory traj = integrate_ode(model, SimplexPoint(Vector((Vector(2) << 0.6, 0.4).finished())),
                                    20.0, 1e-3, {1e-9, 100});
    Vector target(2);
    target << 1.0 - x_beta, x_beta;
    CHECK((traj.back().weights() - target).lpNorm<1>() <= 1e-6);
}

TEST_CASE("fixed points of catalog models are genuine equilibria") {
    for (const ModelSpec& spec : {catalog::birth_death_d3(), catalog::three_state_non_gibbs(),
                                  catalog::telecom_m1_c2()}) {
        RateFamily model = build_model(spec);
        std::vector<FixedPointReport> fps = find_fixed_points(model, 6, 9);
        REQUIRE(!fps.empty());
        for (const auto& fp : fps) {
            CHECK(fp.residual <= 1e-10);
            Vector pi = stationary_distribution(model(fp.point)).weights();
            CHECK((fp.point.weights() - pi).lpNorm<1>() <= 1e-10);
        }
    }
}
