#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nlmarkov/rng.hpp"
#include "nlmarkov/simplex.hpp"

using namespace nlmarkov;

TEST_CASE("simplex point construction") {
    SimplexPoint p = SimplexPoint::uniform(3);
    CHECK(p.dim() == 3);
    CHECK(std::abs(p.weights().sum() - 1.0) <= 1e-12);

    // Roundoff-scale negatives are absorbed, anything larger is rejected.
    Vector drifted(2);
    drifted << 1.0 + 5e-13, -5e-13;
    SimplexPoint q(drifted);
    CHECK(q.min_coeff() == 0.0);

    Vector bad(2);
    bad << 1.001, -0.001;
    CHECK_THROWS_AS(SimplexPoint{bad}, Error);
}

TEST_CASE("tangent projection") {
    Vector ones = Vector::Ones(3);
    CHECK(tangent_project(ones).components().lpNorm<Eigen::Infinity>() == 0.0);

    Vector v(2);
    v << 1.0, 0.0;
    Vector projected = tangent_project(v).components();
    CHECK(projected(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(projected(1) == doctest::Approx(-0.5).epsilon(1e-15));

    // Idempotence, linearity, and annihilation of constants on random input.
    std::mt19937_64 rng = make_stream(42, 0);
    std::normal_distribution<Scalar> gauss;
    for (int k = 0; k < 20; ++k) {
        Vector w(5);
        for (int i = 0; i < 5; ++i) w(i) = gauss(rng);
        Vector once = tangent_project(w).components();
        Vector twice = tangent_project(once).components();
        CHECK((once - twice).lpNorm<Eigen::Infinity>() <= 1e-14);
        Vector shifted = tangent_project(w + 3.7 * Vector::Ones(5)).components();
        CHECK((once - shifted).lpNorm<Eigen::Infinity>() <= 1e-13);
    }

    Vector inf_input = Vector::Ones(2);
    inf_input(0) = std::numeric_limits<Scalar>::infinity();
    CHECK_THROWS_AS(tangent_project(inf_input), Error);
}

TEST_CASE("helmert basis is an orthonormal basis of H0") {
    for (Eigen::Index d : {2, 3, 5, 7}) {
        Matrix basis = helmert_basis(d);
        CHECK((basis.transpose() * basis - Matrix::Identity(d - 1, d - 1)).cwiseAbs().maxCoeff() <=
              1e-14);
        CHECK(basis.colwise().sum().cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("tangent gradient of linear and symmetric fields") {
    SimplexPoint r(Vector((Vector(3) << 0.2, 0.5, 0.3).finished()));
    Vector c(3);
    c << 1.0, -2.0, 0.5;
    ScalarField linear = [c](const Vector& p) { return p.dot(c); };
    Vector grad = tangent_gradient(linear, r).components();
    Vector expected = tangent_project(c).components();
    CHECK((grad - expected).lpNorm<Eigen::Infinity>() <= 1e-9);

    ScalarField entropy = [](const Vector& p) {
        Scalar acc = 0.0;
        for (Eigen::Index i = 0; i < p.size(); ++i) acc += p(i) * std::log(p(i));
        return acc;
    };
    Vector at_uniform = tangent_gradient(entropy, SimplexPoint::uniform(2)).components();
    CHECK(at_uniform.lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("tangent gradient converges at second order") {
    // Relative entropy against a fixed reference, with its analytic gradient
    // as the oracle.
    Vector pi(3);
    pi << 0.5, 0.3, 0.2;
    ScalarField re = [pi](const Vector& p) {
        Scalar acc = 0.0;
        for (Eigen::Index i = 0; i < 3; ++i) acc += p(i) * std::log(p(i) / pi(i));
        return acc;
    };
    SimplexPoint r(Vector((Vector(3) << 0.25, 0.45, 0.30).finished()));
    Vector analytic =
        tangent_project(Vector((r.weights().array() / pi.array()).log().matrix()) + Vector::Ones(3))
            .components();

    Scalar h = 1e-3;
    Scalar err_h = (tangent_gradient(re, r, h).components() - analytic).lpNorm<Eigen::Infinity>();
    Scalar err_h2 =
        (tangent_gradient(re, r, h / 2).components() - analytic).lpNorm<Eigen::Infinity>();
    Scalar order = std::log2(err_h / err_h2);
    CHECK(order >= 1.9);

    // Smooth test field with a closed-form gradient: the error ratio sits in
    // the second-order band.
    ScalarField smooth = [](const Vector& p) { return std::exp(p(0)) * p(1) + p(2) * p(2) * p(2); };
    Vector coordinate_grad(3);
    coordinate_grad << std::exp(r[0]) * r[1], std::exp(r[0]), 3.0 * r[2] * r[2];
    Vector truth = tangent_project(coordinate_grad).components();
    Scalar e1 = (tangent_gradient(smooth, r, h).components() - truth).lpNorm<Eigen::Infinity>();
    Scalar e2 = (tangent_gradient(smooth, r, h / 2).components() - truth).lpNorm<Eigen::Infinity>();
    CHECK(e1 / e2 >= 3.5);
    CHECK(e1 / e2 <= 4.5);
}

TEST_CASE("tangent gradient ignores additive constants") {
    ScalarField f = [](const Vector& p) { return p(0) * p(0) - 0.3 * p(1); };
    ScalarField g = [](const Vector& p) { return p(0) * p(0) - 0.3 * p(1) + 5.5; };
    SimplexPoint r(Vector((Vector(2) << 0.4, 0.6).finished()));
    // A step large enough that the shifted evaluations do not lose the
    // difference to rounding.
    Scalar h = 1e-3;
    CHECK((tangent_gradient(f, r, h).components() - tangent_gradient(g, r, h).components())
              .lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("tangent gradient rejects boundary points") {
    SimplexPoint r(Vector((Vector(2) << 1e-7, 1.0 - 1e-7).finished()));
    ScalarField f = [](const Vector& p) { return p(0); };
    CHECK_THROWS_AS(tangent_gradient(f, r, 1e-5), Error);
}

TEST_CASE("interior grid enumeration") {
    SimplexGrid g = interior_grid(2, 4, 0.0);
    REQUIRE(g.size() == 5);
    CHECK(g.points[0].weights()(0) == 0.0);
    CHECK(g.points[0].weights()(1) == 1.0);
    CHECK(g.points[2].weights()(0) == 0.5);
    CHECK(g.points[4].weights()(0) == 1.0);

    for (int n : {3, 6, 11}) {
        SimplexGrid g3 = interior_grid(3, n, 0.0);
        CHECK(static_cast<int>(g3.size()) == (n + 1) * (n + 2) / 2);
    }

    // Margin case, against brute-force enumeration of k/10 in [0.15, 0.85].
    int oracle = 0;
    for (int k = 0; k <= 10; ++k)
        if (k / 10.0 >= 0.15 && (10 - k) / 10.0 >= 0.15) ++oracle;
    CHECK(oracle == 7);
    SimplexGrid gm = interior_grid(2, 10, 0.15);
    CHECK(static_cast<int>(gm.size()) == oracle);

    CHECK_THROWS_AS(interior_grid(2, 4, 0.6), Error);   // margin * d >= 1
    CHECK_THROWS_AS(interior_grid(3, 2, 0.33), Error);  // no lattice point clears the margin
}
