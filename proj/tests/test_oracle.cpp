#include <doctest.h>

#include <cmath>

#include "convmg/oracle.hpp"
#include "convmg/problem.hpp"
#include "test_helpers.hpp"

using namespace convmg;

TEST_CASE("assembled five-point operator at J=2 is symmetric with unit diagonal") {
    const int n = grid_side(2);
    ProblemSpec p5 = problem_by_name("p5");
    DenseOperator a = assemble([&](const GridField& x) { return apply_fine_operator(p5, x); }, n, n);
    CHECK(a.is_symmetric(1e-14));
    for (int i = 0; i < a.dim(); ++i) CHECK(a.at(i, i) == doctest::Approx(1.0));
}

TEST_CASE("assembly is linear in the map") {
    Kernel ka = test::random_kernel(3, 301);
    Kernel kb = test::random_kernel(3, 302);
    const double alpha = 0.7, beta = -1.3;
    DenseOperator a = assemble([&](const GridField& x) { return conv_same(x, ka); }, 3, 3);
    DenseOperator b = assemble([&](const GridField& x) { return conv_same(x, kb); }, 3, 3);
    DenseOperator mix = assemble(
        [&](const GridField& x) {
            return axpy(alpha, conv_same(x, ka), beta, conv_same(x, kb));
        },
        3, 3);
    for (int i = 0; i < mix.dim(); ++i)
        for (int j = 0; j < mix.dim(); ++j)
            CHECK(mix.at(i, j) == doctest::Approx(alpha * a.at(i, j) + beta * b.at(i, j)));
}

TEST_CASE("spectral radius of an embedded diagonal") {
    DenseOperator d(2);
    d.at(0, 0) = 3.0;
    d.at(1, 1) = -5.0;
    CHECK(exact_spectral_radius(d) == doctest::Approx(5.0));
}

TEST_CASE("spectral radius of a scaled rotation (complex pair)") {
    const double theta = 0.9, r = 0.7;
    DenseOperator rot(2);
    rot.at(0, 0) = r * std::cos(theta);
    rot.at(0, 1) = -r * std::sin(theta);
    rot.at(1, 0) = r * std::sin(theta);
    rot.at(1, 1) = r * std::cos(theta);
    CHECK(exact_spectral_radius(rot) == doctest::Approx(0.7).epsilon(1e-10));
}

TEST_CASE("exact_solve with the identity returns b") {
    DenseOperator id(9);
    for (int i = 0; i < 9; ++i) id.at(i, i) = 1.0;
    GridField b = test::random_field(3, 3, 303);
    CHECK(test::max_abs_diff(exact_solve(id, b), b) < 1e-14);
}

TEST_CASE("exact_solve round-trips the five-point operator at J=2") {
    const int n = grid_side(2);
    ProblemSpec p5 = problem_by_name("p5");
    DenseOperator a = assemble([&](const GridField& x) { return apply_fine_operator(p5, x); }, n, n);
    GridField x = test::random_field(n, n, 304);
    GridField b = a.apply(x);
    CHECK(test::max_abs_diff(exact_solve(a, b), x) < 1e-10);
}

TEST_CASE("discrete Green function columns are symmetric") {
    const int n = grid_side(2);
    ProblemSpec p5 = problem_by_name("p5");
    DenseOperator a = assemble([&](const GridField& x) { return apply_fine_operator(p5, x); }, n, n);
    // solve against two unit impulses: A^{-1} inherits symmetry
    GridField g1 = exact_solve(a, GridField::unit_impulse(n, n, 0, 1));
    GridField g2 = exact_solve(a, GridField::unit_impulse(n, n, 2, 2));
    CHECK(g1(2, 2) == doctest::Approx(g2(0, 1)).epsilon(1e-12));
}

TEST_CASE("dimension cap is enforced") {
    CHECK_THROWS_AS(DenseOperator(16 * 16), std::invalid_argument);
    CHECK_THROWS_AS(assemble([](const GridField& x) { return x; }, 31, 31), std::invalid_argument);
}

TEST_CASE("dense_rank detects singular and regular matrices") {
    DenseOperator s(3);
    s.at(0, 0) = 1.0;
    s.at(1, 1) = 2.0;
    CHECK(dense_rank(s) == 2);
    s.at(2, 2) = 3.0;
    CHECK(dense_rank(s) == 3);
}
