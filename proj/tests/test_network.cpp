#include <doctest.h>

#include <cmath>

#include "convmg/network.hpp"
#include "convmg/oracle.hpp"
#include "convmg/spectral.hpp"
#include "test_helpers.hpp"

using namespace convmg;

namespace {
const ProblemSpec kP5 = problem_by_name("p5");
}

TEST_CASE("level 1 operator is the fine operator") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    GridField x = test::random_field(7, 7, 401);
    CHECK(test::max_abs_diff(net.apply_level(1, x), apply_fine_operator(kP5, x)) == 0.0);
}

TEST_CASE("level 2 operator equals the dense Galerkin product") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    const int n = 7, m = 3;
    // dense P (m^2 x n^2) by probing conv_down, A by probing the fine operator
    std::vector<std::vector<double>> P(m * m, std::vector<double>(n * n));
    for (int col = 0; col < n * n; ++col) {
        GridField e(n, n);
        e.data()[col] = 1.0;
        GridField img = conv_down(e, bilinear_kernel(), {2, 2});
        for (int row = 0; row < m * m; ++row) P[row][col] = img.data()[row];
    }
    DenseOperator A = assemble([&](const GridField& v) { return apply_fine_operator(kP5, v); }, n, n);
    // PAP^T applied to a random coarse field
    GridField xc = test::random_field(m, m, 402);
    std::vector<double> t1(n * n, 0.0);  // P^T xc
    for (int row = 0; row < m * m; ++row)
        for (int col = 0; col < n * n; ++col) t1[col] += P[row][col] * xc.data()[row];
    std::vector<double> t2(n * n, 0.0);  // A P^T xc
    for (int i = 0; i < n * n; ++i)
        for (int j = 0; j < n * n; ++j) t2[i] += A.at(i, j) * t1[j];
    GridField want(m, m);
    for (int row = 0; row < m * m; ++row) {
        double acc = 0.0;
        for (int col = 0; col < n * n; ++col) acc += P[row][col] * t2[col];
        want.data()[row] = acc;
    }
    CHECK(test::max_abs_diff(net.apply_level(2, xc), want) < 1e-12);
}

TEST_CASE("level operators are symmetric at every level") {
    for (const auto& name : problem_names()) {
        MgNetwork net = build_model(ModelKind::LMG, 4, problem_by_name(name));
        for (int level = 1; level <= net.num_levels() + 1; ++level) {
            const int side = net.side_at(level);
            GridField x = test::random_field(side, side, 500 + level);
            GridField y = test::random_field(side, side, 600 + level);
            const double lhs = dot(net.apply_level(level, x), y);
            const double rhs = dot(x, net.apply_level(level, y));
            CHECK(test::rel_err(lhs, rhs) < 1e-12);
        }
    }
}

TEST_CASE("one LMG smoothing sweep at level 1 is damped Jacobi with omega = 4/5") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    GridField x = test::random_field(7, 7, 403);
    GridField b = test::random_field(7, 7, 404);
    GridField got = net.smooth(1, x, b, 1);
    // diagonal is 1 after preconditioning, so x + 0.8*(b - Ax)
    GridField r = axpy(1.0, b, -1.0, apply_fine_operator(kP5, x));
    GridField want = axpy(1.0, x, 0.8, r);
    CHECK(test::max_abs_diff(got, want) < 1e-14);
}

TEST_CASE("smoothing keeps the exact solution fixed") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    GridField x = test::random_field(7, 7, 405);
    GridField b = net.apply_level(1, x);
    for (int sweeps : {1, 3}) {
        GridField got = net.smooth(1, x, b, sweeps);
        CHECK(test::max_abs_diff(got, x) < 1e-13);
    }
}

TEST_CASE("degree-1 polynomial smoothing equals x + (a0 I + a1 A)(b - Ax) densely") {
    const double a0 = 0.6, a1 = -0.3;
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    // custom two-kernel smoother on level 1 without diagonal rescaling
    net.params.add("alpha0", identity_kernel(a0), false);
    net.params.add("alpha1", identity_kernel(a1), false);
    net.levels[0].smoothers = {2, 3};
    net.levels[0].diag_scale.reset();
    GridField x = test::random_field(7, 7, 406);
    GridField b = test::random_field(7, 7, 407);
    GridField got = net.smooth(1, x, b, 1);
    DenseOperator A = assemble([&](const GridField& v) { return apply_fine_operator(kP5, v); }, 7, 7);
    GridField r = axpy(1.0, b, -1.0, A.apply(x));
    GridField want = axpy(1.0, x, 1.0, axpy(a0, r, a1, A.apply(r)));
    CHECK(test::max_abs_diff(got, want) < 1e-13);
}

TEST_CASE("V-cycle leaves the exact solution invariant for every kind and problem") {
    for (const auto& name : problem_names()) {
        ProblemSpec problem = problem_by_name(name);
        const int n = grid_side(3);
        DenseOperator A =
            assemble([&](const GridField& v) { return apply_fine_operator(problem, v); }, n, n);
        GridField b = test::random_field(n, n, 408);
        GridField xstar = exact_solve(A, b);
        for (ModelKind kind : all_model_kinds()) {
            MgNetwork net = build_model(kind, 3, problem);
            GridField after;
            if (kind == ModelKind::UNET) {
                // the U-Net is N in x + N(b - Ax); zero residual fixes x
                GridField r = axpy(1.0, b, -1.0, apply_fine_operator(problem, xstar));
                after = axpy(1.0, xstar, 1.0, net.apply_n(r));
            } else {
                after = net.vcycle(1, xstar, b);
            }
            CHECK(test::max_abs_diff(after, xstar) < 1e-10);
        }
    }
}

TEST_CASE("one LMG V-cycle contracts the error on the five-point problem") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    const int n = 7;
    DenseOperator A = assemble([&](const GridField& v) { return apply_fine_operator(kP5, v); }, n, n);
    for (std::uint64_t seed : {409ULL, 410ULL, 411ULL}) {
        GridField e0 = test::random_field(n, n, seed);
        GridField xstar = test::random_field(n, n, seed + 50);
        GridField b = A.apply(xstar);
        GridField x0 = axpy(1.0, xstar, 1.0, e0);
        GridField x1 = net.vcycle(1, x0, b);
        GridField e1 = axpy(1.0, x1, -1.0, xstar);
        CHECK(norm2(e1) / norm2(e0) <= 0.11 + 0.02);
    }
}

TEST_CASE("vcycle with zero input and zero rhs returns zero") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    GridField z(7, 7);
    GridField out = net.vcycle(1, z, z);
    CHECK(norm2(out) == 0.0);
}

TEST_CASE("apply_n is linear") {
    for (ModelKind kind : {ModelKind::LMG, ModelKind::S1MG_S, ModelKind::UNET, ModelKind::FMG}) {
        MgNetwork net = build_model(kind, 3, kP5);
        GridField r1 = test::random_field(7, 7, 412);
        GridField r2 = test::random_field(7, 7, 413);
        const double a = 0.83, b = -1.37;
        GridField lhs = net.apply_n(axpy(a, r1, b, r2));
        GridField rhs = axpy(a, net.apply_n(r1), b, net.apply_n(r2));
        CHECK(test::max_abs_diff(lhs, rhs) < 1e-12 * std::max(1.0, norm2(rhs)));
    }
}

TEST_CASE("dense assembly of N for LMG at J=3 is invertible") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    DenseOperator N = assemble([&](const GridField& r) { return net.apply_n(r); }, 7, 7);
    CHECK(dense_rank(N) == N.dim());
}

TEST_CASE("a unit impulse through N reaches the whole grid") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    GridField out = net.apply_n(GridField::unit_impulse(7, 7, 0, 0));
    CHECK(out.all_finite());
    CHECK(std::abs(out(6, 6)) > 0.0);  // multilevel nonlocality
}

TEST_CASE("apply_error_propagation matches dense I - NA at J=3") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    DenseOperator N = assemble([&](const GridField& r) { return net.apply_n(r); }, 7, 7);
    DenseOperator A = assemble([&](const GridField& v) { return apply_fine_operator(kP5, v); }, 7, 7);
    DenseOperator NA = N.multiply(A);
    GridField z = test::random_field(7, 7, 414);
    GridField want = axpy(1.0, z, -1.0, NA.apply(z));
    CHECK(test::max_abs_diff(net.apply_error_propagation(z), want) < 1e-12);
}

TEST_CASE("repeated error propagation decays at the Table-I rate") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    GridField z = test::random_field(7, 7, 415);
    GridField y = z;
    for (int t = 0; t < 10; ++t) y = net.apply_error_propagation(y);
    const double rate = std::pow(norm2(y) / norm2(z), 0.1);
    CHECK(rate < 0.11 + 0.05);
}

TEST_CASE("LMG at J=3 reproduces the Table-I entry") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    LossConfig cfg;
    cfg.seed = 1234;
    CHECK(std::abs(loss(net, cfg) - 0.11) < 0.02);
}

TEST_CASE("s1MG(s) at initialization evaluates to a finite estimate on P5, J=5") {
    // The bilinear-initialized smoother overshoots (its entries sum to 2),
    // so the untrained cycle sits slightly above 1: measured rho_exact at
    // J=3 is 0.978 and rho1 at J=5 is about 1.26. Training is what brings
    // it down; here we pin finiteness and the observed starting region.
    MgNetwork net = build_model(ModelKind::S1MG_S, 5, kP5);
    LossConfig cfg;
    cfg.seed = 7;
    const double rho = loss(net, cfg);
    CHECK(std::isfinite(rho));
    CHECK(rho < 1.5);
}

TEST_CASE("s3MG(s) assigns its three kernels cyclically") {
    MgNetwork net = build_model(ModelKind::S3MG_S, 7, kP5);
    REQUIRE(net.num_levels() == 6);
    const int s1 = net.params.index_of("w_tilde_1");
    const int s2 = net.params.index_of("w_tilde_2");
    const int s3 = net.params.index_of("w_tilde_3");
    const int want[6] = {s1, s2, s3, s1, s2, s3};
    for (int l = 0; l < 6; ++l) CHECK(net.levels[l].smoothers[0] == want[l]);
}

TEST_CASE("model structure: levels, coarse solvers, sweep counts") {
    MgNetwork lmg = build_model(ModelKind::LMG, 5, kP5);
    CHECK(lmg.num_levels() == 4);
    CHECK(lmg.coarse.type == CoarseSolver::Type::ExactScalar);
    CHECK(lmg.pre_sweeps == 2);
    CHECK(lmg.post_sweeps == 2);

    MgNetwork rs = build_model(ModelKind::S1MG_RS, 5, kP5);
    CHECK(rs.params.trainable_indices().size() == 2);
    CHECK_FALSE(rs.levels[0].diag_scale.has_value());
    // one shared pair referenced by all levels
    for (const auto& lp : rs.levels) {
        CHECK(lp.restriction == rs.levels[0].restriction);
        CHECK(lp.smoothers[0] == rs.levels[0].smoothers[0]);
    }

    MgNetwork s1 = build_model(ModelKind::S1MG_S, 5, kP5);
    CHECK(s1.params.trainable_indices().size() == 1);
    CHECK(s1.levels[2].diag_scale.has_value());

    MgNetwork un = build_model(ModelKind::UNET, 5, kP5);
    CHECK(un.num_levels() == 4);  // four descend/ascend pairs + bottom block
    CHECK(un.coarse.type == CoarseSolver::Type::ConvPair);
    CHECK(un.coarse.k1 == un.coarse.k2);
    CHECK(un.params.trainable_indices().size() == 9);

    MgNetwork fmg = build_model(ModelKind::FMG, 5, kP5);
    CHECK(fmg.num_levels() == 4);
    CHECK(fmg.coarse.type == CoarseSolver::Type::ConvPair);
    CHECK(fmg.params.trainable_indices().size() == 10);
    CHECK(fmg.side_at(fmg.num_levels() + 1) == 1);

    CHECK_THROWS_AS(build_model(ModelKind::LMG, 1, kP5), std::invalid_argument);
}

TEST_CASE("fixed-size kinds keep their depth at larger J") {
    MgNetwork fmg = build_model(ModelKind::FMG, 5, kP5);
    MgNetwork at7 = instantiate_at(fmg, 7);
    CHECK(at7.num_levels() == 4);
    CHECK(at7.side_at(5) == grid_side(3));  // ConvPair block three halvings up from 127
    CHECK(at7.fine_side() == 127);
    MgNetwork un7 = instantiate_at(build_model(ModelKind::UNET, 5, kP5), 7);
    CHECK(un7.num_levels() == 4);
    CHECK_THROWS_AS(serialize_to_depth(fmg, 7), std::invalid_argument);
}

TEST_CASE("serialization extends trained kernels without copying values") {
    MgNetwork s1 = build_model(ModelKind::S1MG_S, 3, kP5);
    MgNetwork deep = serialize_to_depth(s1, 5);
    CHECK(deep.num_levels() == 4);
    CHECK(deep.trained_J == 3);
    // same single shared kernel index on every level
    for (const auto& lp : deep.levels) CHECK(lp.smoothers[0] == s1.levels[0].smoothers[0]);
    // kernels byte-identical to the source network
    for (std::size_t i = 0; i < s1.params.kernels.size(); ++i)
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q)
                CHECK(deep.params.kernels[i](p, q) == s1.params.kernels[i](p, q));
    CHECK_THROWS_AS(serialize_to_depth(deep, 2), std::invalid_argument);
}

TEST_CASE("serialization at the same depth is idempotent") {
    MgNetwork s1 = build_model(ModelKind::S1MG_S, 4, kP5);
    MgNetwork same = serialize_to_depth(s1, 4);
    CHECK(same.num_levels() == s1.num_levels());
    GridField z = test::random_field(15, 15, 416);
    CHECK(test::max_abs_diff(same.apply_error_propagation(z), s1.apply_error_propagation(z)) == 0.0);
}

TEST_CASE("serialized LMG matches a freshly built one") {
    MgNetwork small = build_model(ModelKind::LMG, 3, kP5);
    MgNetwork big = serialize_to_depth(small, 5);
    MgNetwork fresh = build_model(ModelKind::LMG, 5, kP5);
    GridField z = test::random_field(31, 31, 417);
    CHECK(test::max_abs_diff(big.apply_error_propagation(z), fresh.apply_error_propagation(z)) <
          1e-14);
}

TEST_CASE("diag scale: level 1 is all ones, level 2 matches the dense diagonal") {
    MgNetwork net = build_model(ModelKind::LMG, 3, kP5);
    GridField d1 = compute_diag_scale(net, 1);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) CHECK(d1(i, j) == 1.0);
    DenseOperator A2 = assemble([&](const GridField& v) { return net.apply_level(2, v); }, 3, 3);
    GridField d2 = compute_diag_scale(net, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(d2(i, j) == doctest::Approx(1.0 / A2.at(3 * i + j, 3 * i + j)).epsilon(1e-12));
}

TEST_CASE("comb probing equals one-indicator-per-point probing on a 7x7 level") {
    MgNetwork net = build_model(ModelKind::LMG, 4, kP5);  // level 2 lives on 7x7
    GridField comb = compute_diag_scale(net, 2);
    const int n = 7;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            GridField e = GridField::unit_impulse(n, n, i, j);
            const double diag = net.apply_level(2, e)(i, j);
            CHECK(comb(i, j) == doctest::Approx(1.0 / diag).epsilon(1e-13));
        }
}

TEST_CASE("serialization soundness: LMG stays below 0.25 through J=7 on P5") {
    LossConfig cfg;
    cfg.seed = 99;
    double prev = 0.0;
    for (int J = 3; J <= 7; ++J) {
        MgNetwork net = build_model(ModelKind::LMG, J, kP5);
        const double rho = loss(net, cfg);
        CHECK(rho < 0.25);
        CHECK(rho > prev - 0.02);  // slow, roughly monotone growth
        prev = rho;
    }
}

TEST_CASE("U-Net applies through skip connections and stays linear") {
    MgNetwork net = build_model(ModelKind::UNET, 3, kP5);
    CHECK(net.num_levels() == 2);
    GridField zero(7, 7);
    CHECK(norm2(net.apply_n(zero)) == 0.0);
    GridField r = test::random_field(7, 7, 418);
    GridField out = net.apply_n(r);
    CHECK(out.rows() == 7);
    // at identity/bilinear initialization the net is not the zero map
    CHECK(norm2(out) > 0.0);
    CHECK_THROWS_AS(net.vcycle(1, zero, zero), std::invalid_argument);
}
