#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "tic/diagonal.hpp"
#include "tic/errors.hpp"
#include "tic/stochastic.hpp"

using namespace tic;

namespace {

PdeConfig grid(int steps, double L, int nodes) {
    PdeConfig c;
    c.time_steps = steps;
    c.space = SpatialGrid(-L, L, nodes);
    c.scheme = Scheme::implicit_diffusion;
    return c;
}

DiagonalProblem::Separable block(DiscountKernel k, std::function<double(double, double, double, double)> g0,
                                 std::function<double(double)> h0, double alpha = 0.0) {
    DiagonalProblem::Separable s;
    s.g0 = std::move(g0);
    s.h0 = std::move(h0);
    s.alpha = [alpha](double) { return alpha; };
    s.kernel = k;
    s.factorization = factorize_kernel(k, 1.0);
    return s;
}

DiagonalProblem driftless(DiscountKernel k, std::function<double(double, double, double, double)> g0,
                          std::function<double(double)> h0, double alpha = 0.0, double sigma = 1.0) {
    return make_separable_problem(
        "test", 1.0, [](double, double, double, double) { return 0.0; },
        [sigma](double, double, double) { return sigma; }, block(k, std::move(g0), std::move(h0), alpha));
}

double zero_g(double, double, double, double) { return 0.0; }

DiagonalPathConfig paths(int n, std::uint64_t seed = 3) {
    DiagonalPathConfig c;
    c.n_paths = n;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(DecouplingPde, IdentityTerminal) {
    auto prob = driftless(DiscountKernel::exponential(0.0), zero_g, [](double x) { return x; });
    auto cfg = grid(20, 4, 41);
    auto th = solve_decoupling_pde(prob, cfg);
    for (int i = 0; i <= 20; i += 5)
        for (int j = i; j <= 20; ++j)
            for (int k = 0; k < 41; ++k) EXPECT_NEAR(th.at(i, j, k), cfg.space.x(k), 1e-12);
}

TEST(DecouplingPde, DiscountedLinearTerminal) {
    const auto k = DiscountKernel::heterogeneous(0.2, 1.5);
    auto prob = driftless(k, zero_g, [](double x) { return x; });
    auto cfg = grid(20, 4, 41);
    auto th = solve_decoupling_pde(prob, cfg);
    const auto& t = th.times();
    for (int i = 0; i <= 20; i += 4)
        for (int j = i; j <= 20; j += 3)
            for (int n = 0; n < 41; ++n)
                EXPECT_NEAR(th.at(i, j, n), eval_discount(k, DiscountPart::terminal, t[i], 1.0) * cfg.space.x(n), 1e-12);
}

TEST(DecouplingPde, NestedExpectationOracle) {
    // b = 0, sigma = 1, g0 = x^2, h0 = x^2:
    // Theta(t,s,x) = mu(t,T)(x^2 + T - s) + int_s^T nu(t,r)(x^2 + r - s) dr
    const auto k = DiscountKernel::heterogeneous(0.2, 1.5);
    auto sq = [](double x) { return x * x; };
    auto prob = driftless(k, [](double, double x, double, double) { return x * x; }, sq);
    auto cfg = grid(200, 6, 241);
    auto th = solve_decoupling_pde(prob, cfg);
    const auto& t = th.times();
    auto oracle = [&](double tt, double s, double x) {
        const int M = 2000;
        const double h = (1.0 - s) / M;
        double integral = 0.0;
        for (int m = 0; m <= M; ++m) {
            const double r = s + m * h;
            const double w = (m == 0 || m == M) ? 1.0 : (m % 2 ? 4.0 : 2.0);
            integral += w * eval_discount(k, DiscountPart::running, tt, r) * (x * x + r - s);
        }
        return eval_discount(k, DiscountPart::terminal, tt, 1.0) * (x * x + 1.0 - s) + integral * h / 3.0;
    };
    double worst = 0.0;
    for (int i : {0, 50, 100})
        for (int j = i; j <= 200; j += 25)
            for (int n = 0; n < 241; ++n) {
                const double x = cfg.space.x(n);
                if (std::abs(x) > 2.0) continue;
                worst = std::max(worst, std::abs(th.at(i, j, n) - oracle(t[i], t[j], x)));
            }
    EXPECT_LT(worst, 2e-2);
}

TEST(DecouplingPde, ConstantZWeight) {
    // g = z alpha, h = x: Theta(t,s,x) = x + alpha (T - s) under zero-rate discounting
    const double alpha = 0.7;
    auto prob = driftless(DiscountKernel::exponential(0.0), zero_g, [](double x) { return x; }, alpha);
    auto cfg = grid(50, 4, 81);
    auto th = solve_decoupling_pde(prob, cfg);
    const auto& t = th.times();
    for (int j = 0; j <= 50; j += 10)
        for (int n = 20; n <= 60; ++n) EXPECT_NEAR(th.at(0, j, n), cfg.space.x(n) + alpha * (1 - t[j]), 1e-9);
}

TEST(PdeRoute, TrivialScenario) {
    auto prob = driftless(DiscountKernel::exponential(0.0), zero_g, [](double x) { return x; });
    auto cfg = grid(20, 6, 61);
    auto th = solve_decoupling_pde(prob, cfg);
    auto sol = solve_coupled_fsde_bsvie(prob, th, 0.3, paths(2000));
    EXPECT_EQ(sol.route, "pde");
    EXPECT_TRUE(sol.uniqueness_guaranteed);
    // far tails can leave the grid; compare on paths inside it
    for (int p = 0; p < 2000; ++p)
        for (int j = 0; j <= 20; ++j)
            if (std::abs(sol.X(p, j)) < 5.5) ASSERT_NEAR(sol.Y(p, j), sol.X(p, j), 1e-10);
    EXPECT_LT((sol.Z_diag.array() - 1.0).abs().maxCoeff(), 1e-10);
    EXPECT_LT(sol.residual, 5 / std::sqrt(2000.0));
}

TEST(PdeRoute, DiagonalIsTheTraceOfTheTriangle) {
    auto prob = make_lq_diagonal_problem(default_lq_params("lq-heterogeneous"));
    auto th = solve_decoupling_pde(prob, grid(20, 4, 41));
    auto sol = solve_coupled_fsde_bsvie(prob, th, 1.0, paths(500));
    for (int j = 0; j < 20; ++j)
        for (int p = 0; p < std::min(500, 256); ++p) {
            ASSERT_EQ(sol.Z[j](p, j), sol.Z_diag(p, j));
            ASSERT_EQ(sol.Z_diag(p, j), th.slope(j, j, sol.X(p, j)) * prob.sigma(th.times()[j], sol.X(p, j), sol.Y(p, j)));
        }
}

TEST(PdeRoute, HeatResidualWithinBudget) {
    auto prob = driftless(DiscountKernel::exponential(0.0), zero_g, [](double x) { return x * x; });
    auto cfg = grid(50, 6, 121);
    auto th = solve_decoupling_pde(prob, cfg);
    const int P = 10000;
    auto sol = solve_coupled_fsde_bsvie(prob, th, 0.5, paths(P));
    const double dx = cfg.space.dx();
    EXPECT_LT(sol.residual, 2 * (1.0 / 50 + dx * dx + 5 / std::sqrt(P)));
}

TEST(PdeRoute, HyperbolicIsFlagged) {
    auto lp = default_lq_params("lq-heterogeneous");
    lp.kernel = DiscountKernel::hyperbolic(1.0, 1.0);
    auto prob = make_lq_diagonal_problem(lp);
    EXPECT_FALSE(prob.separable.has_value());
    auto th = solve_decoupling_pde(prob, grid(10, 4, 41));
    auto sol = solve_coupled_fsde_bsvie(prob, th, 1.0, paths(200));
    EXPECT_FALSE(sol.uniqueness_guaranteed);
    EXPECT_FALSE(sol.warnings.empty());
    EXPECT_THROW(solve_h6_fbsde_reduction(prob, 1.0, th.times(), paths(200)), UnsupportedError);
}

TEST(FbsdeRoute, PureTerminalOracle) {
    // g0 = 0, alpha = 0: Y(s) = mu(s,T) E_s[h0(X_T)] = mu(s,T)(X_s^2 + T - s)
    const auto k = DiscountKernel::heterogeneous(0.2, 1.5);
    auto prob = driftless(k, zero_g, [](double x) { return x * x; });
    const int P = 20000;
    auto times = mc_time_grid(0, 1, 20);
    auto sol = solve_h6_fbsde_reduction(prob, 0.5, times, paths(P));
    EXPECT_EQ(sol.route, "fbsde");
    double sq = 0.0;
    for (int p = 0; p < P; ++p)
        for (int j = 0; j <= 20; ++j) {
            const double ref = eval_discount(k, DiscountPart::terminal, times[j], 1.0) *
                               (sol.X(p, j) * sol.X(p, j) + 1 - times[j]);
            sq += std::pow(sol.Y(p, j) - ref, 2);
        }
    EXPECT_LT(std::sqrt(sq / (P * 21.0)), 5 / std::sqrt(double(P)));
    EXPECT_LT(sol.residual, 0.05);
}

TEST(FbsdeRoute, ConstantZWeight) {
    const double alpha = 0.7;
    auto prob = driftless(DiscountKernel::heterogeneous(0.2, 1.5), zero_g, [](double x) { return x; }, alpha);
    const int P = 20000;
    auto sol = solve_h6_fbsde_reduction(prob, 0.5, mc_time_grid(0, 1, 20), paths(P));
    const double mu = eval_discount(DiscountKernel::heterogeneous(0.2, 1.5), DiscountPart::terminal, 0.0, 1.0);
    EXPECT_NEAR(sol.Y.col(0).mean(), mu * (0.5 + alpha), 0.02);
}

TEST(FbsdeRoute, ExponentialCollapseIsExact) {
    auto prob = make_lq_diagonal_problem(default_lq_params("lq-exponential"));
    ASSERT_TRUE(prob.separable->factorization.mixing_vanishes);
    auto times = mc_time_grid(0, 1, 20);
    auto cfg = paths(2000);
    auto a = solve_h6_fbsde_reduction(prob, 1.0, times, cfg);
    cfg.zero_auxiliary = true;
    auto b = solve_h6_fbsde_reduction(prob, 1.0, times, cfg);
    EXPECT_EQ(a.X, b.X);
    EXPECT_EQ(a.Y, b.Y);
    EXPECT_EQ(a.Z_diag, b.Z_diag);
    EXPECT_EQ(a.sweeps, b.sweeps);
}

TEST(FbsdeRoute, DeterministicAcrossWorkers) {
    auto prob = make_lq_diagonal_problem(default_lq_params("lq-heterogeneous"));
    auto times = mc_time_grid(0, 1, 20);
    auto cfg = paths(2000);
    auto a = solve_h6_fbsde_reduction(prob, 1.0, times, cfg);
    cfg.workers = 4;
    auto b = solve_h6_fbsde_reduction(prob, 1.0, times, cfg);
    EXPECT_EQ(a.Y, b.Y);
    EXPECT_EQ(a.Z_diag, b.Z_diag);
}

TEST(CrossValidation, HeterogeneousWithinBudget) {
    auto prob = make_lq_diagonal_problem(default_lq_params("lq-heterogeneous"));
    auto cfg = grid(40, 4, 81);
    auto th = solve_decoupling_pde(prob, cfg);
    const int P = 4000;
    auto a = solve_coupled_fsde_bsvie(prob, th, 1.0, paths(P));
    auto b = solve_h6_fbsde_reduction(prob, 1.0, th.times(), paths(P));
    auto g = cross_validate_diagonal(a, b);
    const double dx = cfg.space.dx();
    const double budget = 3 * (1.0 / 40 + dx * dx + 5 / std::sqrt(P));
    EXPECT_LT(g.y_gap, budget);
    EXPECT_LT(g.z_diag_gap, budget);
    EXPECT_LT(g.x_gap, budget);
}

TEST(CrossValidation, MismatchesAreRejected) {
    auto prob = driftless(DiscountKernel::exponential(0.0), zero_g, [](double x) { return x; });
    auto th = solve_decoupling_pde(prob, grid(10, 4, 41));
    auto a = solve_coupled_fsde_bsvie(prob, th, 0.0, paths(100));
    auto b = solve_coupled_fsde_bsvie(prob, th, 0.0, paths(100, 4));
    auto c = solve_coupled_fsde_bsvie(prob, th, 0.0, paths(200));
    auto d = solve_coupled_fsde_bsvie(prob, solve_decoupling_pde(prob, grid(12, 4, 41)), 0.0, paths(100));
    EXPECT_NO_THROW(cross_validate_diagonal(a, a));
    EXPECT_THROW(cross_validate_diagonal(a, b), DomainError);
    EXPECT_THROW(cross_validate_diagonal(a, c), DomainError);
    EXPECT_THROW(cross_validate_diagonal(a, d), DomainError);
}

TEST(DiagonalErrors, PicardBudget) {
    auto prob = make_lq_diagonal_problem(default_lq_params("lq-heterogeneous"));
    auto cfg = paths(500);
    cfg.picard_max = 1;
    try {
        solve_h6_fbsde_reduction(prob, 1.0, mc_time_grid(0, 1, 10), cfg);
        FAIL();
    } catch (const PicardError& e) {
        EXPECT_EQ(e.history().size(), 1u);
    }
}

TEST(DiagonalErrors, StructureAndSigma) {
    auto prob = driftless(DiscountKernel::heterogeneous(0.2, 1.5), zero_g, [](double x) { return x; });
    EXPECT_NO_THROW(prob.validate());
    EXPECT_EQ(separable_defect(prob), 0.0);
    auto broken = prob;
    broken.free_term = [](double, double x) { return 2 * x; };
    EXPECT_GT(separable_defect(broken), 0.1);
    EXPECT_THROW(broken.validate(), DomainError);

    auto flat = driftless(DiscountKernel::exponential(0.0), zero_g, [](double x) { return x; }, 0.0, 0.0);
    EXPECT_THROW(solve_decoupling_pde(flat, grid(10, 4, 41)), DomainError);

    auto cfg = grid(10, 4, 41);
    auto wide = make_separable_problem(
        "wide", 1.0, [](double, double, double, double) { return 0.0; },
        [](double, double x, double) { return 1.0 + x * x; }, block(DiscountKernel::exponential(0.0), zero_g, [](double x) { return x; }));
    auto rep = check_sigma(wide, cfg.time_grid(1.0), cfg.space);
    EXPECT_DOUBLE_EQ(rep.min_a, 1.0);
    EXPECT_DOUBLE_EQ(rep.max_a, 289.0);
    EXPECT_DOUBLE_EQ(rep.condition, 289.0);
    auto steep = wide;
    steep.sigma = [](double, double x, double) { return std::exp(2 * x * x); };
    EXPECT_THROW(check_sigma(steep, cfg.time_grid(1.0), cfg.space), DomainError);

    auto bare = prob;
    bare.separable.reset();
    EXPECT_THROW(solve_h6_fbsde_reduction(bare, 0.0, mc_time_grid(0, 1, 10), paths(10)), UnsupportedError);
}

TEST(DiagonalCsv, Layout) {
    auto prob = driftless(DiscountKernel::exponential(0.0), zero_g, [](double x) { return x; });
    auto th = solve_decoupling_pde(prob, grid(4, 4, 41));
    auto sol = solve_coupled_fsde_bsvie(prob, th, 0.0, paths(10));
    std::ostringstream os;
    write_diagonal_csv(sol, 2, os);
    std::istringstream is(os.str());
    std::string line;
    int n = 0;
    std::getline(is, line);
    EXPECT_EQ(line, "path,s_index,s,X,Y,Z_diag");
    std::string last;
    while (std::getline(is, line)) {
        ++n;
        last = line;
    }
    EXPECT_EQ(n, 10);
    EXPECT_EQ(last.back(), ',');  // no Z on the last time point
}
