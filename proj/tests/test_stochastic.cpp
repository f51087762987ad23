#include <cmath>

#include <gtest/gtest.h>

#include "tic/errors.hpp"
#include "tic/pde.hpp"
#include "tic/scenarios.hpp"
#include "tic/stochastic.hpp"

using namespace tic;

namespace {

ProblemSpec brownian(double drift_coef, double sigma) {
    auto s = make_martingale_problem();
    s.dynamics.drift = [drift_coef](double, const Vec& x, const Vec&) { return vec1(drift_coef * x(0)); };
    s.dynamics.diffusion = [sigma](double, const Vec&, const Vec&) { return mat1(sigma); };
    return s;
}

PdeConfig grid(int steps, double L, int nodes) {
    PdeConfig c;
    c.time_steps = steps;
    c.space = SpatialGrid(-L, L, nodes);
    c.scheme = Scheme::implicit_diffusion;
    return c;
}

McConfig mc(int paths, int steps, std::uint64_t seed = 1) {
    McConfig m;
    m.n_paths = paths;
    m.time_steps = steps;
    m.seed = seed;
    return m;
}

CostSpec outer_free(std::function<double(double r, double x, double y)> g, std::function<double(double)> h) {
    CostSpec c;
    c.generator = [g](double, double r, const Vec& x, const Vec&, double y, const RowVec&) { return g(r, x(0), y); };
    c.free_term = [h](double, const Vec& x) { return h(x(0)); };
    c.time_homogeneous_in_t = true;
    return c;
}

}  // namespace

TEST(Simulate, FrozenStateWithoutNoise) {
    auto sp = simulate_sde(brownian(0, 0), constant_policy(0), mc_time_grid(0, 1, 10), 0.7, 50, 1);
    EXPECT_TRUE((sp.X.array() == 0.7).all());
}

TEST(Simulate, BrownianMoments) {
    const int P = 100000;
    auto sp = simulate_sde(brownian(0, 1), constant_policy(0), mc_time_grid(0, 1, 10), 0.0, P, 3);
    const auto XT = sp.X.col(10);
    const double mean = XT.mean();
    const double var = (XT.array() - mean).square().mean();
    EXPECT_LT(std::abs(mean), 4 / std::sqrt(P));
    EXPECT_NEAR(var, 1.0, 0.1);
    EXPECT_NEAR(sp.dW.col(3).mean(), 0.0, 4 * std::sqrt(0.1 / P));
}

TEST(Simulate, EulerOnDecay) {
    auto sp = simulate_sde(brownian(-1, 0), constant_policy(0), mc_time_grid(0, 1, 100), 1.0, 2, 1);
    EXPECT_NEAR(sp.X(0, 100), std::exp(-1.0), 0.01);
    EXPECT_NEAR(sp.X(1, 100), std::pow(0.99, 100), 1e-14);
}

TEST(Simulate, InitialStateAndSampler) {
    auto times = mc_time_grid(0, 1, 5);
    auto sp = simulate_sde(brownian(0, 1), constant_policy(0), times, 1.25, 20, 1);
    EXPECT_TRUE((sp.X.col(0).array() == 1.25).all());
    InitialState xi;
    xi.sampler = [](Rng& r) { return std::uniform_real_distribution<double>(2, 3)(r); };
    auto sq = simulate_sde(brownian(0, 1), constant_policy(0), times, xi, 20, 1);
    EXPECT_GE(sq.X.col(0).minCoeff(), 2.0);
    EXPECT_LE(sq.X.col(0).maxCoeff(), 3.0);
}

TEST(Simulate, DeterministicAcrossWorkers) {
    auto spec = make_scenario("lq-heterogeneous");
    auto times = mc_time_grid(0, 1, 20);
    auto a = simulate_sde(spec, constant_policy(0.3), times, 1.0, 1000, 42, 1);
    auto b = simulate_sde(spec, constant_policy(0.3), times, 1.0, 1000, 42, 4);
    EXPECT_EQ(a.X, b.X);
    EXPECT_EQ(a.dW, b.dW);
    EXPECT_EQ(brownian_increments(times, 1000, 42, 3), a.dW);
    auto c = simulate_sde(spec, constant_policy(0.3), times, 1.0, 1000, 43, 1);
    EXPECT_NE(a.X, c.X);
}

TEST(Simulate, BlowUpIsReported) {
    auto s = brownian(0, 1);
    s.dynamics.drift = [](double, const Vec& x, const Vec&) { return vec1(x(0) * x(0) * 1e200); };
    try {
        simulate_sde(s, constant_policy(0), mc_time_grid(0, 1, 10), 1.0, 3, 1);
        FAIL();
    } catch (const BlowUpError& e) {
        EXPECT_EQ(e.path(), 0);
        EXPECT_GE(e.step(), 1);
    }
}

TEST(Bsde, ConstantTerminal) {
    const int P = 20000;
    auto sp = simulate_sde(brownian(0, 1), constant_policy(0), mc_time_grid(0, 1, 20), 0.0, P, 2);
    auto r = solve_bsde_lsmc(sp, [](double, double, double, double, double) { return 0.0; },
                             [](double) { return 2.0; }, RegressionBasis{});
    EXPECT_LT((r.Y.array() - 2.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE(r.Z.cwiseAbs().maxCoeff(), 5 / std::sqrt(P));
}

TEST(Bsde, LinearDecay) {
    const double lam = 0.8;
    auto sp = simulate_sde(brownian(0, 1), constant_policy(0), mc_time_grid(0, 1, 100), 0.0, 2000, 2);
    auto r = solve_bsde_lsmc(sp, [lam](double, double, double, double y, double) { return -lam * y; },
                             [](double) { return 1.0; }, RegressionBasis{});
    for (int j = 0; j <= 100; j += 10) EXPECT_NEAR(r.Y(5, j), std::exp(-lam * (1 - j / 100.0)), 1e-2);
}

TEST(Bsde, BrownianMartingale) {
    const int P = 20000;
    auto sp = simulate_sde(brownian(0, 1), constant_policy(0), mc_time_grid(0, 1, 20), 0.0, P, 4);
    auto r = solve_bsde_lsmc(sp, [](double, double, double, double, double) { return 0.0; },
                             [](double x) { return x; }, RegressionBasis{});
    // regression noise only; tails of the polynomial fit are rougher than the bulk
    const double y_rms = std::sqrt((r.Y - sp.X).array().square().mean());
    const double z_rms = std::sqrt((r.Z.array() - 1.0).square().mean());
    EXPECT_LT(y_rms, 0.02);
    EXPECT_LT(z_rms, 0.1);
    EXPECT_NEAR(r.Z.mean(), 1.0, 5 / std::sqrt(P));
    EXPECT_NEAR(r.Y(0, 0), 0.0, 5 / std::sqrt(P));
}

TEST(Bsde, AdaptedRegressionIgnoresFuture) {
    auto sp = simulate_sde(brownian(0, 1), constant_policy(0), mc_time_grid(0, 1, 10), 0.0, 500, 4);
    Eigen::MatrixXd target = sp.X.col(7);
    LayerProjector a(sp.X.col(3), RegressionBasis{});
    auto ca = a.coefficients(target);
    sp.X.rightCols(6).reverseInPlace();  // shuffle future states
    LayerProjector b(sp.X.col(3), RegressionBasis{});
    EXPECT_EQ(ca, b.coefficients(target));
}

TEST(Bsvie, ConstantFreeTermConvergesInOneSweep) {
    auto sp = simulate_sde(brownian(0, 1), constant_policy(0), mc_time_grid(0, 1, 20), 0.0, 5000, 2);
    BsvieOptions o;
    o.mode = DiagonalMode::picard;
    auto r = solve_bsvie(sp, outer_free([](double, double, double) { return 0.0; }, [](double) { return 3.0; }), o);
    EXPECT_EQ(r.sweeps, 1);
    EXPECT_LT((r.Y.array() - 3.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE(r.Z_diag.cwiseAbs().maxCoeff(), 5 / std::sqrt(5000.0));
}

TEST(Bsvie, DiagonalDecay) {
    const double lam = 0.6;
    auto sp = simulate_sde(brownian(0, 1), constant_policy(0), mc_time_grid(0, 1, 100), 0.0, 2000, 2);
    auto cost = outer_free([lam](double, double, double y) { return -lam * y; }, [](double) { return 1.0; });
    for (auto mode : {DiagonalMode::lagged, DiagonalMode::picard}) {
        BsvieOptions o;
        o.mode = mode;
        auto r = solve_bsvie(sp, cost, o);
        for (int j = 0; j <= 100; j += 10) EXPECT_NEAR(r.Y(0, j), std::exp(-lam * (1 - j / 100.0)), 1e-2);
    }
}

TEST(Bsvie, TerminalExactness) {
    auto spec = make_scenario("lq-heterogeneous");
    auto sp = simulate_sde(spec, constant_policy(0.1), mc_time_grid(0, 1, 20), 1.0, 500, 2);
    auto r = solve_bsvie(sp, spec.cost, BsvieOptions{});
    for (int p = 0; p < 500; ++p) EXPECT_EQ(r.Y(p, 20), spec.cost.free_term(1.0, vec1(sp.X(p, 20))));
}

TEST(Bsvie, ReducesToBsdeWithoutOuterTime) {
    auto sp = simulate_sde(brownian(0, 1), constant_policy(0), mc_time_grid(0, 1, 40), 0.5, 4000, 6);
    auto cost = outer_free([](double r, double x, double) { return std::cos(x) + r; }, [](double x) { return x * x; });
    auto a = solve_bsvie(sp, cost, BsvieOptions{});
    auto b = solve_bsde_lsmc(sp, [](double r, double x, double, double, double) { return std::cos(x) + r; },
                             [](double x) { return x * x; }, RegressionBasis{});
    EXPECT_LT((a.Y - b.Y).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((a.Z_diag - b.Z).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Bsvie, LaggedAndPicardAgree) {
    auto spec = make_scenario("lq-heterogeneous");
    auto sp = simulate_sde(spec, constant_policy(-0.5), mc_time_grid(0, 1, 50), 1.0, 4000, 8);
    BsvieOptions o;
    auto a = solve_bsvie(sp, spec.cost, o);
    o.mode = DiagonalMode::picard;
    auto b = solve_bsvie(sp, spec.cost, o);
    EXPECT_GT(b.sweeps, 1);
    EXPECT_EQ(b.residual_history.size(), static_cast<std::size_t>(b.sweeps));
    EXPECT_LT(std::abs(a.Y.col(0).mean() - b.Y.col(0).mean()), 5e-3);
}

TEST(Bsvie, PicardFailureCarriesHistory) {
    auto spec = make_scenario("lq-heterogeneous");
    auto sp = simulate_sde(spec, constant_policy(-0.5), mc_time_grid(0, 1, 20), 1.0, 500, 8);
    BsvieOptions o;
    o.mode = DiagonalMode::picard;
    o.picard_max = 2;
    o.tol = 1e-15;
    try {
        solve_bsvie(sp, spec.cost, o);
        FAIL();
    } catch (const PicardError& e) {
        EXPECT_EQ(e.history().size(), 2u);
    }
}

TEST(Bsvie, DeterministicAcrossWorkers) {
    auto spec = make_scenario("lq-heterogeneous");
    auto sp = simulate_sde(spec, constant_policy(0.2), mc_time_grid(0, 1, 20), 1.0, 1000, 8);
    BsvieOptions o;
    auto a = solve_bsvie(sp, spec.cost, o);
    o.workers = 4;
    auto b = solve_bsvie(sp, spec.cost, o);
    EXPECT_EQ(a.Y, b.Y);
    EXPECT_EQ(a.Z_diag, b.Z_diag);
}

TEST(Modified, FullFreezeIsOneBsde) {
    auto spec = make_scenario("lq-heterogeneous");
    auto sp = simulate_sde(spec, constant_policy(0.2), mc_time_grid(0, 1, 40), 1.0, 3000, 8);
    BsvieOptions o;
    auto base = solve_bsvie(sp, spec.cost, o);
    auto m = solve_modified_bsvie(sp, spec.cost, 0, 40, o, base);
    auto b = solve_bsde_lsmc(
        sp,
        [&](double r, double x, double u, double y, double z) {
            return spec.cost.generator(0.0, r, vec1(x), vec1(u), y, row1(z));
        },
        [&](double x) { return spec.cost.free_term(0.0, vec1(x)); }, o.basis);
    EXPECT_LT((m.Y - b.Y).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Modified, VacuousWithoutOuterTime) {
    auto spec = make_scenario("lq-exponential");
    auto sp = simulate_sde(spec, constant_policy(0.2), mc_time_grid(0, 1, 40), 1.0, 3000, 8);
    BsvieOptions o;
    auto base = solve_bsvie(sp, spec.cost, o);
    for (int w : {4, 10, 40}) {
        auto m = solve_modified_bsvie(sp, spec.cost, 0, w, o, base);
        EXPECT_LT((m.Y - base.Y).cwiseAbs().maxCoeff(), 1e-10) << w;
    }
}

TEST(Modified, UnchangedBeyondTheWindow) {
    auto spec = make_scenario("lq-heterogeneous");
    auto sp = simulate_sde(spec, constant_policy(0.2), mc_time_grid(0, 1, 40), 1.0, 3000, 8);
    BsvieOptions o;
    auto base = solve_bsvie(sp, spec.cost, o);
    auto fast = solve_modified_bsvie(sp, spec.cost, 0, 8, o, base);
    auto full = solve_modified_bsvie(sp, spec.cost, 0, 8, o, base, true);
    for (int j = 9; j <= 40; ++j) {
        EXPECT_EQ(fast.Y.col(j), base.Y.col(j));
        EXPECT_LT((full.Y.col(j) - base.Y.col(j)).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_GT((fast.Y.col(0) - base.Y.col(0)).cwiseAbs().maxCoeff(), 1e-6);
    // window values differ only through the lagged diagonal of the full solve
    EXPECT_LT((fast.Y.col(0) - full.Y.col(0)).cwiseAbs().maxCoeff(), 5e-3);
    EXPECT_THROW(solve_modified_bsvie(sp, spec.cost, 5, 3, o, base), DomainError);
}

TEST(EpsilonStudy, HomogeneousIsVacuous) {
    auto spec = make_scenario("lq-exponential");
    auto st = epsilon_gap_study(spec, constant_policy(-0.5), 0.0, 1.0, {0.2, 0.1, 0.05}, mc(2000, 40));
    EXPECT_TRUE(st.vacuous);
    EXPECT_TRUE(std::isnan(st.slope));
}

TEST(EpsilonStudy, GapsShrinkWithSharedNoise) {
    auto spec = make_scenario("lq-heterogeneous");
    auto eq = solve_equilibrium_hjb(spec, grid(80, 4, 81));
    auto st = epsilon_gap_study(spec, feedback_policy(eq.strategy), 0.0, 1.0, {0.2, 0.1, 0.05, 0.025}, mc(10000, 80, 11));
    ASSERT_EQ(st.gaps.size(), 4u);
    EXPECT_FALSE(st.vacuous);
    for (std::size_t i = 0; i + 1 < st.gaps.size(); ++i) EXPECT_LE(st.gaps[i + 1], 1.5 * st.gaps[i]);
    // crude linear bound gap <= K eps with K fitted at the largest eps
    const double K = st.gaps[0] / 0.2;
    for (std::size_t i = 0; i < st.gaps.size(); ++i) EXPECT_LE(st.gaps[i], 1.5 * K * st.eps[i]);
    EXPECT_GT(st.slope, 1.0);
}

TEST(EpsilonStudy, BadListsRejected) {
    auto spec = make_scenario("lq-heterogeneous");
    EXPECT_THROW(epsilon_gap_study(spec, constant_policy(0), 0.0, 1.0, {}, mc(100, 10)), ConfigError);
    EXPECT_THROW(epsilon_gap_study(spec, constant_policy(0), 0.0, 1.0, {1.5}, mc(100, 10)), ConfigError);
    EXPECT_THROW(epsilon_gap_study(spec, constant_policy(0), 0.0, 1.0, {0.1, 0.2}, mc(100, 10)), ConfigError);
    EXPECT_THROW(epsilon_gap_study(spec, constant_policy(0), 0.0, 1.0, {0.013}, mc(100, 10)), ConfigError);
}

TEST(Cost, MartingaleExpectation) {
    auto ce = evaluate_cost(make_martingale_problem(), 0.0, 0.4, constant_policy(0), mc(20000, 10));
    EXPECT_NEAR(ce.J, 0.4, 3 * ce.standard_error + 1e-12);
}

TEST(Cost, ExponentialMatchesRiccatiAndPerturbationsCostMore) {
    auto p = default_lq_params("lq-exponential");
    auto spec = make_lq_problem(p);
    // scalar Riccati for V = 0.5 P x^2 + phi
    const double g = lq_y_coefficient(p);
    const int M = 20000;
    const double h = 1.0 / M;
    double P = p.qT, phi = 0.0;
    auto f = [&](double P_, double f_, double& dP, double& df) {
        dP = p.b * p.b * P_ * P_ / p.rho - p.q + g * P_;
        df = -0.5 * p.sigma * p.sigma * P_ + g * f_;
    };
    for (int i = 0; i < M; ++i) {
        double k1, l1, k2, l2, k3, l3, k4, l4;
        f(P, phi, k1, l1);
        f(P - 0.5 * h * k1, phi - 0.5 * h * l1, k2, l2);
        f(P - 0.5 * h * k2, phi - 0.5 * h * l2, k3, l3);
        f(P - h * k3, phi - h * l3, k4, l4);
        P -= h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        phi -= h / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
    }
    const double ref = 0.5 * P + phi;
    auto eq = solve_equilibrium_hjb(spec, grid(200, 4, 201));
    auto m = mc(20000, 200, 5);
    auto ce = evaluate_cost(spec, 0.0, 1.0, feedback_policy(eq.strategy), m);
    // time step bias of the Euler/BSDE discretisation is added to the noise band
    EXPECT_NEAR(ce.J, ref, 3 * ce.standard_error + 5e-3) << ce.standard_error;
    for (double d : {-0.2, 0.2}) {
        const auto& psi = eq.strategy;
        auto shifted = [&psi, d](int, int, double s, double x) { return psi.control(s, x)(0) + d; };
        EXPECT_GT(evaluate_cost(spec, 0.0, 1.0, shifted, m).J, ce.J);
    }
}

TEST(FeynmanKac, MartingaleAndHeat) {
    const int P = 20000;
    auto cfg = grid(50, 8, 81);
    auto times = cfg.time_grid(1.0);
    ThetaField lin(times, cfg.space), sq(times, cfg.space);
    for (int i = 0; i <= 50; ++i)
        for (int j = i; j <= 50; ++j)
            for (int k = 0; k < 81; ++k) {
                const double x = cfg.space.x(k);
                lin.at(i, j, k) = x;
                sq.at(i, j, k) = x * x + 1 - times[j];
            }
    FeedbackStrategy psi(times, cfg.space, 1);
    for (int j = 0; j < 50; ++j) {
        for (int k = 0; k < 81; ++k) psi.at(j, k) = vec1(0.0);
        psi.mark_defined(j);
    }
    const double dx = cfg.space.dx();
    const double budget = 2 * (1.0 / 50 + dx * dx + 5 / std::sqrt(P));
    auto m = mc(P, 50, 5);
    auto r1 = check_feynman_kac(lin, psi, make_martingale_problem(), 0.0, m);
    EXPECT_LT(r1.y_residual, budget);
    EXPECT_LT(r1.z_residual, budget);
    auto r2 = check_feynman_kac(sq, psi, make_heat_problem(), 0.5, m);
    EXPECT_LT(r2.y_residual, budget);
}

TEST(Probe, ExponentialDifferencesAreNonNegative) {
    auto spec = make_scenario("lq-exponential");
    auto eq = solve_equilibrium_hjb(spec, grid(80, 4, 101));
    const double u0 = eq.strategy.control(0.0, 1.0)(0);
    auto r = local_optimality_probe(spec, eq.strategy, 0.0, 1.0, {0.2, 0.1}, {u0 - 0.1, u0, u0 + 0.1}, mc(5000, 40, 9));
    ASSERT_EQ(r.rows.size(), 6u);
    for (const auto& row : r.rows) EXPECT_GE(row.diff, -3 * row.standard_error) << row.eps << " " << row.u;
    // perturbing with the strategy's own value changes little
    for (const auto& row : r.rows)
        if (row.u == u0) EXPECT_LT(std::abs(row.diff), 1e-3);
}

TEST(Probe, SingletonControlGivesZero) {
    auto spec = make_heat_problem();
    auto eq = solve_equilibrium_hjb(spec, grid(20, 4, 41));
    auto r = local_optimality_probe(spec, eq.strategy, 0.0, 0.5, {0.5, 0.25}, {0.0}, mc(500, 20));
    for (const auto& row : r.rows) EXPECT_EQ(row.diff, 0.0);
    EXPECT_TRUE(std::isnan(r.exponent));
    EXPECT_THROW(local_optimality_probe(spec, eq.strategy, 0.0, 0.5, {0.5}, {1.0}, mc(500, 20)), ConfigError);
}
