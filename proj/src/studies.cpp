#include <algorithm>
#include <cmath>
#include <limits>

#include "tic/errors.hpp"
#include "tic/partition_game.hpp"
#include "tic/stochastic.hpp"

namespace tic {

Eigen::MatrixXd frozen_window_values(const SamplePaths& paths, const CostSpec& cost, int t_index,
                                     const std::vector<int>& ends, const AdaptedPair& base, const BsvieOptions& opt);

namespace {

BsvieOptions options_from(const McConfig& mc) {
    BsvieOptions o;
    o.basis = mc.basis;
    o.z_paths = mc.z_paths;
    o.workers = mc.workers;
    o.mode = mc.mode;
    return o;
}

double rms(const Eigen::Ref<const Eigen::VectorXd>& v) { return std::sqrt(v.squaredNorm() / double(v.size())); }

double std_error(const Eigen::VectorXd& v) {
    const double mean = v.mean();
    const double var = (v.array() - mean).square().sum() / std::max<double>(1.0, double(v.size()) - 1.0);
    return std::sqrt(var / double(v.size()));
}

}  // namespace

EpsilonStudy epsilon_gap_study(const ProblemSpec& spec, const PathPolicy& policy, double t, const InitialState& xi,
                               const std::vector<double>& eps_list, const McConfig& mc) {
    if (eps_list.empty()) throw ConfigError("epsilon list is empty");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0) || eps_list[i] > spec.horizon - t + 1e-12)
            throw ConfigError("epsilon values must lie in (0, T - t]");
        if (i && !(eps_list[i] < eps_list[i - 1])) throw ConfigError("epsilon list must be decreasing");
    }
    const auto times = mc_time_grid(t, spec.horizon, mc.time_steps);
    std::vector<int> ends{0};
    for (double e : eps_list) ends.push_back(grid_index_of(times, t + e));

    const SamplePaths paths = simulate_sde(spec, policy, times, xi, mc.n_paths, mc.seed, mc.workers);
    const BsvieOptions opt = options_from(mc);
    const AdaptedPair base = solve_bsvie(paths, spec.cost, opt);
    const Eigen::MatrixXd v = frozen_window_values(paths, spec.cost, 0, ends, base, opt);

    EpsilonStudy st;
    st.eps = eps_list;
    st.y0 = base.Y.col(0).mean();
    for (std::size_t c = 1; c < ends.size(); ++c) st.gaps.push_back(rms(v.col(c) - v.col(0)));
    double worst = 0.0;
    for (double g : st.gaps) worst = std::max(worst, g);
    st.vacuous = worst <= 1e-10 * (1.0 + std::abs(st.y0));
    st.slope = st.vacuous ? std::numeric_limits<double>::quiet_NaN() : loglog_slope(st.eps, st.gaps);
    return st;
}

CostEstimate evaluate_cost(const ProblemSpec& spec, double t, const InitialState& xi, const PathPolicy& policy,
                           const McConfig& mc) {
    const auto times = mc_time_grid(t, spec.horizon, mc.time_steps);
    const SamplePaths paths = simulate_sde(spec, policy, times, xi, mc.n_paths, mc.seed, mc.workers);
    const AdaptedPair y = solve_bsvie(paths, spec.cost, options_from(mc));
    CostEstimate ce;
    ce.J = y.Y.col(0).mean();
    ce.targets = y.first_target;
    ce.standard_error = std_error(ce.targets);
    return ce;
}

FeynmanKacResult check_feynman_kac(const ThetaField& theta, const FeedbackStrategy& psi, const ProblemSpec& spec,
                                   const InitialState& xi, const McConfig& mc) {
    const auto& times = theta.times();
    const int N = theta.steps();
    if (psi.steps() != N) throw DomainError("strategy and field use different time grids");
    const SamplePaths paths = simulate_sde(spec, feedback_policy(psi), times, xi, mc.n_paths, mc.seed, mc.workers);
    const AdaptedPair y = solve_bsvie(paths, spec.cost, options_from(mc));
    const int P = paths.n_paths;

    double sy = 0.0;
    for (int j = 0; j <= N; ++j)
        for (int p = 0; p < P; ++p) {
            const double d = y.Y(p, j) - theta.value(j, j, paths.X(p, j));
            sy += d * d;
        }
    double sz = 0.0;
    long nz = 0;
    for (int j = 0; j < N; ++j) {
        const auto& Zj = y.Z[j];
        for (int p = 0; p < Zj.rows(); ++p) {
            const double x = paths.X(p, j);
            const Vec xv = vec1(x);
            const double sig = spec.dynamics.diffusion(times[j], xv, psi.control(times[j], x))(0, 0);
            for (int i = 0; i <= j; ++i) {
                const double d = Zj(p, i) - theta.slope(i, j, x) * sig;
                sz += d * d;
                ++nz;
            }
        }
    }
    return {std::sqrt(sy / (double(P) * (N + 1))), nz ? std::sqrt(sz / double(nz)) : 0.0};
}

ProbeResult local_optimality_probe(const ProblemSpec& spec, const FeedbackStrategy& psi, double t,
                                   const InitialState& xi, const std::vector<double>& eps_list,
                                   const std::vector<double>& perturbations, const McConfig& mc) {
    if (eps_list.empty() || perturbations.empty()) throw ConfigError("probe needs epsilons and perturbations");
    const auto times = mc_time_grid(t, spec.horizon, mc.time_steps);
    for (double e : eps_list) grid_index_of(times, t + e);
    for (double u : perturbations)
        if (!spec.controls.contains(vec1(u), 1e-12)) throw ConfigError("perturbation outside the control set");

    const PathPolicy base_policy = feedback_policy(psi);
    const CostEstimate base = evaluate_cost(spec, t, xi, base_policy, mc);
    ProbeResult res;
    res.base_cost = base.J;
    for (double e : eps_list) {
        double neg = 0.0, lo = std::numeric_limits<double>::infinity();
        for (double u : perturbations) {
            const CostEstimate ce = evaluate_cost(spec, t, xi, spliced_policy(u, t + e, base_policy), mc);
            const Eigen::VectorXd d = ce.targets - base.targets;
            const ProbeRow row{e, u, ce.J - base.J, std_error(d)};
            neg = std::max(neg, -row.diff);
            lo = std::min(lo, row.diff);
            res.rows.push_back(row);
        }
        res.eps.push_back(e);
        res.negative_part.push_back(neg);
        res.min_difference.push_back(lo);
    }
    std::vector<double> ex, ny;
    for (std::size_t i = 0; i < res.eps.size(); ++i)
        if (res.negative_part[i] > 0.0) {
            ex.push_back(res.eps[i]);
            ny.push_back(res.negative_part[i]);
        }
    res.exponent = ex.size() >= 2 ? loglog_slope(ex, ny) : std::numeric_limits<double>::quiet_NaN();
    std::vector<double> md;
    for (double d : res.min_difference) md.push_back(std::abs(d));
    const bool nonzero = std::all_of(md.begin(), md.end(), [](double d) { return d > 0.0; });
    res.min_difference_exponent =
        nonzero && md.size() >= 2 ? loglog_slope(res.eps, md) : std::numeric_limits<double>::quiet_NaN();
    return res;
}

}  // namespace tic
