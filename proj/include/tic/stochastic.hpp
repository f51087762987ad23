#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tic/grids.hpp"
#include "tic/model.hpp"
#include "tic/regression.hpp"

namespace tic {

// Monte Carlo work is one-dimensional (n = d = m = 1).

using Rng = std::mt19937_64;

// independent stream per (seed, path)
Rng path_rng(std::uint64_t seed, std::uint64_t path);

struct InitialState {
    double value = 0.0;
    std::function<double(Rng&)> sampler;  // overrides value when set

    InitialState() = default;
    InitialState(double v) : value(v) {}
};

// control applied on step j of path p at state x
using PathPolicy = std::function<double(int path, int step, double s, double x)>;

PathPolicy feedback_policy(const FeedbackStrategy& psi);
PathPolicy open_loop_policy(Eigen::MatrixXd controls);  // paths x steps
PathPolicy constant_policy(double u);
// constant u on steps starting before `until`, then `rest`
PathPolicy spliced_policy(double u, double until, PathPolicy rest);

struct SamplePaths {
    std::vector<double> times;
    int n_paths = 0;
    std::uint64_t seed = 0;
    Eigen::MatrixXd X;   // paths x (N+1)
    Eigen::MatrixXd dW;  // paths x N
    Eigen::MatrixXd U;   // paths x N, control used on each step

    int steps() const { return static_cast<int>(times.size()) - 1; }
    double dt(int j) const { return times[j + 1] - times[j]; }
};

SamplePaths simulate_sde(const ProblemSpec& spec, const PathPolicy& policy, const std::vector<double>& times,
                         const InitialState& xi, int n_paths, std::uint64_t seed, int workers = 1);

// increments drawn exactly as simulate_sde draws them for a fixed initial state
Eigen::MatrixXd brownian_increments(const std::vector<double>& times, int n_paths, std::uint64_t seed,
                                    int workers = 1);

struct BsdeResult {
    Eigen::MatrixXd Y;  // paths x (N+1)
    Eigen::MatrixXd Z;  // paths x N
    std::vector<std::string> warnings;
};

using BsdeGenerator = std::function<double(double r, double x, double u, double y, double z)>;

// Backward regression: c = E_j[Y_{j+1}], Z_j = E_j[(Y_{j+1} - c) dW_j] / dt,
// Y_j = c + dt * g(r_j, X_j, u_j, c, Z_j).
BsdeResult solve_bsde_lsmc(const SamplePaths& paths, const BsdeGenerator& g,
                           const std::function<double(double x)>& terminal, const RegressionBasis& basis);

enum class DiagonalMode {
    lagged,  // step j uses E_j[y(s_j, s_{j+1})] as Y(s_j): a single backward sweep
    picard   // step j uses the previous sweep's Y(s_j); sweeps until the change is below tol
};

struct BsvieOptions {
    RegressionBasis basis;
    DiagonalMode mode = DiagonalMode::lagged;
    int picard_max = 50;
    double tol = 1e-8;
    int z_paths = 256;  // paths for which the full Z triangle is kept
    int workers = 1;
    // outer time actually passed to g and h for column i (identity if empty);
    // used for the frozen-window equation
    std::function<double(int column)> outer_time;
};

struct AdaptedPair {
    std::vector<double> times;
    Eigen::MatrixXd Y;                // paths x (N+1), Y(s_j)
    Eigen::MatrixXd Z_diag;           // paths x N, Z(s_j, s_j) on step j
    std::vector<Eigen::MatrixXd> Z;   // Z[j]: z_paths x (j+1), entry (p, i) = Z(s_i, s_j)
    Eigen::MatrixXd y_arg;            // paths x N, diagonal value fed to g on step j
    Eigen::VectorXd first_target;     // y(s_0, s_1) per path before projection
    RegressionBasis basis;
    int sweeps = 0;
    std::vector<double> residual_history;
    std::vector<std::string> warnings;
};

AdaptedPair solve_bsvie(const SamplePaths& paths, const CostSpec& cost, const BsvieOptions& opt);

// Equation with the outer time frozen to times[t_index] on the window up to
// times[window_end]. The fast path reuses `base` beyond the window and solves
// one backward equation on it; `full` solves the frozen equation from scratch.
AdaptedPair solve_modified_bsvie(const SamplePaths& paths, const CostSpec& cost, int t_index, int window_end,
                                 const BsvieOptions& opt, const AdaptedPair& base, bool full = false);

struct McConfig {
    int time_steps = 100;
    int n_paths = 10000;
    std::uint64_t seed = 1;
    RegressionBasis basis;
    int z_paths = 256;
    int workers = 1;
    DiagonalMode mode = DiagonalMode::lagged;
};

std::vector<double> mc_time_grid(double t, double T, int steps);
int grid_index_of(const std::vector<double>& times, double t);  // throws if t is not a grid point

struct EpsilonStudy {
    std::vector<double> eps;
    std::vector<double> gaps;
    double slope = 0.0;
    bool vacuous = false;
    double y0 = 0.0;
};

EpsilonStudy epsilon_gap_study(const ProblemSpec& spec, const PathPolicy& policy, double t,
                               const InitialState& xi, const std::vector<double>& eps_list,
                               const McConfig& mc);

struct CostEstimate {
    double J = 0.0;
    double standard_error = 0.0;
    Eigen::VectorXd targets;  // per-path first-layer values used for errors of differences
};

CostEstimate evaluate_cost(const ProblemSpec& spec, double t, const InitialState& xi, const PathPolicy& policy,
                           const McConfig& mc);

struct FeynmanKacResult {
    double y_residual = 0.0;
    double z_residual = 0.0;
};

FeynmanKacResult check_feynman_kac(const ThetaField& theta, const FeedbackStrategy& psi, const ProblemSpec& spec,
                                   const InitialState& xi, const McConfig& mc);

struct ProbeRow {
    double eps = 0.0;
    double u = 0.0;
    double diff = 0.0;
    double standard_error = 0.0;
};

struct ProbeResult {
    std::vector<ProbeRow> rows;
    std::vector<double> eps;
    std::vector<double> negative_part;   // max over u of max(0, -diff), per eps
    std::vector<double> min_difference;  // min over u of diff, per eps
    double exponent = 0.0;               // NaN when fewer than two positive negative parts
    double min_difference_exponent = 0.0;  // fit of |min diff|; NaN unless all nonzero
    double base_cost = 0.0;
};

ProbeResult local_optimality_probe(const ProblemSpec& spec, const FeedbackStrategy& psi, double t,
                                   const InitialState& xi, const std::vector<double>& eps_list,
                                   const std::vector<double>& perturbations, const McConfig& mc);

}  // namespace tic
