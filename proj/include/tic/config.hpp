#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "tic/diagonal.hpp"
#include "tic/pde.hpp"
#include "tic/scenarios.hpp"
#include "tic/stochastic.hpp"

namespace tic {

// Resolved run configuration. Files are INI-style:
//
//   [scenario]     id, x0, t0, and for lq-* ids: a b sigma q rho qT beta horizon
//                  umax kernel rate1 rate2 alpha finite_controls finite_count
//   [grid]         time_steps x_lo x_hi nodes scheme cfl_safety tolerance
//   [monte_carlo]  n_paths time_steps seed degree z_paths diagonal_mode output_paths
//   [study]        eps_list n_list
//   [diagonal]     picard_max picard_tol damping residual_rows
//   [run]          workers verbose
//
// Every key is optional; unknown sections or keys are errors.
struct RunConfig {
    std::string scenario = "lq-heterogeneous";
    LqParams lq = default_lq_params("lq-heterogeneous");
    double x0 = 1.0;
    double t0 = 0.0;

    int time_steps = 200;
    double x_lo = -4.0;
    double x_hi = 4.0;
    int nodes = 201;
    Scheme scheme = Scheme::implicit_diffusion;
    double cfl_safety = 1.0;
    double tolerance = 1e-9;

    int n_paths = 10000;
    int mc_time_steps = 160;
    std::uint64_t seed = 1;
    int degree = 3;
    int z_paths = 256;
    DiagonalMode diagonal_mode = DiagonalMode::lagged;
    int output_paths = 20;

    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
    std::vector<int> n_list{2, 4, 8, 16};

    int picard_max = 100;
    double picard_tol = 1e-9;
    double damping = 0.5;
    int residual_rows = 8;

    int workers = 1;
    bool verbose = false;

    void validate() const;

    ProblemSpec problem() const;
    PdeConfig pde(std::ostream* log = nullptr) const;
    McConfig monte_carlo() const;
    DiagonalProblem diagonal_problem() const;
    DiagonalPathConfig diagonal_paths() const;
};

RunConfig parse_config(std::istream& is, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace tic
