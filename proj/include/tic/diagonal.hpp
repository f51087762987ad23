#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tic/grids.hpp"
#include "tic/model.hpp"
#include "tic/pde.hpp"
#include "tic/regression.hpp"
#include "tic/scenarios.hpp"

namespace tic {

// Coupled forward SDE / backward Volterra equation whose generator sees the
// diagonal value Z(r,r); one-dimensional (n = d = 1).
//   X(s) = xi + int b(r, X, Y(r), Z(r,r)) dr + int sigma(r, X, Y(r)) dW
//   Y(t) = h(t, X_T) + int_t^T g(t, r, X, Y(r), Z(t,r), Z(r,r)) dr - int Z(t,r) dW
struct DiagonalProblem {
    std::string name;
    double horizon = 1.0;
    std::function<double(double r, double x, double y, double zeta)> drift;
    std::function<double(double r, double x, double y)> sigma;
    bool sigma_y_free = true;
    std::function<double(double t, double r, double x, double y, double z, double zeta)> generator;
    std::function<double(double t, double x)> free_term;

    // separable structure: h(t,x) = mu(t,T) h0(x), g = nu(t,r) g0(r,x,y,zeta) + z alpha(r)
    struct Separable {
        std::function<double(double r, double x, double y, double zeta)> g0;
        std::function<double(double x)> h0;
        std::function<double(double r)> alpha;
        DiscountKernel kernel;
        KernelFactorization factorization;
    };
    std::optional<Separable> separable;

    void validate() const;
};

// Build from the separable pieces; generator and free term follow from them.
DiagonalProblem make_separable_problem(std::string name, double horizon,
                                       std::function<double(double, double, double, double)> drift,
                                       std::function<double(double, double, double)> sigma,
                                       DiagonalProblem::Separable sep);

// Closed loop of an LQ scenario: the equilibrium control enters through
// psi = -zeta b / (sigma rho), clipped to the control box. Hyperbolic kernels
// come without the separable block.
DiagonalProblem make_lq_diagonal_problem(const LqParams& p);

// sampled max deviation from the separable form (0 without the structure)
double separable_defect(const DiagonalProblem& prob, int samples = 200, std::uint64_t seed = 5);

struct SigmaReport {
    double min_a = 0.0;  // min and max of sigma^2 over the sampled nodes
    double max_a = 0.0;
    double condition = 1.0;
};

// sigma sampled at y = 0 over the grid nodes and times; throws DomainError
// when sigma vanishes or the ellipticity ratio exceeds 1e6
SigmaReport check_sigma(const DiagonalProblem& prob, const std::vector<double>& times,
                        const SpatialGrid& space);

ThetaField solve_decoupling_pde(const DiagonalProblem& prob, const PdeConfig& cfg);

struct DiagonalPathConfig {
    int n_paths = 10000;
    std::uint64_t seed = 1;
    int workers = 1;
    RegressionBasis basis;
    int z_paths = 256;       // paths whose full Z triangle is stored
    int residual_rows = 8;   // outer times at which the integral equation is checked
    int picard_max = 100;
    double picard_tol = 1e-9;
    double damping = 0.5;     // weight of the new coupling function per sweep
    bool zero_auxiliary = false;  // replace the auxiliary pair by zeros
};

struct DiagonalSolution {
    std::string route;  // "pde" or "fbsde"
    std::vector<double> times;
    std::uint64_t seed = 0;
    Eigen::MatrixXd X;               // paths x (N+1)
    Eigen::MatrixXd Y;               // paths x (N+1)
    Eigen::MatrixXd Z_diag;          // paths x N, Z(s_j, s_j)
    std::vector<Eigen::MatrixXd> Z;  // Z[j]: z_paths x (j+1), entry (p, i) = Z(s_i, s_j)
    double residual = 0.0;           // integral-equation residual (pde) or scaling residual (fbsde)
    bool uniqueness_guaranteed = false;
    bool y_dependent_sigma = false;
    int sweeps = 0;
    std::vector<double> residual_history;
    std::vector<std::string> warnings;

    int n_paths() const { return static_cast<int>(X.rows()); }
};

DiagonalSolution solve_coupled_fsde_bsvie(const DiagonalProblem& prob, const ThetaField& theta, double xi,
                                          const DiagonalPathConfig& cfg);

DiagonalSolution solve_h6_fbsde_reduction(const DiagonalProblem& prob, double xi, const std::vector<double>& times,
                                          const DiagonalPathConfig& cfg);

struct RouteGaps {
    double y_gap = 0.0;
    double z_diag_gap = 0.0;
    double x_gap = 0.0;
};

RouteGaps cross_validate_diagonal(const DiagonalSolution& a, const DiagonalSolution& b);

// columns: path,s_index,s,X,Y,Z_diag for the first `max_paths` paths
// (Z_diag is empty on the last time point)
void write_diagonal_csv(const DiagonalSolution& sol, int max_paths, std::ostream& os);

}  // namespace tic
