#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tic/types.hpp"

namespace tic {

struct ControlledDynamics {
    std::function<Vec(double s, const Vec& x, const Vec& u)> drift;
    std::function<Mat(double s, const Vec& x, const Vec& u)> diffusion;  // n x d
    int state_dim = 1;
    int noise_dim = 1;
    bool sigma_control_free = false;
};

struct CostSpec {
    // g(t, r, x, u, y, z): t is the outer time, r the running time
    std::function<double(double t, double r, const Vec& x, const Vec& u, double y, const RowVec& z)>
        generator;
    // h(t, x)
    std::function<double(double t, const Vec& x)> free_term;
    bool time_homogeneous_in_t = false;
};

class ControlSet {
public:
    ControlSet() = default;

    static ControlSet finite(std::vector<Vec> points);
    // box [lo, hi] scanned with `resolution` points per axis; `refine` polishes
    // the scan winner by golden-section search when m = 1
    static ControlSet box(const Vec& lo, const Vec& hi, int resolution, bool refine = false);

    int dim() const { return dim_; }
    bool is_finite() const { return finite_; }
    bool refine() const { return refine_; }
    int resolution() const { return resolution_; }
    const Vec& lower() const { return lo_; }
    const Vec& upper() const { return hi_; }

    // lexicographically ascending, so a strict-improvement scan keeps the
    // smallest control among ties
    const std::vector<Vec>& scan_points() const { return points_; }

    bool contains(const Vec& u, double tol = 1e-12) const;
    bool on_boundary(const Vec& u) const;
    Vec clamp(const Vec& u) const;

private:
    bool finite_ = true;
    bool refine_ = false;
    int dim_ = 0;
    int resolution_ = 0;
    Vec lo_, hi_;
    std::vector<Vec> points_;
};

enum class KernelKind { exponential, hyperbolic, heterogeneous, convex_combination, quasi_exponential };
enum class DiscountPart { terminal, running };  // mu(t,T) and nu(t,r)

struct DiscountKernel {
    KernelKind kind = KernelKind::exponential;
    double rate1 = 0.0;
    double rate2 = 0.0;
    double alpha = 0.0;

    static DiscountKernel exponential(double lambda);
    static DiscountKernel hyperbolic(double lambda1, double lambda2);
    static DiscountKernel heterogeneous(double lambda1, double lambda2);
    static DiscountKernel convex_combination(double alpha, double lambda1, double lambda2);
    static DiscountKernel quasi_exponential(double alpha, double lambda);

    void validate() const;
};

std::string kernel_kind_name(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& name);

double eval_discount(const DiscountKernel& kernel, DiscountPart which, double t, double r);

// scale(t) * mu(t,T) - scale(s) * mu(s,T) = mixing(t,s) * terminal_coeff
// scale(t) * nu(t,r) - scale(s) * nu(s,r) = mixing(t,s) * running_coeff(r)
struct KernelFactorization {
    std::function<double(double)> scale;
    double terminal_coeff = 0.0;
    std::function<double(double)> running_coeff;
    std::function<double(double, double)> mixing;
    bool mixing_vanishes = false;  // M == 0 identically
};

// the terminal coefficient depends on the horizon, hence the extra argument
KernelFactorization factorize_kernel(const DiscountKernel& kernel, double horizon);

using Minimizer = std::function<Vec(double t, double s, const Vec& x, double theta, const RowVec& p,
                                    const Mat& P)>;

struct ProblemSpec {
    std::string name;
    ControlledDynamics dynamics;
    CostSpec cost;
    ControlSet controls;
    std::optional<DiscountKernel> kernel;
    double horizon = 1.0;
    Minimizer minimizer;  // optional closed form

    void validate() const;
};

double eval_hamiltonian(const ProblemSpec& spec, double t, double s, const Vec& x, const Vec& u,
                        double theta, const RowVec& p, const Mat& P);

// Split of the Hamiltonian used by the grid solvers (n = 1):
// H = 0.5 * a * P + e with a = sigma sigma^T and e = p b + g.
struct HamiltonianParts {
    double a = 0.0;
    double e = 0.0;
};

HamiltonianParts hamiltonian_parts_1d(const ProblemSpec& spec, double t, double s, double x,
                                      const Vec& u, double theta, double p);

struct MinimizationResult {
    Vec control;
    double value = 0.0;
    bool truncated = false;  // argmin sits on the box boundary (or psi was clipped)
};

MinimizationResult minimize_hamiltonian(const ProblemSpec& spec, double t, double s, const Vec& x,
                                        double theta, const RowVec& p, const Mat& P);

struct SamplingOptions {
    int pairs = 1000;
    std::uint64_t seed = 7;
    double x_lo = -2.0;
    double x_hi = 2.0;
    double lipschitz_bound = 1e3;
};

struct SamplingReport {
    double lipschitz_dynamics = 0.0;  // estimate for b, sigma in x
    double lipschitz_cost = 0.0;      // estimate for g, h in (t, x, y, z)
    bool finite = true;
    bool sigma_control_free_ok = true;
    bool time_homogeneous_ok = true;
    std::vector<std::string> problems;

    bool ok() const { return problems.empty(); }
};

SamplingReport check_by_sampling(const ProblemSpec& spec, const SamplingOptions& opt = {});

}  // namespace tic
