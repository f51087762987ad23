#pragma once

#include <string>
#include <vector>

#include "tic/model.hpp"

namespace tic {

// One-dimensional linear-quadratic family
//   dX = (a X + b u) ds + sigma dW
//   g  = nu(t,r) [ (q x^2 + rho u^2)/2 - beta y ],   h = mu(t,T) qT x^2 / 2
// With an exponential kernel the discount is folded into the recursion,
// g = (q x^2 + rho u^2)/2 - (lambda + beta) y and h = qT x^2 / 2, which is the
// same cost written without outer-time dependence.
struct LqParams {
    std::string id = "lq-heterogeneous";
    double a = 0.0;
    double b = 1.0;
    double sigma = 0.5;
    double q = 1.0;
    double rho = 1.0;
    double qT = 1.0;
    double beta = 0.5;
    double horizon = 1.0;
    DiscountKernel kernel = DiscountKernel::heterogeneous(0.2, 1.5);
    double umax = 10.0;
    bool finite_controls = false;  // scan a finite grid instead of the closed form
    int finite_count = 81;
};

LqParams default_lq_params(const std::string& id);

// running-cost weight and y-coefficient of the generator, exposed for oracles
double lq_running_weight(const LqParams& p, double t, double r);
double lq_terminal_weight(const LqParams& p, double t);
double lq_y_coefficient(const LqParams& p);

ProblemSpec make_lq_problem(const LqParams& p);

// b = 0, sigma = 1, g = 0, h = x^2; Theta(t,s,x) = x^2 + T - s
ProblemSpec make_heat_problem(double horizon = 1.0);
// b = 0, sigma = 1, g = 0, h = x
ProblemSpec make_martingale_problem(double horizon = 1.0);

bool is_lq_scenario(const std::string& id);
ProblemSpec make_scenario(const std::string& id);
std::vector<std::string> scenario_ids();

}  // namespace tic
