#include "tic/scenarios.hpp"

#include <algorithm>

#include "tic/errors.hpp"

namespace tic {

LqParams default_lq_params(const std::string& id) {
    LqParams p;
    p.id = id;
    if (id == "lq-exponential")
        p.kernel = DiscountKernel::exponential(1.0);
    else if (id == "lq-heterogeneous")
        p.kernel = DiscountKernel::heterogeneous(0.2, 1.5);
    else if (id == "lq-hyperbolic")
        p.kernel = DiscountKernel::hyperbolic(1.0, 2.0);
    else if (id == "lq-quasi-exponential")
        p.kernel = DiscountKernel::quasi_exponential(0.5, 1.0);
    else if (id == "lq-convex-combination")
        p.kernel = DiscountKernel::convex_combination(0.5, 0.5, 2.0);
    else
        throw ConfigError("unknown scenario '" + id + "'");
    return p;
}

double lq_running_weight(const LqParams& p, double t, double r) {
    if (p.kernel.kind == KernelKind::exponential) return 1.0;
    return eval_discount(p.kernel, DiscountPart::running, t, r);
}

double lq_terminal_weight(const LqParams& p, double t) {
    if (p.kernel.kind == KernelKind::exponential) return 1.0;
    return eval_discount(p.kernel, DiscountPart::terminal, t, p.horizon);
}

double lq_y_coefficient(const LqParams& p) {
    return p.kernel.kind == KernelKind::exponential ? p.beta + p.kernel.rate1 : p.beta;
}

ProblemSpec make_lq_problem(const LqParams& p) {
    if (!(p.rho > 0.0)) throw ConfigError("rho must be positive");
    if (!(p.sigma > 0.0)) throw ConfigError("sigma must be positive");
    ProblemSpec spec;
    spec.name = p.id;
    spec.horizon = p.horizon;
    spec.kernel = p.kernel;
    const double a = p.a, b = p.b, sig = p.sigma;
    spec.dynamics.drift = [a, b](double, const Vec& x, const Vec& u) { return vec1(a * x(0) + b * u(0)); };
    spec.dynamics.diffusion = [sig](double, const Vec&, const Vec&) { return mat1(sig); };
    spec.dynamics.sigma_control_free = true;

    const double q = p.q, rho = p.rho, qT = p.qT, ycoef = lq_y_coefficient(p);
    const bool homog = p.kernel.kind == KernelKind::exponential;
    const DiscountKernel k = p.kernel;
    const double T = p.horizon;
    if (homog) {
        spec.cost.generator = [q, rho, ycoef](double, double, const Vec& x, const Vec& u, double y,
                                              const RowVec&) {
            return 0.5 * (q * x(0) * x(0) + rho * u(0) * u(0)) - ycoef * y;
        };
        spec.cost.free_term = [qT](double, const Vec& x) { return 0.5 * qT * x(0) * x(0); };
        spec.cost.time_homogeneous_in_t = true;
    } else {
        spec.cost.generator = [q, rho, ycoef, k](double t, double r, const Vec& x, const Vec& u,
                                                 double y, const RowVec&) {
            const double w = eval_discount(k, DiscountPart::running, t, r);
            return w * (0.5 * (q * x(0) * x(0) + rho * u(0) * u(0)) - ycoef * y);
        };
        spec.cost.free_term = [qT, k, T](double t, const Vec& x) {
            return eval_discount(k, DiscountPart::terminal, t, T) * 0.5 * qT * x(0) * x(0);
        };
    }

    if (p.finite_controls) {
        if (p.finite_count < 2) throw ConfigError("finite_count must be at least 2");
        std::vector<Vec> pts;
        for (int i = 0; i < p.finite_count; ++i)
            pts.push_back(vec1(-p.umax + 2.0 * p.umax * i / double(p.finite_count - 1)));
        spec.controls = ControlSet::finite(std::move(pts));
    } else {
        spec.controls = ControlSet::box(vec1(-p.umax), vec1(p.umax), 401, true);
        spec.minimizer = [b, rho, homog, k](double t, double s, const Vec&, double, const RowVec& pr,
                                            const Mat&) {
            const double w = homog ? 1.0 : eval_discount(k, DiscountPart::running, t, s);
            return vec1(-pr(0) * b / (w * rho));
        };
    }
    return spec;
}

namespace {

ProblemSpec brownian_problem(const std::string& name, double horizon,
                             std::function<double(double, const Vec&)> h) {
    ProblemSpec spec;
    spec.name = name;
    spec.horizon = horizon;
    spec.dynamics.drift = [](double, const Vec&, const Vec&) { return vec1(0.0); };
    spec.dynamics.diffusion = [](double, const Vec&, const Vec&) { return mat1(1.0); };
    spec.dynamics.sigma_control_free = true;
    spec.cost.generator = [](double, double, const Vec&, const Vec&, double, const RowVec&) {
        return 0.0;
    };
    spec.cost.free_term = std::move(h);
    spec.cost.time_homogeneous_in_t = true;
    spec.controls = ControlSet::finite({vec1(0.0)});
    return spec;
}

}  // namespace

ProblemSpec make_heat_problem(double horizon) {
    return brownian_problem("heat", horizon, [](double, const Vec& x) { return x(0) * x(0); });
}

ProblemSpec make_martingale_problem(double horizon) {
    return brownian_problem("martingale", horizon, [](double, const Vec& x) { return x(0); });
}

std::vector<std::string> scenario_ids() {
    return {"lq-exponential", "lq-heterogeneous", "lq-hyperbolic", "lq-quasi-exponential",
            "lq-convex-combination", "heat", "martingale"};
}

bool is_lq_scenario(const std::string& id) { return id.rfind("lq-", 0) == 0; }

ProblemSpec make_scenario(const std::string& id) {
    if (id == "heat") return make_heat_problem();
    if (id == "martingale") return make_martingale_problem();
    return make_lq_problem(default_lq_params(id));
}

}  // namespace tic
