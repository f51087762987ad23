#include "tic/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "tic/errors.hpp"

namespace tic {

namespace {

bool lex_less(const Vec& a, const Vec& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a(i) < b(i)) return true;
        if (a(i) > b(i)) return false;
    }
    return false;
}

std::string describe(double t, double s, const Vec& x, const Vec& u) {
    std::ostringstream os;
    os << "t=" << t << " s=" << s << " x=(";
    for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << x(i);
    os << ") u=(";
    for (int i = 0; i < u.size(); ++i) os << (i ? "," : "") << u(i);
    os << ")";
    return os.str();
}

// NaN instead of throwing, so the scan can skip bad points
double hamiltonian_raw(const ProblemSpec& spec, double t, double s, const Vec& x, const Vec& u,
                       double theta, const RowVec& p, const Mat& P) {
    const Vec b = spec.dynamics.drift(s, x, u);
    const Mat sig = spec.dynamics.diffusion(s, x, u);
    const Mat a = sig * sig.transpose();
    const RowVec z = p * sig;
    const double g = spec.cost.generator(t, s, x, u, theta, z);
    return 0.5 * (P.cwiseProduct(a)).sum() + p.dot(b.transpose()) + g;
}

}  // namespace

ControlSet ControlSet::finite(std::vector<Vec> points) {
    if (points.empty()) throw DomainError("control set is empty");
    const int m = static_cast<int>(points.front().size());
    if (m < 1 || m > kMaxDim) throw DomainError("control dimension out of range");
    for (const auto& p : points)
        if (p.size() != m) throw DomainError("control points of mixed dimension");
    std::stable_sort(points.begin(), points.end(), lex_less);
    points.erase(std::unique(points.begin(), points.end(),
                             [](const Vec& a, const Vec& b) { return a == b; }),
                 points.end());
    ControlSet c;
    c.finite_ = true;
    c.dim_ = m;
    c.points_ = std::move(points);
    c.lo_ = c.points_.front();
    c.hi_ = c.points_.front();
    for (const auto& p : c.points_) {
        c.lo_ = c.lo_.cwiseMin(p);
        c.hi_ = c.hi_.cwiseMax(p);
    }
    return c;
}

ControlSet ControlSet::box(const Vec& lo, const Vec& hi, int resolution, bool refine) {
    const int m = static_cast<int>(lo.size());
    if (m < 1 || m > kMaxDim || hi.size() != m) throw DomainError("bad box dimension");
    for (int i = 0; i < m; ++i)
        if (!(lo(i) <= hi(i))) throw DomainError("box requires lo <= hi componentwise");
    if (resolution < 1) throw DomainError("box resolution must be positive");
    ControlSet c;
    c.finite_ = false;
    c.refine_ = refine;
    c.dim_ = m;
    c.resolution_ = resolution;
    c.lo_ = lo;
    c.hi_ = hi;
    long total = 1;
    for (int i = 0; i < m; ++i) total *= resolution;
    c.points_.reserve(static_cast<std::size_t>(total));
    std::vector<int> idx(m, 0);
    for (long n = 0; n < total; ++n) {
        Vec u(m);
        for (int i = 0; i < m; ++i) {
            u(i) = resolution == 1 ? lo(i)
                                   : lo(i) + (hi(i) - lo(i)) * idx[i] / double(resolution - 1);
        }
        c.points_.push_back(u);
        // last axis fastest: lexicographic order
        for (int i = m - 1; i >= 0; --i) {
            if (++idx[i] < resolution) break;
            idx[i] = 0;
        }
    }
    return c;
}

bool ControlSet::contains(const Vec& u, double tol) const {
    if (u.size() != dim_) return false;
    if (!finite_) {
        for (int i = 0; i < dim_; ++i)
            if (u(i) < lo_(i) - tol || u(i) > hi_(i) + tol) return false;
        return true;
    }
    for (const auto& p : points_)
        if ((p - u).cwiseAbs().maxCoeff() <= tol) return true;
    return false;
}

bool ControlSet::on_boundary(const Vec& u) const {
    if (finite_) return false;
    for (int i = 0; i < dim_; ++i)
        if (lo_(i) < hi_(i) && (u(i) <= lo_(i) || u(i) >= hi_(i))) return true;
    return false;
}

Vec ControlSet::clamp(const Vec& u) const { return u.cwiseMax(lo_).cwiseMin(hi_); }

DiscountKernel DiscountKernel::exponential(double lambda) {
    DiscountKernel k{KernelKind::exponential, lambda, lambda, 0.0};
    k.validate();
    return k;
}

DiscountKernel DiscountKernel::hyperbolic(double lambda1, double lambda2) {
    DiscountKernel k{KernelKind::hyperbolic, lambda1, lambda2, 0.0};
    k.validate();
    return k;
}

DiscountKernel DiscountKernel::heterogeneous(double lambda1, double lambda2) {
    DiscountKernel k{KernelKind::heterogeneous, lambda1, lambda2, 0.0};
    k.validate();
    return k;
}

DiscountKernel DiscountKernel::convex_combination(double alpha, double lambda1, double lambda2) {
    DiscountKernel k{KernelKind::convex_combination, lambda1, lambda2, alpha};
    k.validate();
    return k;
}

DiscountKernel DiscountKernel::quasi_exponential(double alpha, double lambda) {
    DiscountKernel k{KernelKind::quasi_exponential, lambda, lambda, alpha};
    k.validate();
    return k;
}

void DiscountKernel::validate() const {
    if (!(rate1 >= 0.0) || !(rate2 >= 0.0)) throw DomainError("discount rates must be nonnegative");
    if (kind == KernelKind::convex_combination && !(alpha > 0.0 && alpha < 1.0))
        throw DomainError("convex combination weight must lie in (0,1)");
    if (kind == KernelKind::quasi_exponential && !(alpha >= 0.0))
        throw DomainError("quasi-exponential alpha must be nonnegative");
}

std::string kernel_kind_name(KernelKind kind) {
    switch (kind) {
        case KernelKind::exponential: return "exponential";
        case KernelKind::hyperbolic: return "hyperbolic";
        case KernelKind::heterogeneous: return "heterogeneous";
        case KernelKind::convex_combination: return "convex_combination";
        case KernelKind::quasi_exponential: return "quasi_exponential";
    }
    return "unknown";
}

KernelKind parse_kernel_kind(const std::string& name) {
    for (auto k : {KernelKind::exponential, KernelKind::hyperbolic, KernelKind::heterogeneous,
                   KernelKind::convex_combination, KernelKind::quasi_exponential})
        if (kernel_kind_name(k) == name) return k;
    throw ConfigError("unknown kernel kind '" + name + "'");
}

double eval_discount(const DiscountKernel& k, DiscountPart which, double t, double r) {
    if (t > r) throw DomainError("eval_discount needs t <= r");
    const double d = r - t;
    const bool term = which == DiscountPart::terminal;
    switch (k.kind) {
        case KernelKind::exponential: return std::exp(-k.rate1 * d);
        case KernelKind::hyperbolic: return 1.0 / (1.0 + (term ? k.rate1 : k.rate2) * d);
        case KernelKind::heterogeneous: return std::exp(-(term ? k.rate1 : k.rate2) * d);
        case KernelKind::convex_combination:
            return k.alpha * std::exp(-k.rate1 * d) + (1.0 - k.alpha) * std::exp(-k.rate2 * d);
        case KernelKind::quasi_exponential: return (1.0 + k.alpha * d) * std::exp(-k.rate1 * d);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

KernelFactorization factorize_kernel(const DiscountKernel& k, double T) {
    k.validate();
    KernelFactorization f;
    const double l1 = k.rate1, l2 = k.rate2, a = k.alpha;
    switch (k.kind) {
        case KernelKind::exponential:
            f.scale = [l1](double t) { return std::exp(-l1 * t); };
            f.terminal_coeff = 0.0;
            f.running_coeff = [](double) { return 0.0; };
            f.mixing = [](double, double) { return 0.0; };
            f.mixing_vanishes = true;
            return f;
        case KernelKind::heterogeneous:
            f.scale = [l1](double t) { return std::exp(-l1 * t); };
            f.terminal_coeff = 0.0;
            f.running_coeff = [l2](double r) { return std::exp(-l2 * r); };
            f.mixing = [l1, l2](double t, double s) {
                return std::exp((l2 - l1) * t) - std::exp((l2 - l1) * s);
            };
            return f;
        case KernelKind::convex_combination:
            f.scale = [l1](double t) { return std::exp(-l1 * t); };
            f.terminal_coeff = (1.0 - a) * std::exp(-l2 * T);
            f.running_coeff = [a, l2](double r) { return (1.0 - a) * std::exp(-l2 * r); };
            f.mixing = [l1, l2](double t, double s) {
                return std::exp((l2 - l1) * t) - std::exp((l2 - l1) * s);
            };
            return f;
        case KernelKind::quasi_exponential:
            f.scale = [l1](double t) { return std::exp(-l1 * t); };
            f.terminal_coeff = a * std::exp(-l1 * T);
            f.running_coeff = [a, l1](double r) { return a * std::exp(-l1 * r); };
            f.mixing = [](double t, double s) { return s - t; };
            return f;
        case KernelKind::hyperbolic:
            break;
    }
    throw UnsupportedError("no factorization of the form scale/mixing is available for the " +
                           kernel_kind_name(k.kind) + " kernel");
}

void ProblemSpec::validate() const {
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
    if (!dynamics.drift || !dynamics.diffusion) throw DomainError("dynamics incomplete");
    if (!cost.generator || !cost.free_term) throw DomainError("cost incomplete");
    if (controls.scan_points().empty()) throw DomainError("control set is empty");
    if (kernel) kernel->validate();
}

double eval_hamiltonian(const ProblemSpec& spec, double t, double s, const Vec& x, const Vec& u,
                        double theta, const RowVec& p, const Mat& P) {
    const double v = hamiltonian_raw(spec, t, s, x, u, theta, p, P);
    if (!std::isfinite(v))
        throw EvaluationError("non-finite Hamiltonian at " + describe(t, s, x, u));
    return v;
}

HamiltonianParts hamiltonian_parts_1d(const ProblemSpec& spec, double t, double s, double x,
                                      const Vec& u, double theta, double p) {
    const Vec xv = vec1(x);
    const double b = spec.dynamics.drift(s, xv, u)(0);
    const double sig = spec.dynamics.diffusion(s, xv, u)(0, 0);
    const double g = spec.cost.generator(t, s, xv, u, theta, row1(p * sig));
    return {sig * sig, p * b + g};
}

MinimizationResult minimize_hamiltonian(const ProblemSpec& spec, double t, double s, const Vec& x,
                                        double theta, const RowVec& p, const Mat& P) {
    const ControlSet& U = spec.controls;
    if (spec.minimizer) {
        Vec u = spec.minimizer(t, s, x, theta, p, P);
        bool truncated = false;
        if (U.is_finite()) {
            if (!U.contains(u))
                throw MinimizationError("closed-form minimizer left the finite control set at " +
                                        describe(t, s, x, u));
        } else {
            const Vec c = U.clamp(u);
            truncated = (c != u) || U.on_boundary(c);
            u = c;
        }
        return {u, eval_hamiltonian(spec, t, s, x, u, theta, p, P), truncated};
    }

    const auto& pts = U.scan_points();
    int best = -1;
    double best_v = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        const double v = hamiltonian_raw(spec, t, s, x, pts[i], theta, p, P);
        if (std::isfinite(v) && v < best_v) {
            best_v = v;
            best = i;
        }
    }
    if (best < 0)
        throw MinimizationError("every Hamiltonian evaluation was non-finite at t=" +
                                std::to_string(t) + " s=" + std::to_string(s));
    Vec u = pts[best];

    if (!U.is_finite() && U.refine() && U.dim() == 1 && pts.size() >= 3) {
        const double lo = pts[std::max(best - 1, 0)](0);
        const double hi = pts[std::min<int>(best + 1, static_cast<int>(pts.size()) - 1)](0);
        auto f = [&](double v) {
            const double h = hamiltonian_raw(spec, t, s, x, vec1(v), theta, p, P);
            return std::isfinite(h) ? h : std::numeric_limits<double>::infinity();
        };
        auto [uv, hv] = boost::math::tools::brent_find_minima(f, lo, hi, 40);
        if (hv < best_v) {
            best_v = hv;
            u = vec1(uv);
        }
    }
    return {u, best_v, U.on_boundary(u)};
}

SamplingReport check_by_sampling(const ProblemSpec& spec, const SamplingOptions& opt) {
    SamplingReport rep;
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> ux(opt.x_lo, opt.x_hi), ut(0.0, spec.horizon);
    std::normal_distribution<double> nz(0.0, 1.0);
    const int n = spec.dynamics.state_dim, d = spec.dynamics.noise_dim;
    const auto& pts = spec.controls.scan_points();
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);

    auto rand_x = [&] {
        Vec x(n);
        for (int i = 0; i < n; ++i) x(i) = ux(rng);
        return x;
    };
    auto rand_z = [&] {
        RowVec z(d);
        for (int i = 0; i < d; ++i) z(i) = nz(rng);
        return z;
    };

    for (int k = 0; k < opt.pairs; ++k) {
        double t1 = ut(rng), t2 = ut(rng), r = ut(rng);
        if (t1 > r) std::swap(t1, r);
        t2 = std::min(t2, r);
        const Vec x1 = rand_x(), x2 = rand_x();
        const Vec& u = pts[pick(rng)];
        const Vec& u2 = pts[pick(rng)];
        const double y1 = nz(rng), y2 = nz(rng);
        const RowVec z1 = rand_z(), z2 = rand_z();

        const Vec b1 = spec.dynamics.drift(r, x1, u), b2 = spec.dynamics.drift(r, x2, u);
        const Mat s1 = spec.dynamics.diffusion(r, x1, u), s2 = spec.dynamics.diffusion(r, x2, u);
        const double g1 = spec.cost.generator(t1, r, x1, u, y1, z1);
        const double g2 = spec.cost.generator(t2, r, x2, u, y2, z2);
        const double h1 = spec.cost.free_term(t1, x1), h2 = spec.cost.free_term(t2, x2);
        if (!b1.allFinite() || !b2.allFinite() || !s1.allFinite() || !s2.allFinite() ||
            !std::isfinite(g1) || !std::isfinite(g2) || !std::isfinite(h1) || !std::isfinite(h2))
            rep.finite = false;

        const double dx = (x1 - x2).norm();
        if (dx > 1e-12)
            rep.lipschitz_dynamics =
                std::max(rep.lipschitz_dynamics, ((b1 - b2).norm() + (s1 - s2).norm()) / dx);
        const double dg = std::abs(t1 - t2) + dx + std::abs(y1 - y2) + (z1 - z2).norm();
        if (dg > 1e-12)
            rep.lipschitz_cost = std::max(
                rep.lipschitz_cost, std::max(std::abs(g1 - g2), std::abs(h1 - h2)) / dg);

        if (spec.dynamics.sigma_control_free &&
            (spec.dynamics.diffusion(r, x1, u2) - s1).cwiseAbs().maxCoeff() > 1e-12)
            rep.sigma_control_free_ok = false;
        if (spec.cost.time_homogeneous_in_t) {
            if (std::abs(spec.cost.generator(t2, r, x1, u, y1, z1) - g1) > 1e-12 ||
                std::abs(spec.cost.free_term(t2, x1) - h1) > 1e-12)
                rep.time_homogeneous_ok = false;
        }
    }
    if (!rep.finite) rep.problems.push_back("non-finite coefficient evaluation");
    if (rep.lipschitz_dynamics > opt.lipschitz_bound)
        rep.problems.push_back("dynamics Lipschitz estimate above bound");
    if (rep.lipschitz_cost > opt.lipschitz_bound)
        rep.problems.push_back("cost Lipschitz estimate above bound");
    if (!rep.sigma_control_free_ok)
        rep.problems.push_back("sigma flagged control-free but varies with the control");
    if (!rep.time_homogeneous_ok)
        rep.problems.push_back("cost flagged homogeneous in t but varies with t");
    return rep;
}

}  // namespace tic
