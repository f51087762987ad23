#include "tic/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "tic/errors.hpp"
#include "tic/field_io.hpp"
#include "tic/parallel.hpp"

namespace tic {

std::string scheme_name(Scheme s) {
    return s == Scheme::explicit_euler ? "explicit" : "implicit_diffusion";
}

Scheme parse_scheme(const std::string& name) {
    if (name == "explicit") return Scheme::explicit_euler;
    if (name == "implicit_diffusion" || name == "implicit") return Scheme::implicit_diffusion;
    throw ConfigError("unknown scheme '" + name + "'");
}

std::vector<double> PdeConfig::time_grid(double horizon) const {
    if (time_steps < 1) throw ConfigError("time_steps must be positive");
    return build_partition(tau, horizon, time_steps).points;
}

namespace {

struct Stepper {
    const ProblemSpec& spec;
    const SpatialGrid& g;
    Scheme scheme;
    double cfl_safety;

    // One backward step prev (layer j+1) -> next (layer j) for a single row.
    // Hamiltonian data is taken at running time s_eval = s_{j+1}.
    template <class ControlAt, class YAt>
    void advance(int layer, double t_outer, double s_eval, double ds, std::span<const double> prev,
                 std::span<double> next, ControlAt&& control, YAt&& yarg) const {
        const int n = g.nodes;
        std::vector<double> a(n), e(n);
        for (int k = 0; k < n; ++k) {
            const Derivatives d = spatial_derivatives(prev, k, g.dx());
            const HamiltonianParts hp =
                hamiltonian_parts_1d(spec, t_outer, s_eval, g.x(k), control(k), yarg(k), d.first);
            a[k] = hp.a;
            e[k] = hp.e;
        }
        pde_detail::layer_update(prev, next, a, e, ds, g.dx(), scheme, cfl_safety, layer);
    }
};

void log_layer(std::ostream* log, int layer, double max_update, double lo, double hi) {
    if (!log) return;
    *log << layer << ',' << format_number(max_update) << ',' << format_number(lo) << ','
         << format_number(hi) << '\n';
}

struct LayerStats {
    double max_update = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(std::span<const double> prev, std::span<const double> next) {
        for (std::size_t k = 0; k < next.size(); ++k) {
            max_update = std::max(max_update, std::abs(next[k] - prev[k]));
            lo = std::min(lo, next[k]);
            hi = std::max(hi, next[k]);
        }
    }
};

void log_header(std::ostream* log) {
    if (log) *log << "layer,max_update,min_theta,max_theta\n";
}

EquilibriumSolution equilibrium_impl(const ProblemSpec& spec, const PdeConfig& cfg, YSlot slot) {
    spec.validate();
    if (spec.dynamics.state_dim != 1) throw UnsupportedError("grid solvers support n = 1 only");
    const auto times = cfg.time_grid(spec.horizon);
    const int N = static_cast<int>(times.size()) - 1;
    const SpatialGrid& g = cfg.space;
    const int nx = g.nodes;

    EquilibriumSolution sol;
    sol.theta = ThetaField(times, g);
    sol.strategy = FeedbackStrategy(times, g, spec.controls.dim());
    pde_detail::set_terminal_rows(spec, sol.theta, 0, N + 1);

    const Stepper st{spec, g, cfg.scheme, cfg.cfl_safety};
    std::vector<char> trunc(nx);
    log_header(cfg.log);
    for (int j = N - 1; j >= 0; --j) {
        const double sj = times[j], sn = times[j + 1], ds = sn - sj;
        const auto lag = std::as_const(sol.theta).slice(j, j + 1);
        parallel_for(nx, cfg.workers, [&](int k) {
            const Derivatives d = spatial_derivatives(lag, k, g.dx());
            const auto r = minimize_hamiltonian(spec, sj, sn, vec1(g.x(k)), lag[k], row1(d.first),
                                                mat1(d.second));
            sol.strategy.at(j, k) = r.control;
            trunc[k] = r.truncated;
        });
        sol.strategy.mark_defined(j);
        for (char c : trunc) sol.truncated_nodes += c;

        parallel_for(j + 1, cfg.workers, [&](int i) {
            const auto prev = std::as_const(sol.theta).slice(i, j + 1);
            auto ctrl = [&](int k) -> const Vec& { return sol.strategy.at(j, k); };
            if (slot == YSlot::lagged_diagonal)
                st.advance(j, times[i], sn, ds, prev, sol.theta.slice(i, j), ctrl,
                           [&](int k) { return lag[k]; });
            else
                st.advance(j, times[i], sn, ds, prev, sol.theta.slice(i, j), ctrl,
                           [&](int k) { return prev[k]; });
        });
        if (cfg.log) {
            LayerStats ls;
            for (int i = 0; i <= j; ++i)
                ls.add(std::as_const(sol.theta).slice(i, j + 1), std::as_const(sol.theta).slice(i, j));
            log_layer(cfg.log, j, ls.max_update, ls.lo, ls.hi);
        }
    }
    sol.value = diagonal_trace(sol.theta);
    if (slot == YSlot::own_row)
        sol.regime = "own-y-variant";
    else
        sol.regime = spec.dynamics.sigma_control_free ? "sigma-control-free" : "sigma-control-dependent";
    return sol;
}

}  // namespace

namespace pde_detail {

void layer_update(std::span<const double> prev, std::span<double> next, std::span<const double> a,
                  std::span<const double> e, double ds, double dx, Scheme scheme, double cfl_safety,
                  int layer) {
    const int n = static_cast<int>(prev.size());
    const double dx2 = dx * dx;
    if (scheme == Scheme::explicit_euler) {
        for (int k = 0; k < n; ++k) {
            const Derivatives d = spatial_derivatives(prev, k, dx);
            if (k > 0 && k < n - 1 && ds * a[k] * cfl_safety > dx2 * (1.0 + 1e-12))
                throw ConfigError("CFL violation: time step " + format_number(ds) +
                                  " exceeds dx^2/a = " + format_number(dx2 / a[k]));
            next[k] = prev[k] + ds * (0.5 * a[k] * d.second + e[k]);
        }
    } else {
        // Thomas sweep; boundary rows are identity rows
        std::vector<double> cp(n), dp(n);
        cp[0] = 0.0;
        dp[0] = prev[0] + ds * e[0];
        for (int k = 1; k < n; ++k) {
            const double c = k < n - 1 ? 0.5 * ds * a[k] / dx2 : 0.0;
            const double lower = -c, diag = 1.0 + 2.0 * c, upper = -c;
            const double m = diag - lower * cp[k - 1];
            cp[k] = upper / m;
            dp[k] = (prev[k] + ds * e[k] - lower * dp[k - 1]) / m;
        }
        next[n - 1] = dp[n - 1];
        for (int k = n - 2; k >= 0; --k) next[k] = dp[k] - cp[k] * next[k + 1];
    }
    for (int k = 0; k < n; ++k)
        if (!std::isfinite(next[k]))
            throw DivergenceError("non-finite update at node " + std::to_string(k), layer);
}

void set_terminal_rows(const ProblemSpec& spec, ThetaField& theta, int row_lo, int row_hi) {
    const int N = theta.steps();
    const auto& g = theta.space();
    for (int i = row_lo; i < row_hi; ++i) {
        auto sl = theta.slice(i, N);
        for (int k = 0; k < g.nodes; ++k) sl[k] = spec.cost.free_term(theta.times()[i], vec1(g.x(k)));
    }
}

void march_rows(const ProblemSpec& spec, const FeedbackStrategy& psi, ThetaField& theta, int row_lo,
                int row_hi, const ScalarField* diagonal_source, const PdeConfig& cfg) {
    const int N = theta.steps();
    const auto& times = theta.times();
    const auto& g = theta.space();
    if (psi.steps() != N) throw DomainError("strategy and field use different time grids");
    set_terminal_rows(spec, theta, row_lo, row_hi);
    const Stepper st{spec, g, cfg.scheme, cfg.cfl_safety};
    log_header(cfg.log);
    for (int j = N - 1; j >= row_lo; --j) {
        if (!psi.defined(j)) throw DomainError("strategy undefined on step " + std::to_string(j));
        const double sn = times[j + 1], ds = sn - times[j];
        const auto lag = diagonal_source ? diagonal_source->row(j) : std::as_const(theta).slice(j, j + 1);
        const int top = std::min(row_hi - 1, j);
        parallel_for(top - row_lo + 1, cfg.workers, [&](int r) {
            const int i = row_lo + r;
            st.advance(j, times[i], sn, ds, std::as_const(theta).slice(i, j + 1), theta.slice(i, j),
                       [&](int k) -> const Vec& { return psi.at(j, k); }, [&](int k) { return lag[k]; });
        });
        if (cfg.log) {
            LayerStats ls;
            for (int i = row_lo; i <= top; ++i)
                ls.add(std::as_const(theta).slice(i, j + 1), std::as_const(theta).slice(i, j));
            log_layer(cfg.log, j, ls.max_update, ls.lo, ls.hi);
        }
    }
}

}  // namespace pde_detail

EquilibriumSolution solve_equilibrium_hjb(const ProblemSpec& spec, const PdeConfig& cfg) {
    return equilibrium_impl(spec, cfg, YSlot::lagged_diagonal);
}

EquilibriumSolution solve_equilibrium_hjb_variant(const ProblemSpec& spec, const PdeConfig& cfg) {
    if (!spec.dynamics.sigma_control_free)
        throw DomainError("the comparison variant requires a control-free diffusion");
    return equilibrium_impl(spec, cfg, YSlot::own_row);
}

ThetaField solve_representation_pde(const ProblemSpec& spec, const FeedbackStrategy& psi,
                                    int window_start, const ScalarField* diagonal_source,
                                    const PdeConfig& cfg) {
    const int N = psi.steps();
    if (window_start < 0 || window_start > N) throw DomainError("window outside the time grid");
    if (diagonal_source && diagonal_source->rows() != N + 1)
        throw DomainError("diagonal source must live on the strategy's time grid");
    ThetaField full(psi.times(), psi.space());
    pde_detail::march_rows(spec, psi, full, window_start, N + 1, diagonal_source, cfg);
    if (window_start == 0) return full;
    std::vector<double> sub(psi.times().begin() + window_start, psi.times().end());
    if (sub.size() < 2) sub.push_back(sub.back());  // degenerate window [T, T]
    ThetaField out(sub, psi.space());
    const int M = out.steps();
    for (int i = 0; i <= M; ++i)
        for (int j = i; j <= M; ++j) {
            const auto src = std::as_const(full).slice(std::min(window_start + i, N), std::min(window_start + j, N));
            std::copy(src.begin(), src.end(), out.slice(i, j).begin());
        }
    return out;
}

ScalarField solve_frozen_pde(const ProblemSpec& spec, const FeedbackStrategy& psi, int window_start,
                             double outer_time, const ScalarField& diagonal_source,
                             const PdeConfig& cfg) {
    const int N = psi.steps();
    const auto& times = psi.times();
    const auto& g = psi.space();
    if (window_start < 0 || window_start > N) throw DomainError("window outside the time grid");
    if (diagonal_source.rows() != N + 1) throw DomainError("diagonal source must live on the strategy's time grid");
    std::vector<double> sub(times.begin() + window_start, times.end());
    ScalarField out(sub, g);
    const int M = N - window_start;
    for (int k = 0; k < g.nodes; ++k) out.at(M, k) = spec.cost.free_term(outer_time, vec1(g.x(k)));
    const Stepper st{spec, g, cfg.scheme, cfg.cfl_safety};
    log_header(cfg.log);
    for (int j = N - 1; j >= window_start; --j) {
        if (!psi.defined(j)) throw DomainError("strategy undefined on step " + std::to_string(j));
        const int l = j - window_start;
        const auto lag = diagonal_source.row(j);
        st.advance(j, outer_time, times[j + 1], times[j + 1] - times[j], std::as_const(out).row(l + 1),
                   out.row(l), [&](int k) -> const Vec& { return psi.at(j, k); },
                   [&](int k) { return lag[k]; });
        if (cfg.log) {
            LayerStats ls;
            ls.add(std::as_const(out).row(l + 1), std::as_const(out).row(l));
            log_layer(cfg.log, j, ls.max_update, ls.lo, ls.hi);
        }
    }
    return out;
}

ClassicalSolution solve_classical_hjb(const ProblemSpec& spec, const std::vector<double>& times, int a,
                                      int b, std::span<const double> terminal, double outer_time,
                                      const PdeConfig& cfg) {
    const int N = static_cast<int>(times.size()) - 1;
    if (a < 0 || b > N || a >= b) throw DomainError("classical HJB window must satisfy 0 <= a < b <= N");
    const SpatialGrid& g = cfg.space;
    if (static_cast<int>(terminal.size()) != g.nodes) throw DomainError("terminal does not match the spatial grid");
    std::vector<double> sub(times.begin() + a, times.begin() + b + 1);
    ClassicalSolution sol;
    sol.value = ScalarField(sub, g);
    sol.feedback = FeedbackStrategy(sub, g, spec.controls.dim());
    std::copy(terminal.begin(), terminal.end(), sol.value.row(b - a).begin());

    const Stepper st{spec, g, cfg.scheme, cfg.cfl_safety};
    std::vector<char> trunc(g.nodes);
    log_header(cfg.log);
    for (int j = b - 1; j >= a; --j) {
        const int l = j - a;
        const double sn = times[j + 1];
        const auto prev = std::as_const(sol.value).row(l + 1);
        parallel_for(g.nodes, cfg.workers, [&](int k) {
            const Derivatives d = spatial_derivatives(prev, k, g.dx());
            const auto r = minimize_hamiltonian(spec, outer_time, sn, vec1(g.x(k)), prev[k], row1(d.first),
                                                mat1(d.second));
            sol.feedback.at(l, k) = r.control;
            trunc[k] = r.truncated;
        });
        sol.feedback.mark_defined(l);
        for (char c : trunc) sol.truncated_nodes += c;
        st.advance(j, outer_time, sn, sn - times[j], prev, sol.value.row(l),
                   [&](int k) -> const Vec& { return sol.feedback.at(l, k); },
                   [&](int k) { return prev[k]; });
        if (cfg.log) {
            LayerStats ls;
            ls.add(prev, std::as_const(sol.value).row(l));
            log_layer(cfg.log, j, ls.max_update, ls.lo, ls.hi);
        }
    }
    return sol;
}

double row_spread(const ThetaField& theta) {
    const int N = theta.steps();
    double m = 0.0;
    for (int j = 0; j <= N; ++j) {
        const auto ref = theta.slice(0, j);
        for (int i = 1; i <= j; ++i) {
            const auto sl = theta.slice(i, j);
            for (std::size_t k = 0; k < sl.size(); ++k) m = std::max(m, std::abs(sl[k] - ref[k]));
        }
    }
    return m;
}

}  // namespace tic
