#include "tic/stochastic.hpp"

#include <cmath>
#include <string>

#include "tic/errors.hpp"
#include "tic/parallel.hpp"

namespace tic {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void require_scalar(const ProblemSpec& spec) {
    if (spec.dynamics.state_dim != 1 || spec.dynamics.noise_dim != 1 || spec.controls.dim() != 1)
        throw UnsupportedError("Monte Carlo routines support n = d = m = 1 only");
}

void note_degraded(const LayerProjector& proj, int j, std::vector<std::string>& warnings) {
    if (proj.degraded())
        warnings.push_back("regression degree lowered to " + std::to_string(proj.degree()) + " at step " +
                           std::to_string(j));
}

}  // namespace

Rng path_rng(std::uint64_t seed, std::uint64_t path) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(path + 0x632BE59BD9B4E019ULL)));
}

PathPolicy feedback_policy(const FeedbackStrategy& psi) {
    return [&psi](int, int, double s, double x) { return psi.control(s, x)(0); };
}

PathPolicy open_loop_policy(Eigen::MatrixXd controls) {
    return [c = std::move(controls)](int p, int j, double, double) { return c(p, j); };
}

PathPolicy constant_policy(double u) {
    return [u](int, int, double, double) { return u; };
}

PathPolicy spliced_policy(double u, double until, PathPolicy rest) {
    return [u, until, rest = std::move(rest)](int p, int j, double s, double x) {
        return s < until - 1e-12 ? u : rest(p, j, s, x);
    };
}

SamplePaths simulate_sde(const ProblemSpec& spec, const PathPolicy& policy, const std::vector<double>& times,
                         const InitialState& xi, int n_paths, std::uint64_t seed, int workers) {
    require_scalar(spec);
    if (n_paths < 1) throw ConfigError("n_paths must be positive");
    if (times.size() < 2) throw DomainError("time grid needs at least two points");
    SamplePaths sp;
    sp.times = times;
    sp.n_paths = n_paths;
    sp.seed = seed;
    const int N = sp.steps();
    sp.X.resize(n_paths, N + 1);
    sp.dW.resize(n_paths, N);
    sp.U.resize(n_paths, N);
    parallel_for(n_paths, workers, [&](int p) {
        Rng rng = path_rng(seed, static_cast<std::uint64_t>(p));
        std::normal_distribution<double> normal(0.0, 1.0);
        double x = xi.sampler ? xi.sampler(rng) : xi.value;
        sp.X(p, 0) = x;
        for (int j = 0; j < N; ++j) {
            const double dt = times[j + 1] - times[j];
            const double dw = normal(rng) * std::sqrt(dt);
            const double u = policy(p, j, times[j], x);
            const Vec xv = vec1(x), uv = vec1(u);
            const double b = spec.dynamics.drift(times[j], xv, uv)(0);
            const double s = spec.dynamics.diffusion(times[j], xv, uv)(0, 0);
            x += b * dt + s * dw;
            if (!std::isfinite(x)) throw BlowUpError(p, j + 1);
            sp.dW(p, j) = dw;
            sp.U(p, j) = u;
            sp.X(p, j + 1) = x;
        }
    });
    return sp;
}

Eigen::MatrixXd brownian_increments(const std::vector<double>& times, int n_paths, std::uint64_t seed,
                                    int workers) {
    if (n_paths < 1) throw ConfigError("n_paths must be positive");
    if (times.size() < 2) throw DomainError("time grid needs at least two points");
    const int N = static_cast<int>(times.size()) - 1;
    Eigen::MatrixXd dW(n_paths, N);
    parallel_for(n_paths, workers, [&](int p) {
        Rng rng = path_rng(seed, static_cast<std::uint64_t>(p));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int j = 0; j < N; ++j) dW(p, j) = normal(rng) * std::sqrt(times[j + 1] - times[j]);
    });
    return dW;
}

BsdeResult solve_bsde_lsmc(const SamplePaths& paths, const BsdeGenerator& g,
                           const std::function<double(double x)>& terminal, const RegressionBasis& basis) {
    const int N = paths.steps(), P = paths.n_paths;
    BsdeResult res;
    res.Y.resize(P, N + 1);
    res.Z.resize(P, N);
    for (int p = 0; p < P; ++p) res.Y(p, N) = terminal(paths.X(p, N));
    Eigen::MatrixXd c(P, 1), z(P, 1);
    for (int j = N - 1; j >= 0; --j) {
        const double dt = paths.dt(j), r = paths.times[j];
        const LayerProjector proj(paths.X.col(j), basis);
        note_degraded(proj, j, res.warnings);
        proj.fit(proj.coefficients(res.Y.col(j + 1)), c);
        const Eigen::MatrixXd resid = (res.Y.col(j + 1) - c.col(0)).cwiseProduct(paths.dW.col(j)) / dt;
        proj.fit(proj.coefficients(resid), z);
        res.Z.col(j) = z.col(0);
        for (int p = 0; p < P; ++p)
            res.Y(p, j) = c(p, 0) + dt * g(r, paths.X(p, j), paths.U(p, j), c(p, 0), z(p, 0));
        if (!res.Y.col(j).allFinite()) throw DivergenceError("non-finite BSDE value", j);
    }
    return res;
}

namespace {

// One backward sweep over all outer-time columns. `prev` is the previous
// sweep's Y (picard mode) or null (lagged mode); `zero_generator` gives the
// initial guess of the picard iteration.
void bsvie_sweep(const SamplePaths& paths, const CostSpec& cost, const BsvieOptions& opt,
                 const Eigen::MatrixXd* prev, bool zero_generator, AdaptedPair& out) {
    const int N = paths.steps(), P = paths.n_paths;
    const int zp = std::min(opt.z_paths, P);
    const auto& times = paths.times;
    auto outer = [&](int i) { return opt.outer_time ? opt.outer_time(i) : times[i]; };

    out.times = times;
    out.Y.resize(P, N + 1);
    out.Z_diag.resize(P, N);
    out.y_arg.resize(P, N);
    out.Z.assign(N, Eigen::MatrixXd());
    out.basis = opt.basis;

    Eigen::MatrixXd W(P, N + 1), F(P, N + 1), R(P, N + 1);
    parallel_for(N + 1, opt.workers, [&](int i) {
        const double ti = outer(i);
        for (int p = 0; p < P; ++p) W(p, i) = cost.free_term(ti, vec1(paths.X(p, N)));
    });
    out.Y.col(N) = W.col(N);

    for (int j = N - 1; j >= 0; --j) {
        const int m = j + 1;
        const double dt = paths.dt(j), r = times[j];
        const LayerProjector proj(paths.X.col(j), opt.basis);
        note_degraded(proj, j, out.warnings);
        if (j == 0) out.first_target = W.col(0);

        auto T = W.leftCols(m);
        auto Fm = F.leftCols(m);
        auto Rm = R.leftCols(m);
        proj.fit(proj.coefficients(T), Fm);
        Rm = (T - Fm).array().colwise() * (paths.dW.col(j).array() / dt);
        const Eigen::MatrixXd cz = proj.coefficients(Rm);
        proj.fit(cz, Rm);  // Rm now holds the fitted Z(s_i, s_j)

        if (prev)
            out.y_arg.col(j) = prev->col(j);
        else
            out.y_arg.col(j) = F.col(j);

        if (zero_generator) {
            T = Fm;
        } else {
            const auto yarg = out.y_arg.col(j);
            parallel_for(m, opt.workers, [&](int i) {
                const double ti = outer(i);
                for (int p = 0; p < P; ++p) {
                    const double x = paths.X(p, j);
                    W(p, i) = F(p, i) + dt * cost.generator(ti, r, vec1(x), vec1(paths.U(p, j)), yarg(p),
                                                            row1(R(p, i)));
                }
            });
        }
        if (!W.col(j).allFinite()) throw DivergenceError("non-finite BSVIE value", j);
        out.Y.col(j) = W.col(j);
        out.Z_diag.col(j) = R.col(j);
        out.Z[j] = R.topLeftCorner(zp, m);
    }
}

}  // namespace

AdaptedPair solve_bsvie(const SamplePaths& paths, const CostSpec& cost, const BsvieOptions& opt) {
    AdaptedPair out;
    if (opt.mode == DiagonalMode::lagged) {
        bsvie_sweep(paths, cost, opt, nullptr, false, out);
        out.sweeps = 1;
        return out;
    }
    bsvie_sweep(paths, cost, opt, nullptr, true, out);
    for (int k = 1; k <= opt.picard_max; ++k) {
        const Eigen::MatrixXd prev = out.Y;
        AdaptedPair next;
        bsvie_sweep(paths, cost, opt, &prev, false, next);
        const double res = (next.Y - prev).cwiseAbs().maxCoeff();
        next.residual_history = out.residual_history;
        next.residual_history.push_back(res);
        out = std::move(next);
        out.sweeps = k;
        if (res < opt.tol) return out;
    }
    std::string hist;
    for (double h : out.residual_history) hist += " " + std::to_string(h);
    throw PicardError("BSVIE picard iteration did not converge in " + std::to_string(opt.picard_max) +
                          " sweeps; residuals:" + hist,
                      out.residual_history);
}

namespace {

struct FrozenMarch {
    Eigen::MatrixXd at_start;                // paths x columns: value at times[t_index]
    Eigen::MatrixXd Y;                       // single column runs only: paths x (N+1)
    Eigen::MatrixXd Z;                       // single column runs only: paths x N
    Eigen::MatrixXd y_arg;                   // single column runs only
};

// Backward equations with outer time frozen at times[t_index], one per window
// end. Column c uses base.y_arg on steps >= ends[c] and its own projected
// next value before that.
FrozenMarch frozen_march(const SamplePaths& paths, const CostSpec& cost, int t_index, const std::vector<int>& ends,
                         const AdaptedPair& base, const BsvieOptions& opt) {
    const int N = paths.steps(), P = paths.n_paths;
    const int nc = static_cast<int>(ends.size());
    const double t = paths.times[t_index];
    const bool keep = nc == 1;
    FrozenMarch fm;
    if (keep) {
        fm.Y.resize(P, N + 1);
        fm.Z.resize(P, N);
        fm.y_arg.resize(P, N);
    }
    Eigen::MatrixXd W(P, nc), F(P, nc), R(P, nc);
    for (int p = 0; p < P; ++p) W.row(p).setConstant(cost.free_term(t, vec1(paths.X(p, N))));
    if (keep) fm.Y.col(N) = W.col(0);
    for (int j = N - 1; j >= t_index; --j) {
        const double dt = paths.dt(j), r = paths.times[j];
        const LayerProjector proj(paths.X.col(j), opt.basis);
        proj.fit(proj.coefficients(W), F);
        R = (W - F).array().colwise() * (paths.dW.col(j).array() / dt);
        const Eigen::MatrixXd cz = proj.coefficients(R);
        proj.fit(cz, R);
        parallel_for(nc, opt.workers, [&](int c) {
            const bool own = j < ends[c];
            for (int p = 0; p < P; ++p) {
                const double y = own ? F(p, c) : base.y_arg(p, j);
                W(p, c) = F(p, c) + dt * cost.generator(t, r, vec1(paths.X(p, j)), vec1(paths.U(p, j)), y,
                                                        row1(R(p, c)));
            }
        });
        if (!W.allFinite()) throw DivergenceError("non-finite frozen-window value", j);
        if (keep) {
            fm.Y.col(j) = W.col(0);
            fm.Z.col(j) = R.col(0);
            if (j < ends[0])
                fm.y_arg.col(j) = F.col(0);
            else
                fm.y_arg.col(j) = base.y_arg.col(j);
        }
    }
    fm.at_start = W;
    return fm;
}

}  // namespace

AdaptedPair solve_modified_bsvie(const SamplePaths& paths, const CostSpec& cost, int t_index, int window_end,
                                 const BsvieOptions& opt, const AdaptedPair& base, bool full) {
    const int N = paths.steps();
    if (t_index < 0 || window_end < t_index || window_end > N)
        throw DomainError("modified BSVIE window must satisfy t <= t + eps <= T");
    const auto& times = paths.times;
    if (full) {
        BsvieOptions o = opt;
        const double t = times[t_index];
        o.outer_time = [t, t_index, window_end, &times](int i) {
            return i >= t_index && i <= window_end ? t : times[i];
        };
        return solve_bsvie(paths, cost, o);
    }
    const FrozenMarch fm = frozen_march(paths, cost, t_index, {window_end}, base, opt);
    AdaptedPair out = base;
    const int zp = base.Z.empty() ? 0 : static_cast<int>(base.Z.front().rows());
    for (int i = t_index; i <= window_end; ++i) {
        out.Y.col(i) = fm.Y.col(i);
        if (i < N) {
            out.Z_diag.col(i) = fm.Z.col(i);
            out.y_arg.col(i) = fm.y_arg.col(i);
        }
    }
    for (int j = t_index; j < N; ++j)
        for (int i = t_index; i <= std::min(j, window_end); ++i) out.Z[j].col(i) = fm.Z.col(j).head(zp);
    return out;
}

std::vector<double> mc_time_grid(double t, double T, int steps) {
    if (steps < 1) throw ConfigError("Monte Carlo time_steps must be positive");
    return build_partition(t, T, steps).points;
}

int grid_index_of(const std::vector<double>& times, double t) {
    const double tol = 1e-9 * (times.back() - times.front());
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - t) <= tol) return static_cast<int>(i);
    throw ConfigError("time " + std::to_string(t) + " is not a point of the Monte Carlo grid");
}

// exposed to studies.cpp
Eigen::MatrixXd frozen_window_values(const SamplePaths& paths, const CostSpec& cost, int t_index,
                                     const std::vector<int>& ends, const AdaptedPair& base, const BsvieOptions& opt) {
    return frozen_march(paths, cost, t_index, ends, base, opt).at_start;
}

}  // namespace tic
