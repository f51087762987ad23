#include "tic/diagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <utility>

#include "tic/errors.hpp"
#include "tic/field_io.hpp"
#include "tic/parallel.hpp"
#include "tic/stochastic.hpp"

namespace tic {

void DiagonalProblem::validate() const {
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
    if (!drift || !sigma || !generator || !free_term) throw DomainError("diagonal problem incomplete");
    if (separable) {
        if (!separable->g0 || !separable->h0 || !separable->alpha)
            throw DomainError("separable block incomplete");
        const double d = separable_defect(*this);
        if (!(d <= 1e-10)) throw DomainError("separable form violated by " + format_number(d));
    }
}

DiagonalProblem make_separable_problem(std::string name, double horizon,
                                       std::function<double(double, double, double, double)> drift,
                                       std::function<double(double, double, double)> sigma,
                                       DiagonalProblem::Separable sep) {
    DiagonalProblem p;
    p.name = std::move(name);
    p.horizon = horizon;
    p.drift = std::move(drift);
    p.sigma = std::move(sigma);
    const auto k = sep.kernel;
    const auto g0 = sep.g0;
    const auto h0 = sep.h0;
    const auto al = sep.alpha;
    p.generator = [k, g0, al](double t, double r, double x, double y, double z, double zeta) {
        return eval_discount(k, DiscountPart::running, t, r) * g0(r, x, y, zeta) + z * al(r);
    };
    p.free_term = [k, h0, horizon](double t, double x) {
        return eval_discount(k, DiscountPart::terminal, t, horizon) * h0(x);
    };
    p.separable = std::move(sep);
    return p;
}

DiagonalProblem make_lq_diagonal_problem(const LqParams& lp) {
    DiagonalProblem p;
    p.name = lp.id;
    p.horizon = lp.horizon;
    const double a = lp.a, b = lp.b, sig = lp.sigma, rho = lp.rho, umax = lp.umax;
    const double q = lp.q, qT = lp.qT, ycoef = lq_y_coefficient(lp);
    // the exponential case is written without outer time, i.e. a zero-rate kernel
    const DiscountKernel k =
        lp.kernel.kind == KernelKind::exponential ? DiscountKernel::exponential(0.0) : lp.kernel;
    auto psi = [b, sig, rho, umax](double zeta) { return std::clamp(-zeta * b / (sig * rho), -umax, umax); };
    p.drift = [a, b, psi](double, double x, double, double zeta) { return a * x + b * psi(zeta); };
    p.sigma = [sig](double, double, double) { return sig; };
    p.generator = [k, q, rho, ycoef, psi](double t, double r, double x, double y, double, double zeta) {
        const double u = psi(zeta);
        return eval_discount(k, DiscountPart::running, t, r) * (0.5 * (q * x * x + rho * u * u) - ycoef * y);
    };
    const double T = lp.horizon;
    p.free_term = [k, qT, T](double t, double x) {
        return eval_discount(k, DiscountPart::terminal, t, T) * 0.5 * qT * x * x;
    };
    if (k.kind == KernelKind::hyperbolic) return p;  // no factorization: pde route only
    DiagonalProblem::Separable sep;
    sep.g0 = [q, rho, ycoef, psi](double, double x, double y, double zeta) {
        const double u = psi(zeta);
        return 0.5 * (q * x * x + rho * u * u) - ycoef * y;
    };
    sep.h0 = [qT](double x) { return 0.5 * qT * x * x; };
    sep.alpha = [](double) { return 0.0; };
    sep.kernel = k;
    sep.factorization = factorize_kernel(k, T);
    p.separable = std::move(sep);
    return p;
}

double separable_defect(const DiagonalProblem& prob, int samples, std::uint64_t seed) {
    if (!prob.separable) return 0.0;
    const auto& s = *prob.separable;
    const double T = prob.horizon;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-2.0, 2.0);
    double worst = 0.0;
    for (int n = 0; n < samples; ++n) {
        double t = T * unit(rng), r = T * unit(rng);
        if (t > r) std::swap(t, r);
        const double x = 1.5 * sym(rng), y = sym(rng), z = sym(rng), zeta = sym(rng);
        const double h = prob.free_term(t, x);
        const double hs = eval_discount(s.kernel, DiscountPart::terminal, t, T) * s.h0(x);
        const double g = prob.generator(t, r, x, y, z, zeta);
        const double gs = eval_discount(s.kernel, DiscountPart::running, t, r) * s.g0(r, x, y, zeta) + z * s.alpha(r);
        worst = std::max({worst, std::abs(h - hs) / (1.0 + std::abs(h)), std::abs(g - gs) / (1.0 + std::abs(g))});
    }
    return worst;
}

SigmaReport check_sigma(const DiagonalProblem& prob, const std::vector<double>& times, const SpatialGrid& space) {
    SigmaReport rep;
    rep.min_a = std::numeric_limits<double>::infinity();
    rep.max_a = 0.0;
    for (double s : times)
        for (int k = 0; k < space.nodes; ++k) {
            const double sg = prob.sigma(s, space.x(k), 0.0);
            if (!std::isfinite(sg) || sg == 0.0)
                throw DomainError("sigma is not invertible at s=" + format_number(s) + ", x=" +
                                  format_number(space.x(k)));
            rep.min_a = std::min(rep.min_a, sg * sg);
            rep.max_a = std::max(rep.max_a, sg * sg);
        }
    rep.condition = rep.max_a / rep.min_a;
    if (rep.condition > 1e6)
        throw DomainError("sigma sigma^T condition number " + format_number(rep.condition) + " exceeds 1e6");
    return rep;
}

ThetaField solve_decoupling_pde(const DiagonalProblem& prob, const PdeConfig& cfg) {
    prob.validate();
    const auto times = cfg.time_grid(prob.horizon);
    const int N = static_cast<int>(times.size()) - 1;
    const SpatialGrid& g = cfg.space;
    const int nx = g.nodes;
    check_sigma(prob, times, g);

    ThetaField theta(times, g);
    for (int i = 0; i <= N; ++i) {
        auto sl = theta.slice(i, N);
        for (int k = 0; k < nx; ++k) sl[k] = prob.free_term(times[i], g.x(k));
    }
    if (cfg.log) *cfg.log << "layer,max_update,min_theta,max_theta\n";
    std::vector<double> a(nx), bb(nx), sg(nx), yd(nx), zeta(nx);
    for (int j = N - 1; j >= 0; --j) {
        const double sn = times[j + 1], ds = sn - times[j];
        // diagonal arguments from row j at layer j+1, one step behind
        const auto lag = std::as_const(theta).slice(j, j + 1);
        for (int k = 0; k < nx; ++k) {
            const double x = g.x(k);
            yd[k] = lag[k];
            sg[k] = prob.sigma(sn, x, yd[k]);
            zeta[k] = spatial_derivatives(lag, k, g.dx()).first * sg[k];
            bb[k] = prob.drift(sn, x, yd[k], zeta[k]);
            a[k] = sg[k] * sg[k];
        }
        parallel_for(j + 1, cfg.workers, [&](int i) {
            const auto prev = std::as_const(theta).slice(i, j + 1);
            std::vector<double> e(nx);
            for (int k = 0; k < nx; ++k) {
                const double p = spatial_derivatives(prev, k, g.dx()).first;
                e[k] = p * bb[k] + prob.generator(times[i], sn, g.x(k), yd[k], p * sg[k], zeta[k]);
            }
            pde_detail::layer_update(prev, theta.slice(i, j), a, e, ds, g.dx(), cfg.scheme, cfg.cfl_safety, j);
        });
        if (cfg.log) {
            double mu = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (int i = 0; i <= j; ++i) {
                const auto p = std::as_const(theta).slice(i, j + 1);
                const auto n = std::as_const(theta).slice(i, j);
                for (int k = 0; k < nx; ++k) {
                    mu = std::max(mu, std::abs(n[k] - p[k]));
                    lo = std::min(lo, n[k]);
                    hi = std::max(hi, n[k]);
                }
            }
            *cfg.log << j << ',' << format_number(mu) << ',' << format_number(lo) << ',' << format_number(hi)
                     << '\n';
        }
    }
    return theta;
}

namespace {

std::vector<int> residual_rows(int N, int count) {
    std::vector<int> rows;
    count = std::clamp(count, 1, N);
    for (int c = 0; c < count; ++c) {
        const int i = static_cast<int>(std::lround(double(c) * (N - 1) / std::max(1, count - 1)));
        if (rows.empty() || rows.back() != i) rows.push_back(i);
    }
    return rows;
}

void check_path_config(const DiagonalPathConfig& cfg) {
    if (cfg.n_paths < 1) throw ConfigError("n_paths must be positive");
    if (cfg.z_paths < 0) throw ConfigError("z_paths must be nonnegative");
    if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
    if (cfg.picard_max < 1) throw ConfigError("picard_max must be positive");
}

double rms_rows(const Eigen::VectorXd& sq) { return std::sqrt(sq.sum() / double(sq.size())); }

}  // namespace

DiagonalSolution solve_coupled_fsde_bsvie(const DiagonalProblem& prob, const ThetaField& theta, double xi,
                                          const DiagonalPathConfig& cfg) {
    prob.validate();
    check_path_config(cfg);
    const auto& times = theta.times();
    const int N = theta.steps(), P = cfg.n_paths;
    const int zp = std::min(cfg.z_paths, P);
    const auto& sp = theta.space();
    check_sigma(prob, times, sp);

    DiagonalSolution sol;
    sol.route = "pde";
    sol.times = times;
    sol.seed = cfg.seed;
    sol.uniqueness_guaranteed = prob.separable.has_value();
    sol.y_dependent_sigma = !prob.sigma_y_free;
    if (!sol.uniqueness_guaranteed) sol.warnings.push_back("no uniqueness guarantee without the separable structure");
    if (sol.y_dependent_sigma) sol.warnings.push_back("sigma depends on y: classical solvability not established");

    const Eigen::MatrixXd dW = brownian_increments(times, P, cfg.seed, cfg.workers);
    sol.X.resize(P, N + 1);
    sol.Y.resize(P, N + 1);
    sol.Z_diag.resize(P, N);
    parallel_for(P, cfg.workers, [&](int p) {
        double x = xi;
        for (int j = 0; j < N; ++j) {
            const double s = times[j];
            const double y = theta.value(j, j, x);
            const double sg = prob.sigma(s, x, y);
            const double zeta = theta.slope(j, j, x) * sg;
            sol.X(p, j) = x;
            sol.Y(p, j) = y;
            sol.Z_diag(p, j) = zeta;
            x += prob.drift(s, x, y, zeta) * (times[j + 1] - s) + sg * dW(p, j);
            if (!std::isfinite(x)) throw BlowUpError(p, j + 1);
        }
        sol.X(p, N) = x;
        sol.Y(p, N) = theta.value(N, N, x);
    });

    // Z(s_i, s_j) = Theta_x(s_i, s_j, X_j) sigma(s_j, X_j, Y_j)
    auto z_entry = [&](int i, int j, double x, double y) {
        return theta.slope(i, j, x) * prob.sigma(times[j], x, y);
    };
    sol.Z.resize(N);
    for (int j = 0; j < N; ++j) {
        sol.Z[j].resize(zp, j + 1);
        for (int p = 0; p < zp; ++p)
            for (int i = 0; i <= j; ++i) sol.Z[j](p, i) = z_entry(i, j, sol.X(p, j), sol.Y(p, j));
    }

    // integral equation along the paths; the second-order Ito-Taylor term
    // 0.5 sigma d_x(Theta_x sigma) (dW^2 - ds) keeps the stochastic integral
    // error at first order in ds
    const double hdx = 0.5 * sp.dx();
    for (int i : residual_rows(N, cfg.residual_rows)) {
        Eigen::VectorXd sq(P);
        parallel_for(P, cfg.workers, [&](int p) {
            double rhs = prob.free_term(times[i], sol.X(p, N));
            for (int j = i; j < N; ++j) {
                const double x = sol.X(p, j), y = sol.Y(p, j), ds = times[j + 1] - times[j];
                const double z = z_entry(i, j, x, y);
                const double sg = prob.sigma(times[j], x, y);
                const double dz = (z_entry(i, j, x + hdx, y) - z_entry(i, j, x - hdx, y)) / (2.0 * hdx);
                const double w = dW(p, j);
                rhs += prob.generator(times[i], times[j], x, y, z, sol.Z_diag(p, j)) * ds - z * w -
                       0.5 * sg * dz * (w * w - ds);
            }
            const double r = sol.Y(p, i) - rhs;
            sq(p) = r * r;
        });
        sol.residual = std::max(sol.residual, rms_rows(sq));
    }
    return sol;
}

DiagonalSolution solve_h6_fbsde_reduction(const DiagonalProblem& prob, double xi, const std::vector<double>& times,
                                          const DiagonalPathConfig& cfg) {
    prob.validate();
    check_path_config(cfg);
    if (!prob.separable) throw UnsupportedError("the reduction needs the separable structure");
    if (!prob.sigma_y_free) throw UnsupportedError("the reduction needs sigma free of y");
    const auto& sep = *prob.separable;
    const auto& F = sep.factorization;
    if (!F.scale || !F.mixing || !F.running_coeff) throw UnsupportedError("kernel factorization missing");
    if (times.size() < 2) throw DomainError("time grid needs at least two points");
    if (std::abs(times.back() - prob.horizon) > 1e-12) throw DomainError("time grid must end at the horizon");

    const int N = static_cast<int>(times.size()) - 1, P = cfg.n_paths;
    const int zp = std::min(cfg.z_paths, P);
    const double tau = times[0], T = prob.horizon;
    std::vector<double> Ms(N + 1), Mix(N + 1), nu0(N + 1), K(N + 1), al(N + 1);
    for (int j = 0; j <= N; ++j) {
        Ms[j] = F.scale(times[j]);
        Mix[j] = F.mixing(times[j], tau);
        nu0[j] = F.scale(tau) * eval_discount(sep.kernel, DiscountPart::running, tau, times[j]);
        K[j] = F.running_coeff(times[j]);
        al[j] = sep.alpha(times[j]);
        if (!(Ms[j] > 0.0)) throw DomainError("scale function must be positive");
    }
    const double termA = F.scale(tau) * eval_discount(sep.kernel, DiscountPart::terminal, tau, T);
    const double termH = F.terminal_coeff;
    const double aux = cfg.zero_auxiliary ? 0.0 : 1.0;

    DiagonalSolution sol;
    sol.route = "fbsde";
    sol.times = times;
    sol.seed = cfg.seed;
    sol.uniqueness_guaranteed = true;
    const Eigen::MatrixXd dW = brownian_increments(times, P, cfg.seed, cfg.workers);

    // coupling maps x -> Y(s_j) and x -> Z(s_j, s_j), damped across sweeps
    std::vector<PolyMap> cy(N), cz(N);
    Eigen::MatrixXd X(P, N + 1), Xold;
    Eigen::MatrixXd A(P, N + 1), H(P, N + 1), Yout(P, N + 1), Zd(P, N), B(P, N), Zh(P, N), G(P, N);
    Eigen::MatrixXd c(P, 2), z(P, 2), resid(P, 2);

    for (int sweep = 1;; ++sweep) {
        parallel_for(P, cfg.workers, [&](int p) {
            double x = xi;
            X(p, 0) = x;
            for (int j = 0; j < N; ++j) {
                const double s = times[j], y = cy[j](x);
                x += prob.drift(s, x, y, cz[j](x)) * (times[j + 1] - s) + prob.sigma(s, x, y) * dW(p, j);
                if (!std::isfinite(x)) throw BlowUpError(p, j + 1);
                X(p, j + 1) = x;
            }
        });
        double change = std::numeric_limits<double>::infinity();
        if (sweep > 1) {
            change = 0.0;
            for (int j = 1; j <= N; ++j)
                change = std::max(change, std::sqrt((X.col(j) - Xold.col(j)).squaredNorm() / P));
        }
        sol.residual_history.push_back(change);
        Xold = X;

        for (int p = 0; p < P; ++p) {
            const double h0 = sep.h0(X(p, N));
            A(p, N) = termA * h0;
            H(p, N) = termH * h0;
            Yout(p, N) = (A(p, N) + Mix[N] * aux * H(p, N)) / Ms[N];
        }
        for (int j = N - 1; j >= 0; --j) {
            const double dt = times[j + 1] - times[j], s = times[j];
            const LayerProjector proj(X.col(j), cfg.basis);
            if (proj.degraded() && sweep == 1)
                sol.warnings.push_back("regression degree lowered at layer " + std::to_string(j));
            Eigen::MatrixXd tgt(P, 2);
            tgt.col(0) = A.col(j + 1);
            tgt.col(1) = H.col(j + 1);
            const Eigen::MatrixXd cc = proj.coefficients(tgt);
            proj.fit(cc, c);
            resid.col(0) = (A.col(j + 1) - c.col(0)).cwiseProduct(dW.col(j)) / dt;
            resid.col(1) = (H.col(j + 1) - c.col(1)).cwiseProduct(dW.col(j)) / dt;
            const Eigen::MatrixXd zc = proj.coefficients(resid);
            proj.fit(zc, z);
            if (aux == 0.0) {
                c.col(1).setZero();
                z.col(1).setZero();
            }
            for (int p = 0; p < P; ++p) {
                const double y = (c(p, 0) + Mix[j] * c(p, 1)) / Ms[j];
                const double zeta = (z(p, 0) + Mix[j] * z(p, 1)) / Ms[j];
                const double g0 = sep.g0(s, X(p, j), y, zeta);
                G(p, j) = g0;
                A(p, j) = c(p, 0) + dt * (nu0[j] * g0 + z(p, 0) * al[j]);
                H(p, j) = c(p, 1) + dt * (K[j] * g0 + z(p, 1) * al[j]);
                Yout(p, j) = (A(p, j) + Mix[j] * H(p, j)) / Ms[j];
                Zd(p, j) = zeta;
                B(p, j) = z(p, 0);
                Zh(p, j) = z(p, 1);
            }
            if (!A.col(j).allFinite() || !H.col(j).allFinite())
                throw DivergenceError("non-finite backward value", j);

            // new coupling maps, blended with the previous ones on this layer's states
            const Eigen::VectorXd ny = (cc.col(0) + Mix[j] * aux * cc.col(1)) / Ms[j];
            const Eigen::VectorXd nz = (zc.col(0) + Mix[j] * aux * zc.col(1)) / Ms[j];
            if (sweep == 1 || cfg.damping == 1.0) {
                cy[j] = proj.map(ny);
                cz[j] = proj.map(nz);
            } else {
                Eigen::MatrixXd blend(P, 2), fy(P, 1), fz(P, 1);
                proj.fit(ny, fy);
                proj.fit(nz, fz);
                for (int p = 0; p < P; ++p) {
                    blend(p, 0) = cfg.damping * fy(p, 0) + (1.0 - cfg.damping) * cy[j](X(p, j));
                    blend(p, 1) = cfg.damping * fz(p, 0) + (1.0 - cfg.damping) * cz[j](X(p, j));
                }
                const Eigen::MatrixXd bc = proj.coefficients(blend);
                cy[j] = proj.map(bc.col(0));
                cz[j] = proj.map(bc.col(1));
            }
        }
        sol.sweeps = sweep;
        if (change <= cfg.picard_tol) break;
        if (sweep >= cfg.picard_max)
            throw PicardError("forward-backward iteration did not settle after " + std::to_string(sweep) +
                                  " sweeps (last change " + format_number(change) + ")",
                              sol.residual_history);
    }

    sol.X = X;
    sol.Y = Yout;
    sol.Z_diag = Zd;
    // Z(s_i, s_j) = (z~(tau, s_j) + M(s_i, tau) Z^(s_j)) / scale(s_i); i = j reproduces Z_diag
    sol.Z.resize(N);
    for (int j = 0; j < N; ++j) {
        sol.Z[j].resize(zp, j + 1);
        for (int p = 0; p < zp; ++p)
            for (int i = 0; i <= j; ++i) sol.Z[j](p, i) = (B(p, j) + Mix[i] * Zh(p, j)) / Ms[i];
        for (int p = 0; p < zp; ++p) sol.Z[j](p, j) = Zd(p, j);
    }

    // scaling check: the row-t_i equation solved directly must satisfy
    // scale(t_i) y(t_i, s) = y~(tau, s) + M(t_i, tau) Y^(s)
    for (int i : residual_rows(N, cfg.residual_rows)) {
        const double ti = times[i];
        const double mu = eval_discount(sep.kernel, DiscountPart::terminal, ti, T);
        Eigen::VectorXd y(P), cond(P), zz(P);
        for (int p = 0; p < P; ++p) y(p) = mu * sep.h0(X(p, N));
        for (int j = N - 1; j >= i; --j) {
            const double dt = times[j + 1] - times[j];
            const LayerProjector proj(X.col(j), cfg.basis);
            cond = proj.project(y);
            zz = proj.project((y - cond).cwiseProduct(dW.col(j)) / dt);
            const double nu = eval_discount(sep.kernel, DiscountPart::running, ti, times[j]);
            y = cond + dt * (nu * G.col(j) + al[j] * zz);
        }
        const Eigen::VectorXd lhs = Ms[i] * y;
        const Eigen::VectorXd rhs = A.col(i) + Mix[i] * aux * H.col(i);
        sol.residual = std::max(sol.residual, std::sqrt((lhs - rhs).squaredNorm() / P));
    }
    return sol;
}

RouteGaps cross_validate_diagonal(const DiagonalSolution& a, const DiagonalSolution& b) {
    if (a.times.size() != b.times.size()) throw DomainError("routes use different time grids");
    for (std::size_t j = 0; j < a.times.size(); ++j)
        if (std::abs(a.times[j] - b.times[j]) > 1e-12) throw DomainError("routes use different time grids");
    if (a.n_paths() != b.n_paths()) throw DomainError("routes use different path counts");
    if (a.seed != b.seed) throw DomainError("routes use different seeds");
    auto rms = [](const Eigen::MatrixXd& m) { return std::sqrt(m.squaredNorm() / double(m.size())); };
    return {rms(a.Y - b.Y), rms(a.Z_diag - b.Z_diag), rms(a.X - b.X)};
}

void write_diagonal_csv(const DiagonalSolution& sol, int max_paths, std::ostream& os) {
    const int P = std::min(max_paths, sol.n_paths());
    const int N = static_cast<int>(sol.times.size()) - 1;
    os << "path,s_index,s,X,Y,Z_diag\n";
    for (int p = 0; p < P; ++p)
        for (int j = 0; j <= N; ++j) {
            os << p << ',' << j << ',' << format_number(sol.times[j]) << ',' << format_number(sol.X(p, j)) << ','
               << format_number(sol.Y(p, j)) << ',';
            if (j < N) os << format_number(sol.Z_diag(p, j));
            os << '\n';
        }
}

}  // namespace tic
