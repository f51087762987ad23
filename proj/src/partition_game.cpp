#include "tic/partition_game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tic/errors.hpp"

namespace tic {

PartitionBuilder::PartitionBuilder(const ProblemSpec& spec, const Partition& partition, const PdeConfig& cfg)
    : spec_(spec), cfg_(cfg) {
    spec.validate();
    const auto times = cfg.time_grid(spec.horizon);
    const int Ng = static_cast<int>(times.size()) - 1;
    const double tol = 1e-9 * (times.back() - times.front());
    result_.partition = partition;
    for (double t : partition.points) {
        const auto it = std::lower_bound(times.begin(), times.end(), t - tol);
        if (it == times.end() || std::abs(*it - t) > tol)
            throw ConfigError("partition point " + std::to_string(t) + " is not on the time grid");
        result_.grid_index.push_back(static_cast<int>(it - times.begin()));
    }
    if (result_.grid_index.front() != 0 || result_.grid_index.back() != Ng)
        throw ConfigError("partition must span the whole time grid");
    result_.strategy = FeedbackStrategy(times, cfg.space, spec.controls.dim());
    result_.theta = ThetaField(times, cfg.space);
    const int N = partition.intervals();
    result_.frozen.resize(N);
    result_.values.resize(N);
    next_ = N;
}

ExtensionStep PartitionBuilder::extend() {
    const int k = next_;
    if (k < 1) throw DomainError("all partition intervals are already extended");
    const auto& idx = result_.grid_index;
    const int N = result_.partition.intervals();
    const int Ng = result_.theta.steps();
    const int pk = idx[k], pk1 = idx[k - 1];
    const double t_owner = result_.theta.times()[pk1];
    auto& psi = result_.strategy;
    const std::string where = "extension of interval " + std::to_string(k);

    try {
        // Step 1: rows of [t_k, t_{k+1}) on layers >= their own time; rows to
        // the right were produced by earlier extensions
        pde_detail::march_rows(spec_, psi, result_.theta, pk, k < N ? idx[k + 1] : Ng + 1, nullptr, cfg_);

        // snapshot of the strategy already fixed on [t_k, T]
        std::vector<Vec> before;
        for (int j = pk; j < Ng; ++j)
            for (int x = 0; x < cfg_.space.nodes; ++x) before.push_back(psi.at(j, x));

        const ScalarField lag = lagged_diagonal(result_.theta);
        ScalarField frozen = solve_frozen_pde(spec_, psi, pk, t_owner, lag, cfg_);

        // Step 2: HJB of the owner of [t_{k-1}, t_k]
        auto hjb = solve_classical_hjb(spec_, result_.theta.times(), pk1, pk, frozen.row(0), t_owner, cfg_);

        // Step 3: splice
        for (int j = pk1; j < pk; ++j) {
            for (int x = 0; x < cfg_.space.nodes; ++x) psi.at(j, x) = hjb.feedback.at(j - pk1, x);
            psi.mark_defined(j);
        }

        std::size_t n = 0;
        for (int j = pk; j < Ng; ++j)
            for (int x = 0; x < cfg_.space.nodes; ++x)
                if (psi.at(j, x) != before[n++]) throw Error("strategy on [t_k, T] changed during " + where);

        result_.frozen[k - 1] = frozen;
        result_.values[k - 1] = hjb.value;
        --next_;
        return {k, std::move(frozen), std::move(hjb.value)};
    } catch (const ConfigError&) {
        throw;
    } catch (const DivergenceError& e) {
        throw DivergenceError(where + ": " + e.what(), e.layer());
    } catch (const Error& e) {
        throw Error(where + ": " + e.what());
    }
}

ApproximateEquilibrium PartitionBuilder::finish() {
    while (next_ > 0) extend();
    const auto& idx = result_.grid_index;
    pde_detail::march_rows(spec_, result_.strategy, result_.theta, idx[0], idx[1], nullptr, cfg_);
    return std::move(result_);
}

ApproximateEquilibrium build_approximate_equilibrium(const ProblemSpec& spec, const Partition& partition,
                                                     const PdeConfig& cfg) {
    PartitionBuilder b(spec, partition, cfg);
    return b.finish();
}

double max_strategy_diff(const FeedbackStrategy& a, const FeedbackStrategy& b) {
    if (a.steps() != b.steps() || a.space().nodes != b.space().nodes)
        throw DomainError("strategies live on different grids");
    double m = 0.0;
    for (int j = 0; j < a.steps(); ++j)
        for (int k = 0; k < a.space().nodes; ++k)
            m = std::max(m, (a.at(j, k) - b.at(j, k)).cwiseAbs().maxCoeff());
    return m;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

std::vector<ConvergenceRow> convergence_study(const ProblemSpec& spec, const std::vector<int>& N_list,
                                              const PdeConfig& cfg) {
    if (N_list.empty()) throw ConfigError("partition list is empty");
    for (std::size_t i = 0; i < N_list.size(); ++i) {
        if (N_list[i] < 1) throw ConfigError("partition sizes must be positive");
        if (i && N_list[i] <= N_list[i - 1]) throw ConfigError("partition sizes must be ascending");
        if (cfg.time_steps % N_list[i] != 0)
            throw ConfigError("time_steps must be a multiple of every partition size");
    }
    const double T = spec.horizon;
    std::vector<ThetaField> fields;
    std::vector<ConvergenceRow> rows;
    for (int N : N_list) {
        const Partition P = build_partition(cfg.tau, T, N);
        fields.push_back(build_approximate_equilibrium(spec, P, cfg).theta);
        rows.push_back({N, P.mesh(), 0.0, 0.0, 0.0});
    }
    const ThetaField limit = solve_equilibrium_hjb(spec, cfg).theta;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].gap_self = i + 1 < rows.size() ? max_abs_diff(fields[i], fields[i + 1]) : nan;
        rows[i].gap_limit = max_abs_diff(fields[i], limit);
    }
    std::vector<double> mx, gy;
    for (const auto& r : rows)
        if (std::isfinite(r.gap_self) && r.gap_self > 0.0) {
            mx.push_back(r.mesh);
            gy.push_back(r.gap_self);
        }
    if (mx.size() > 3) {
        mx.erase(mx.begin(), mx.end() - 3);
        gy.erase(gy.begin(), gy.end() - 3);
    }
    const double rate = mx.size() >= 2 ? loglog_slope(mx, gy) : nan;
    for (auto& r : rows) r.rate = rate;
    return rows;
}

}  // namespace tic
