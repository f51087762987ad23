#pragma once

#include <optional>
#include <vector>

#include "tic/grids.hpp"
#include "tic/model.hpp"
#include "tic/pde.hpp"

namespace tic {

struct ApproximateEquilibrium {
    Partition partition;
    std::vector<int> grid_index;  // time-grid index of each partition point
    FeedbackStrategy strategy;
    ThetaField theta;
    std::vector<ScalarField> frozen;  // frozen[k-1]: Theta~^k on layers >= t_k, outer time t_{k-1}
    std::vector<ScalarField> values;  // values[k-1]: HJB value on [t_{k-1}, t_k]
};

struct ExtensionStep {
    int interval = 0;  // k
    ScalarField frozen;
    ScalarField value;
};

// Backward induction over the partition intervals, one extension per call.
// The two-time field is grown leftward and never re-solved on rows that are
// already present.
class PartitionBuilder {
public:
    PartitionBuilder(const ProblemSpec& spec, const Partition& partition, const PdeConfig& cfg);

    int next_interval() const { return next_; }  // 0 once every interval is done
    ExtensionStep extend();
    // fills the rows of the first interval and returns the whole construction
    ApproximateEquilibrium finish();

    const FeedbackStrategy& strategy() const { return result_.strategy; }
    const ThetaField& theta() const { return result_.theta; }

private:
    const ProblemSpec& spec_;
    PdeConfig cfg_;
    ApproximateEquilibrium result_;
    int next_;
};

ApproximateEquilibrium build_approximate_equilibrium(const ProblemSpec& spec, const Partition& partition,
                                                     const PdeConfig& cfg);

double max_strategy_diff(const FeedbackStrategy& a, const FeedbackStrategy& b);

struct ConvergenceRow {
    int N = 0;
    double mesh = 0.0;
    double gap_self = 0.0;   // against the next entry of the list; NaN for the last
    double gap_limit = 0.0;  // against the equilibrium solve on the same grid
    double rate = 0.0;       // log-log slope of gap_self over the last three refinements
};

std::vector<ConvergenceRow> convergence_study(const ProblemSpec& spec, const std::vector<int>& N_list,
                                              const PdeConfig& cfg);

// least-squares slope of log(y) against log(x)
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tic
