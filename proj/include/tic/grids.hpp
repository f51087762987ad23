#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tic/types.hpp"

namespace tic {

enum class PartitionKind { uniform, geometric };

struct Partition {
    std::vector<double> points;

    int intervals() const { return static_cast<int>(points.size()) - 1; }
    double start() const { return points.front(); }
    double end() const { return points.back(); }
    double mesh() const;
};

// geometric: consecutive gaps grow by `ratio`
Partition build_partition(double tau, double T, int N, PartitionKind kind = PartitionKind::uniform,
                          double ratio = 2.0);
Partition partition_from_points(std::vector<double> points);

double pi_floor(const Partition& P, double t);
double pi_ceil(const Partition& P, double t);

// interval index k with t in [t_k, t_{k+1}) (last interval closed)
int interval_index(const std::vector<double>& times, double t);

struct SpatialGrid {
    double x_lo = -1.0;
    double x_hi = 1.0;
    int nodes = 3;
    int dim = 1;

    SpatialGrid() = default;
    SpatialGrid(double lo, double hi, int n);

    double dx() const { return (x_hi - x_lo) / (nodes - 1); }
    double x(int k) const { return x_lo + k * dx(); }
    int nearest(double x) const;
};

struct Derivatives {
    double first = 0.0;
    double second = 0.0;
};

// central differences inside, one-sided first difference and zero second
// difference at the two end nodes
Derivatives spatial_derivatives(std::span<const double> f, int k, double dx);

// piecewise-linear value and slope; linear extrapolation outside the grid
double interpolate(std::span<const double> f, const SpatialGrid& g, double x);
double interpolate_slope(std::span<const double> f, const SpatialGrid& g, double x);

// Two-time field on the triangle i <= j. Row i is the outer time t_i, layer
// j the running time s_j; each (i, j) slot holds one value per spatial node.
class ThetaField {
public:
    ThetaField() = default;
    ThetaField(std::vector<double> times, SpatialGrid space);

    int steps() const { return static_cast<int>(times_.size()) - 1; }  // N
    const std::vector<double>& times() const { return times_; }
    const SpatialGrid& space() const { return space_; }

    std::span<double> slice(int i, int j);
    std::span<const double> slice(int i, int j) const;
    double& at(int i, int j, int k) { return slice(i, j)[k]; }
    double at(int i, int j, int k) const { return slice(i, j)[k]; }

    double value(int i, int j, double x) const { return interpolate(slice(i, j), space_, x); }
    double slope(int i, int j, double x) const { return interpolate_slope(slice(i, j), space_, x); }

    const std::vector<double>& raw() const { return values_; }
    std::vector<double>& raw() { return values_; }

private:
    std::size_t offset(int i, int j) const;

    std::vector<double> times_;
    SpatialGrid space_;
    std::vector<double> values_;
};

// time x space array; row j belongs to times[j]
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(std::vector<double> times, SpatialGrid space, double fill = 0.0);

    int rows() const { return static_cast<int>(times_.size()); }
    const std::vector<double>& times() const { return times_; }
    const SpatialGrid& space() const { return space_; }

    std::span<double> row(int j);
    std::span<const double> row(int j) const;
    double& at(int j, int k) { return row(j)[k]; }
    double at(int j, int k) const { return row(j)[k]; }
    double value(int j, double x) const { return interpolate(row(j), space_, x); }

private:
    std::vector<double> times_;
    SpatialGrid space_;
    std::vector<double> values_;
};

// Feedback control per time step: entry (j, k) is applied on [s_j, s_{j+1})
// at node x_k. Lookup between nodes is nearest-node.
class FeedbackStrategy {
public:
    FeedbackStrategy() = default;
    FeedbackStrategy(std::vector<double> times, SpatialGrid space, int control_dim);

    int steps() const { return static_cast<int>(times_.size()) - 1; }
    int control_dim() const { return control_dim_; }
    const std::vector<double>& times() const { return times_; }
    const SpatialGrid& space() const { return space_; }

    Vec& at(int j, int k);
    const Vec& at(int j, int k) const;
    bool defined(int j) const { return defined_[j] != 0; }
    void mark_defined(int j) { defined_[j] = 1; }

    // time s is mapped to its step interval, x to the nearest node
    const Vec& control(double s, double x) const;

private:
    std::vector<double> times_;
    SpatialGrid space_;
    int control_dim_ = 1;
    std::vector<Vec> values_;
    std::vector<char> defined_;
};

ScalarField diagonal_trace(const ThetaField& theta);

// row j holds Theta[j][min(j+1, N)]: the diagonal value entering step j of
// the backward march
ScalarField lagged_diagonal(const ThetaField& theta);

double max_abs_diff(const ThetaField& a, const ThetaField& b);

}  // namespace tic
