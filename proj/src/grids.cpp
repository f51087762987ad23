#include "tic/grids.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tic/errors.hpp"

namespace tic {

double Partition::mesh() const {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) m = std::max(m, points[i + 1] - points[i]);
    return m;
}

Partition build_partition(double tau, double T, int N, PartitionKind kind, double ratio) {
    if (!(tau < T)) throw DomainError("partition needs tau < T");
    if (N < 1) throw DomainError("partition needs N >= 1");
    Partition P;
    P.points.resize(N + 1);
    P.points[0] = tau;
    P.points[N] = T;
    if (kind == PartitionKind::uniform) {
        for (int i = 1; i < N; ++i) P.points[i] = tau + (T - tau) * i / N;
    } else {
        if (!(ratio > 0.0)) throw DomainError("geometric ratio must be positive");
        double total = 0.0, gap = 1.0;
        for (int i = 0; i < N; ++i, gap *= ratio) total += gap;
        double acc = 0.0;
        gap = 1.0;
        for (int i = 1; i < N; ++i, gap *= ratio) {
            acc += gap;
            P.points[i] = tau + (T - tau) * acc / total;
        }
    }
    return P;
}

Partition partition_from_points(std::vector<double> points) {
    if (points.size() < 2) throw DomainError("partition needs at least two points");
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
        if (!(points[i] < points[i + 1])) throw DomainError("partition points must increase strictly");
    return Partition{std::move(points)};
}

namespace {
void check_inside(const Partition& P, double t) {
    if (t < P.start() || t > P.end())
        throw DomainError("time " + std::to_string(t) + " outside the partition");
}
}  // namespace

int interval_index(const std::vector<double>& times, double t) {
    const int N = static_cast<int>(times.size()) - 1;
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const int k = static_cast<int>(it - times.begin()) - 1;
    return std::clamp(k, 0, N - 1);
}

double pi_floor(const Partition& P, double t) {
    check_inside(P, t);
    return P.points[interval_index(P.points, t)];
}

double pi_ceil(const Partition& P, double t) {
    check_inside(P, t);
    const auto it = std::lower_bound(P.points.begin(), P.points.end(), t);
    const auto k = std::max<std::ptrdiff_t>(it - P.points.begin(), 1);
    return P.points[k];
}

SpatialGrid::SpatialGrid(double lo, double hi, int n) : x_lo(lo), x_hi(hi), nodes(n) {
    if (!(lo < hi)) throw DomainError("spatial grid needs x_lo < x_hi");
    if (n < 3) throw DomainError("spatial grid needs at least 3 nodes");
}

int SpatialGrid::nearest(double x) const {
    const long k = std::lround((x - x_lo) / dx());
    return static_cast<int>(std::clamp<long>(k, 0, nodes - 1));
}

Derivatives spatial_derivatives(std::span<const double> f, int k, double dx) {
    const int n = static_cast<int>(f.size());
    if (n < 3) throw DomainError("finite differences need at least 3 nodes");
    if (k == 0) return {(f[1] - f[0]) / dx, 0.0};
    if (k == n - 1) return {(f[n - 1] - f[n - 2]) / dx, 0.0};
    return {(f[k + 1] - f[k - 1]) / (2.0 * dx), (f[k + 1] - 2.0 * f[k] + f[k - 1]) / (dx * dx)};
}

namespace {
// cell index and weight for linear interpolation, extrapolating at the ends
std::pair<int, double> locate(const SpatialGrid& g, double x) {
    const double u = (x - g.x_lo) / g.dx();
    const int k = static_cast<int>(std::clamp(std::floor(u), 0.0, double(g.nodes - 2)));
    return {k, u - k};
}
}  // namespace

double interpolate(std::span<const double> f, const SpatialGrid& g, double x) {
    const auto [k, w] = locate(g, x);
    return (1.0 - w) * f[k] + w * f[k + 1];
}

double interpolate_slope(std::span<const double> f, const SpatialGrid& g, double x) {
    const double dx = g.dx();
    if (x <= g.x_lo) return spatial_derivatives(f, 0, dx).first;
    if (x >= g.x_hi) return spatial_derivatives(f, g.nodes - 1, dx).first;
    const auto [k, w] = locate(g, x);
    return (1.0 - w) * spatial_derivatives(f, k, dx).first + w * spatial_derivatives(f, k + 1, dx).first;
}

ThetaField::ThetaField(std::vector<double> times, SpatialGrid space)
    : times_(std::move(times)), space_(space) {
    if (times_.size() < 2) throw DomainError("time grid needs at least two points");
    const std::size_t n = times_.size();
    values_.assign(n * (n + 1) / 2 * static_cast<std::size_t>(space_.nodes), 0.0);
}

std::size_t ThetaField::offset(int i, int j) const {
    const int N = steps();
    if (i < 0 || j > N || i > j)
        throw std::out_of_range("ThetaField access outside the triangle: (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
    const std::size_t ii = static_cast<std::size_t>(i);
    const std::size_t row_start = ii * (N + 1) - ii * (ii - 1) / 2;
    return (row_start + static_cast<std::size_t>(j - i)) * space_.nodes;
}

std::span<double> ThetaField::slice(int i, int j) {
    return {values_.data() + offset(i, j), static_cast<std::size_t>(space_.nodes)};
}

std::span<const double> ThetaField::slice(int i, int j) const {
    return {values_.data() + offset(i, j), static_cast<std::size_t>(space_.nodes)};
}

ScalarField::ScalarField(std::vector<double> times, SpatialGrid space, double fill)
    : times_(std::move(times)), space_(space),
      values_(times_.size() * static_cast<std::size_t>(space_.nodes), fill) {}

std::span<double> ScalarField::row(int j) {
    if (j < 0 || j >= rows()) throw std::out_of_range("ScalarField row out of range");
    return {values_.data() + static_cast<std::size_t>(j) * space_.nodes,
            static_cast<std::size_t>(space_.nodes)};
}

std::span<const double> ScalarField::row(int j) const {
    if (j < 0 || j >= rows()) throw std::out_of_range("ScalarField row out of range");
    return {values_.data() + static_cast<std::size_t>(j) * space_.nodes,
            static_cast<std::size_t>(space_.nodes)};
}

FeedbackStrategy::FeedbackStrategy(std::vector<double> times, SpatialGrid space, int control_dim)
    : times_(std::move(times)), space_(space), control_dim_(control_dim) {
    if (times_.size() < 2) throw DomainError("strategy time grid needs at least two points");
    values_.assign((times_.size() - 1) * static_cast<std::size_t>(space_.nodes), Vec::Zero(control_dim));
    defined_.assign(times_.size() - 1, 0);
}

Vec& FeedbackStrategy::at(int j, int k) {
    if (j < 0 || j >= steps() || k < 0 || k >= space_.nodes)
        throw std::out_of_range("FeedbackStrategy index out of range");
    return values_[static_cast<std::size_t>(j) * space_.nodes + k];
}

const Vec& FeedbackStrategy::at(int j, int k) const {
    if (j < 0 || j >= steps() || k < 0 || k >= space_.nodes)
        throw std::out_of_range("FeedbackStrategy index out of range");
    return values_[static_cast<std::size_t>(j) * space_.nodes + k];
}

const Vec& FeedbackStrategy::control(double s, double x) const {
    return at(interval_index(times_, s), space_.nearest(x));
}

ScalarField diagonal_trace(const ThetaField& theta) {
    ScalarField v(theta.times(), theta.space());
    for (int j = 0; j <= theta.steps(); ++j) {
        const auto src = theta.slice(j, j);
        std::copy(src.begin(), src.end(), v.row(j).begin());
    }
    return v;
}

ScalarField lagged_diagonal(const ThetaField& theta) {
    const int N = theta.steps();
    ScalarField v(theta.times(), theta.space());
    for (int j = 0; j <= N; ++j) {
        const auto src = theta.slice(j, std::min(j + 1, N));
        std::copy(src.begin(), src.end(), v.row(j).begin());
    }
    return v;
}

double max_abs_diff(const ThetaField& a, const ThetaField& b) {
    if (a.raw().size() != b.raw().size()) throw DomainError("field shapes differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.raw().size(); ++i) m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
    return m;
}

}  // namespace tic
