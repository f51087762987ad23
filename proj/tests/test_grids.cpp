#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "tic/errors.hpp"
#include "tic/field_io.hpp"
#include "tic/grids.hpp"

using namespace tic;

TEST(Partition, UniformExamples) {
    auto p1 = build_partition(0, 1, 1);
    EXPECT_EQ(p1.points, (std::vector<double>{0.0, 1.0}));
    EXPECT_EQ(p1.mesh(), 1.0);
    auto p4 = build_partition(0, 1, 4);
    ASSERT_EQ(p4.points.size(), 5u);
    for (int k = 0; k <= 4; ++k) EXPECT_DOUBLE_EQ(p4.points[k], 0.25 * k);
    EXPECT_DOUBLE_EQ(p4.mesh(), 0.25);
}

TEST(Partition, GeometricNormalization) {
    auto p = build_partition(0, 1, 2, PartitionKind::geometric, 2.0);
    ASSERT_EQ(p.points.size(), 3u);
    EXPECT_NEAR(p.points[1], 1.0 / 3.0, 1e-15);
    EXPECT_EQ(p.points[2], 1.0);
    EXPECT_NEAR(p.mesh(), 2.0 / 3.0, 1e-15);
}

TEST(Partition, Errors) {
    EXPECT_THROW(build_partition(1, 1, 2), DomainError);
    EXPECT_THROW(build_partition(0, 1, 0), DomainError);
    EXPECT_THROW(partition_from_points({0.0, 0.5, 0.5, 1.0}), DomainError);
}

TEST(Partition, FloorCeilExamples) {
    auto p = partition_from_points({0.0, 0.5, 1.0});
    EXPECT_EQ(pi_floor(p, 0.7), 0.5);
    EXPECT_EQ(pi_ceil(p, 0.7), 1.0);
    EXPECT_EQ(pi_floor(p, 0.5), 0.5);
    EXPECT_EQ(pi_ceil(p, 0.5), 0.5);
    EXPECT_EQ(pi_floor(p, 1.0), 0.5);
    EXPECT_EQ(pi_ceil(p, 1.0), 1.0);
    EXPECT_THROW(pi_floor(p, 1.2), DomainError);
    EXPECT_THROW(pi_ceil(p, -0.1), DomainError);
}

TEST(Partition, FloorCeilBracket) {
    auto p = build_partition(0, 2, 7, PartitionKind::geometric, 1.3);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0, 2);
    for (int n = 0; n < 1000; ++n) {
        const double t = U(rng);
        const double f = pi_floor(p, t), c = pi_ceil(p, t);
        EXPECT_LE(f, t);
        EXPECT_GE(c, t);
        EXPECT_LT(f, c);  // not a partition point
    }
    for (int k = 1; k < p.intervals(); ++k) {
        const double t = p.points[k];
        EXPECT_EQ(pi_floor(p, t), t);
        EXPECT_EQ(pi_ceil(p, t), t);
    }
}

TEST(Derivatives, ExactCases) {
    std::vector<double> c(7, 3.0), lin(7), sq(7);
    const double dx = 0.1;
    for (int k = 0; k < 7; ++k) {
        const double x = (k - 3) * dx;
        lin[k] = 2.0 + x;
        sq[k] = x * x;
    }
    auto d0 = spatial_derivatives(c, 3, dx);
    EXPECT_EQ(d0.first, 0.0);
    EXPECT_EQ(d0.second, 0.0);
    auto d1 = spatial_derivatives(lin, 2, dx);
    EXPECT_NEAR(d1.first, 1.0, 1e-13);
    EXPECT_NEAR(d1.second, 0.0, 1e-11);
    auto d2 = spatial_derivatives(sq, 3, dx);
    EXPECT_NEAR(d2.first, 0.0, 1e-15);
    EXPECT_NEAR(d2.second, 2.0, 1e-12);
    std::vector<double> two{1.0, 2.0};
    EXPECT_THROW(spatial_derivatives(two, 0, dx), DomainError);
}

TEST(Interpolation, LinearIsExact) {
    SpatialGrid g(-1, 1, 11);
    std::vector<double> f(11);
    for (int k = 0; k < 11; ++k) f[k] = 3 * g.x(k) - 1;
    EXPECT_NEAR(interpolate(f, g, 0.37), 3 * 0.37 - 1, 1e-14);
    EXPECT_NEAR(interpolate(f, g, 1.5), 3 * 1.5 - 1, 1e-13);
    EXPECT_NEAR(interpolate_slope(f, g, -0.91), 3.0, 1e-13);
    EXPECT_EQ(g.nearest(0.26), 6);
    EXPECT_THROW(SpatialGrid(1, -1, 5), DomainError);
}

TEST(ThetaFieldTest, TriangleAccess) {
    ThetaField th(build_partition(0, 1, 4).points, SpatialGrid(-1, 1, 5));
    EXPECT_NO_THROW(th.at(1, 3, 2));
    EXPECT_THROW(th.slice(3, 1), std::out_of_range);
    EXPECT_THROW(th.slice(0, 5), std::out_of_range);
    EXPECT_EQ(th.raw().size(), 15u * 5u);
}

TEST(ThetaFieldTest, DiagonalTraceBookkeeping) {
    auto times = build_partition(0, 1, 4).points;
    ThetaField th(times, SpatialGrid(-1, 1, 5));
    for (int i = 0; i <= 4; ++i)
        for (int j = i; j <= 4; ++j)
            for (int k = 0; k < 5; ++k) th.at(i, j, k) = times[i];
    auto d = diagonal_trace(th);
    for (int j = 0; j <= 4; ++j)
        for (int k = 0; k < 5; ++k) EXPECT_EQ(d.at(j, k), times[j]);
    auto lag = lagged_diagonal(th);
    for (int j = 0; j <= 4; ++j)
        for (int k = 0; k < 5; ++k) EXPECT_EQ(lag.at(j, k), times[j]);  // row j of layer min(j+1,N)
    // constant field
    for (double& v : th.raw()) v = 2.5;
    auto c = diagonal_trace(th);
    for (int j = 0; j <= 4; ++j) EXPECT_EQ(c.at(j, 3), 2.5);
    // pure read
    auto again = diagonal_trace(th);
    for (int j = 0; j <= 4; ++j)
        for (int k = 0; k < 5; ++k) EXPECT_EQ(again.at(j, k), c.at(j, k));
}

TEST(ThetaFieldTest, LaggedDiagonalUsesNextLayer) {
    auto times = build_partition(0, 1, 3).points;
    ThetaField th(times, SpatialGrid(-1, 1, 3));
    for (int i = 0; i <= 3; ++i)
        for (int j = i; j <= 3; ++j)
            for (int k = 0; k < 3; ++k) th.at(i, j, k) = 10 * i + j;
    auto lag = lagged_diagonal(th);
    EXPECT_EQ(lag.at(0, 0), 1.0);
    EXPECT_EQ(lag.at(2, 1), 23.0);
    EXPECT_EQ(lag.at(3, 2), 33.0);
}

TEST(Strategy, LookupAndBounds) {
    FeedbackStrategy psi(build_partition(0, 1, 2).points, SpatialGrid(-1, 1, 3), 1);
    psi.at(0, 2) = vec1(4.0);
    psi.at(1, 0) = vec1(-4.0);
    EXPECT_EQ(psi.control(0.2, 0.9)(0), 4.0);
    EXPECT_EQ(psi.control(0.75, -0.8)(0), -4.0);
    EXPECT_THROW(psi.at(2, 0), std::out_of_range);
}

TEST(FieldIo, FormatRoundTrip) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-1e3, 1e3);
    for (int n = 0; n < 2000; ++n) {
        const double v = U(rng) * std::pow(10.0, n % 17 - 8);
        EXPECT_EQ(std::stod(format_number(v)), v);
    }
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_EQ(format_number(3.0), "3");
}

TEST(FieldIo, BinaryRoundTripIsBitExact) {
    ThetaField th(build_partition(0, 1, 5, PartitionKind::geometric, 1.5).points, SpatialGrid(-2, 3, 7));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N01;
    for (double& v : th.raw()) v = N01(rng);
    std::stringstream ss;
    write_theta_binary(th, ss);
    auto back = read_theta_binary(ss);
    EXPECT_EQ(back.times(), th.times());
    EXPECT_EQ(back.space().x_lo, -2.0);
    EXPECT_EQ(back.space().nodes, 7);
    EXPECT_EQ(back.raw(), th.raw());
    std::stringstream bad("XXXX0000000000000000");
    EXPECT_THROW(read_theta_binary(bad), DomainError);
}

TEST(FieldIo, CsvLayout) {
    ThetaField th(build_partition(0, 1, 1).points, SpatialGrid(0, 1, 3));
    for (double& v : th.raw()) v = 0.25;
    std::ostringstream os;
    write_theta_csv(th, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t_index,s_index,x_index,t,s,x,theta");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 3 * 3);
    std::ostringstream v;
    write_scalar_csv(diagonal_trace(th), "V", v);
    EXPECT_EQ(v.str().substr(0, v.str().find('\n')), "s_index,x_index,s,x,V");
}
