#pragma once

#include <Eigen/Core>

namespace tic {

// Small dense types. Capped at 4 so they live on the stack; the solvers call
// user coefficients millions of times and must not allocate.
constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxDim>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

inline Vec vec1(double v) {
    Vec r(1);
    r(0) = v;
    return r;
}

inline RowVec row1(double v) {
    RowVec r(1);
    r(0) = v;
    return r;
}

inline Mat mat1(double v) {
    Mat r(1, 1);
    r(0, 0) = v;
    return r;
}

}  // namespace tic
