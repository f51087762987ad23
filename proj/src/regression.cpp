#include "tic/regression.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "tic/errors.hpp"

namespace tic {

LayerProjector::LayerProjector(const Eigen::Ref<const Eigen::VectorXd>& x, const RegressionBasis& basis) {
    if (basis.degree < 1) throw DomainError("regression degree must be at least 1");
    if (x.size() < 1) throw DomainError("regression needs at least one path");
    mean_ = 0.0;
    scale_ = 1.0;
    if (basis.standardize) {
        mean_ = x.mean();
        const double var = (x.array() - mean_).square().mean();
        scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    for (int d = basis.degree; d >= 0; --d) {
        build(x, d);
        if (d == 0) break;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B_.transpose() * B_ / double(x.size()),
                                                          Eigen::EigenvaluesOnly);
        const auto ev = es.eigenvalues();
        if (ev.minCoeff() > 1e-10 * ev.maxCoeff()) break;
        degraded_ = true;
    }
    gram_.compute(B_.transpose() * B_);
}

void LayerProjector::build(const Eigen::Ref<const Eigen::VectorXd>& x, int degree) {
    degree_ = degree;
    const Eigen::Index P = x.size();
    B_.resize(P, degree + 1);
    B_.col(0).setOnes();
    if (degree >= 1) B_.col(1) = (x.array() - mean_) / scale_;
    for (int d = 2; d <= degree; ++d) B_.col(d) = B_.col(d - 1).cwiseProduct(B_.col(1));
}

Eigen::MatrixXd LayerProjector::coefficients(const Eigen::Ref<const Eigen::MatrixXd>& targets) const {
    return gram_.solve(B_.transpose() * targets);
}

void LayerProjector::fit(const Eigen::Ref<const Eigen::MatrixXd>& coef, Eigen::Ref<Eigen::MatrixXd> out) const {
    out.noalias() = B_ * coef;
}

Eigen::MatrixXd LayerProjector::project(const Eigen::Ref<const Eigen::MatrixXd>& targets) const {
    return B_ * coefficients(targets);
}

}  // namespace tic
