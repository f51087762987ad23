#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace tic {

struct RegressionBasis {
    int degree = 3;
    bool standardize = true;
};

// fitted polynomial detached from the regression data
struct PolyMap {
    double mean = 0.0;
    double scale = 1.0;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(1);

    double operator()(double x) const {
        const double z = (x - mean) / scale;
        double v = 0.0;
        for (Eigen::Index d = coef.size() - 1; d >= 0; --d) v = v * z + coef(d);
        return v;
    }
};

// Least-squares projection onto polynomials of one time layer's states.
// Only the states of that layer enter, so anything built from it is adapted.
// A Gram matrix that is numerically singular (all paths at one point, say)
// drops the degree until it is not.
class LayerProjector {
public:
    LayerProjector(const Eigen::Ref<const Eigen::VectorXd>& x, const RegressionBasis& basis);

    int degree() const { return degree_; }
    bool degraded() const { return degraded_; }
    int terms() const { return degree_ + 1; }

    // targets: P x m, returns q x m coefficients
    Eigen::MatrixXd coefficients(const Eigen::Ref<const Eigen::MatrixXd>& targets) const;
    // writes B * coef into out (P x m)
    void fit(const Eigen::Ref<const Eigen::MatrixXd>& coef, Eigen::Ref<Eigen::MatrixXd> out) const;
    Eigen::MatrixXd project(const Eigen::Ref<const Eigen::MatrixXd>& targets) const;

    PolyMap map(const Eigen::Ref<const Eigen::VectorXd>& coef) const { return {mean_, scale_, coef}; }

private:
    void build(const Eigen::Ref<const Eigen::VectorXd>& x, int degree);

    int degree_ = 0;
    bool degraded_ = false;
    double mean_ = 0.0;
    double scale_ = 1.0;
    Eigen::MatrixXd B_;
    Eigen::LDLT<Eigen::MatrixXd> gram_;
};

}  // namespace tic
