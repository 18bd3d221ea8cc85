#include "stackstab/learners/linalg.hpp"

#include <cmath>
#include <limits>

#include "stackstab/core/errors.hpp"

namespace stackstab::linalg {

Eigen::MatrixXd design_matrix(const Dataset& data) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.dim()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < data.dim(); ++j) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i].x[j];
        }
    }
    return X;
}

Eigen::VectorXd targets(const Dataset& data) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) y(static_cast<Eigen::Index>(i)) = data[i].y;
    return y;
}

Eigen::VectorXd solve_regularized_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double reg,
                                                const Eigen::VectorXd& weights) {
    Eigen::MatrixXd gram;
    Eigen::VectorXd rhs;
    if (weights.size() == 0) {
        gram = X.transpose() * X;
        rhs = X.transpose() * y;
    } else {
        gram = X.transpose() * weights.asDiagonal() * X;
        rhs = X.transpose() * weights.asDiagonal() * y;
    }
    gram.diagonal().array() += reg;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const Eigen::VectorXd pivots = ldlt.vectorD();
    const double largest = pivots.cwiseAbs().maxCoeff();
    const double tolerance =
        static_cast<double>(gram.rows()) * std::numeric_limits<double>::epsilon() * std::max(largest, 1e-300);
    if (ldlt.info() != Eigen::Success || !(largest > 0.0) || pivots.minCoeff() <= tolerance) {
        throw SingularSystemError("normal equations are singular (rank-deficient design); add regularization");
    }
    return ldlt.solve(rhs);
}

}  // namespace stackstab::linalg
