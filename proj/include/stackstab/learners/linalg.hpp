#pragma once

#include <Eigen/Dense>

#include "stackstab/core/dataset.hpp"

namespace stackstab::linalg {

/// Row-major design matrix (m x d) of the dataset's features.
Eigen::MatrixXd design_matrix(const Dataset& data);
Eigen::VectorXd targets(const Dataset& data);

/// Solves (X^T W X + reg * I) w = X^T W y, where W = diag(weights) (identity
/// when `weights` is empty). Throws SingularSystemError when the regularized
/// Gram matrix is numerically singular.
Eigen::VectorXd solve_regularized_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double reg,
                                                const Eigen::VectorXd& weights = {});

}  // namespace stackstab::linalg
