#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace stackstab {

struct GradientDescentOptions {
    double step = 0.1;
    std::size_t max_iters = 5000;
    double tol = 1e-8;
    bool intercept = true;
};

struct LogisticSolution {
    Eigen::VectorXd weights;
    double bias = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    double objective = 0.0;
};

/// Minimizes sum_i p_i log(1 + exp(-y_i (<w, x_i> + b))) + (l2 / 2) ||w||^2 with
/// y in {-1, +1} and p a probability vector. Full-batch gradient descent with a
/// fixed step; a step that would increase the objective is halved and retried,
/// so accepted iterates never increase it. Stops when ||grad|| <= tol, or when
/// the predicted decrease of a step drops below the rounding of the objective.
LogisticSolution fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                              double l2, const GradientDescentOptions& options);

/// The objective minimized by fit_logistic.
double logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& p, double l2,
                          const Eigen::VectorXd& w, double b);

}  // namespace stackstab
