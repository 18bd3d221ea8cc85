#include "stackstab/learners/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stackstab {

namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

}  // namespace

double logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& p, double l2,
                          const Eigen::VectorXd& w, double b) {
    const Eigen::VectorXd scores = (X * w).array() + b;
    double total = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) total += p(i) * softplus(-y(i) * scores(i));
    return total + 0.5 * l2 * w.squaredNorm();
}

LogisticSolution fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                              double l2, const GradientDescentOptions& options) {
    if (X.rows() != y.size() || X.rows() != p.size()) throw std::invalid_argument("fit_logistic: size mismatch");
    if (!(options.step > 0.0)) throw std::invalid_argument("gradient descent step must be > 0");
    if (options.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(options.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (l2 < 0.0) throw std::invalid_argument("l2 penalty must be >= 0");

    LogisticSolution sol;
    sol.weights = Eigen::VectorXd::Zero(X.cols());
    double objective = logistic_objective(X, y, p, l2, sol.weights, sol.bias);

    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        const Eigen::VectorXd scores = (X * sol.weights).array() + sol.bias;
        Eigen::VectorXd residual(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) residual(i) = -p(i) * y(i) * sigmoid(-y(i) * scores(i));
        const Eigen::VectorXd grad_w = X.transpose() * residual + l2 * sol.weights;
        const double grad_b = options.intercept ? residual.sum() : 0.0;

        const double grad_norm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
        sol.iterations = iter;
        if (grad_norm <= options.tol) {
            sol.converged = true;
            break;
        }

        double step = options.step;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            // Predicted decrease below the rounding of the objective: nothing left to gain.
            if (step * grad_norm * grad_norm <= 1e-15 * std::max(1.0, std::abs(objective))) {
                sol.converged = true;
                break;
            }
            const Eigen::VectorXd w_next = sol.weights - step * grad_w;
            const double b_next = sol.bias - step * grad_b;
            const double next = logistic_objective(X, y, p, l2, w_next, b_next);
            if (next <= objective) {
                sol.weights = w_next;
                sol.bias = b_next;
                objective = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        sol.iterations = iter + 1;
    }
    sol.objective = objective;
    return sol;
}

}  // namespace stackstab
