#include "stackstab/learners/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "stackstab/core/overloaded.hpp"
#include "stackstab/learners/linalg.hpp"
#include "stackstab/learners/logistic.hpp"

namespace stackstab {

std::string_view to_string(Algorithm algorithm) noexcept {
    switch (algorithm) {
        case Algorithm::knn: return "knn";
        case Algorithm::ridge: return "ridge";
        case Algorithm::logistic: return "logistic";
        case Algorithm::stump: return "stump";
        case Algorithm::constant: return "constant";
        case Algorithm::mean: return "mean";
    }
    return "unknown";
}

Algorithm algorithm_from_string(std::string_view name) {
    for (Algorithm a : {Algorithm::knn, Algorithm::ridge, Algorithm::logistic, Algorithm::stump, Algorithm::constant,
                        Algorithm::mean}) {
        if (to_string(a) == name) return a;
    }
    throw std::invalid_argument("unknown learner algorithm '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// LearnerSpec

LearnerSpec::LearnerSpec(Params params) : params_(std::move(params)) {
    std::visit(overloaded{
                   [](const KnnParams& p) {
                       if (p.k < 1) throw std::invalid_argument("knn: k must be >= 1");
                   },
                   [](const RidgeParams& p) {
                       if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) {
                           throw std::invalid_argument("ridge: lambda must be > 0");
                       }
                   },
                   [](const LogisticParams& p) {
                       if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) {
                           throw std::invalid_argument("logistic: lambda must be >= 0");
                       }
                       if (!(p.step > 0.0)) throw std::invalid_argument("logistic: step must be > 0");
                       if (p.max_iters < 1) throw std::invalid_argument("logistic: max_iters must be >= 1");
                       if (!(p.tol > 0.0)) throw std::invalid_argument("logistic: tol must be > 0");
                   },
                   [](const StumpParams&) {},
                   [](const ConstantParams& p) {
                       if (!std::isfinite(p.value)) throw std::invalid_argument("constant: value must be finite");
                   },
                   [](const MeanParams&) {},
               },
               params_);
}

LearnerSpec LearnerSpec::knn(std::size_t k) { return LearnerSpec(KnnParams{k}); }
LearnerSpec LearnerSpec::ridge(double lambda, bool intercept) { return LearnerSpec(RidgeParams{lambda, intercept}); }
LearnerSpec LearnerSpec::logistic(LogisticParams params) { return LearnerSpec(params); }
LearnerSpec LearnerSpec::stump() { return LearnerSpec(StumpParams{}); }
LearnerSpec LearnerSpec::constant(double value) { return LearnerSpec(ConstantParams{value}); }
LearnerSpec LearnerSpec::mean() { return LearnerSpec(MeanParams{}); }

Algorithm LearnerSpec::algorithm() const noexcept {
    return std::visit(overloaded{
                          [](const KnnParams&) { return Algorithm::knn; },
                          [](const RidgeParams&) { return Algorithm::ridge; },
                          [](const LogisticParams&) { return Algorithm::logistic; },
                          [](const StumpParams&) { return Algorithm::stump; },
                          [](const ConstantParams&) { return Algorithm::constant; },
                          [](const MeanParams&) { return Algorithm::mean; },
                      },
                      params_);
}

bool LearnerSpec::supports(Task task) const noexcept {
    switch (algorithm()) {
        case Algorithm::logistic:
        case Algorithm::stump: return task == Task::binary;
        case Algorithm::ridge:
        case Algorithm::mean: return task != Task::multiclass;
        case Algorithm::knn:
        case Algorithm::constant: return true;
    }
    return false;
}

bool LearnerSpec::accepts_weights() const noexcept { return algorithm() != Algorithm::knn; }

bool LearnerSpec::has_intercept() const noexcept {
    if (const auto* r = std::get_if<RidgeParams>(&params_)) return r->intercept;
    if (const auto* l = std::get_if<LogisticParams>(&params_)) return l->intercept;
    return false;
}

LearnerSpec LearnerSpec::with_intercept(bool intercept) const {
    Params copy = params_;
    if (auto* r = std::get_if<RidgeParams>(&copy)) r->intercept = intercept;
    if (auto* l = std::get_if<LogisticParams>(&copy)) l->intercept = intercept;
    return LearnerSpec(copy);
}

bool LearnerSpec::is_linear() const noexcept {
    return algorithm() == Algorithm::ridge || algorithm() == Algorithm::logistic;
}

std::string LearnerSpec::describe() const {
    std::ostringstream out;
    std::visit(overloaded{
                   [&](const KnnParams& p) { out << "knn(k=" << p.k << ")"; },
                   [&](const RidgeParams& p) {
                       out << "ridge(lambda=" << p.lambda << (p.intercept ? ", intercept" : "") << ")";
                   },
                   [&](const LogisticParams& p) {
                       out << "logistic(lambda=" << p.lambda << ", step=" << p.step << ", max_iters=" << p.max_iters
                           << ", tol=" << p.tol << (p.intercept ? ", intercept" : "") << ")";
                   },
                   [&](const StumpParams&) { out << "stump"; },
                   [&](const ConstantParams& p) { out << "constant(" << p.value << ")"; },
                   [&](const MeanParams&) { out << "mean"; },
               },
               params_);
    return out.str();
}

// ---------------------------------------------------------------------------
// TrainedModel

TrainedModel::TrainedModel(Algorithm algorithm, Params params, Task task, std::size_t training_size, std::size_t dim,
                           FitStatus status)
    : algorithm_(algorithm),
      params_(std::move(params)),
      task_(task),
      training_size_(training_size),
      dim_(dim),
      status_(status) {}

namespace {

double knn_predict(const KnnFit& fit, Task task, std::span<const double> x) {
    const std::size_t m = fit.points.size();
    std::vector<std::pair<double, std::size_t>> order(m);
    for (std::size_t i = 0; i < m; ++i) {
        double dist = 0.0;
        const auto& p = fit.points[i].x;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = p[j] - x[j];
            dist += diff * diff;
        }
        order[i] = {dist, i};
    }
    // Ties in distance resolve by training index.
    const std::size_t k = std::min(fit.k, m);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end());

    if (task == Task::multiclass) {
        std::vector<std::size_t> votes(fit.num_classes, 0);
        for (std::size_t n = 0; n < k; ++n) ++votes[static_cast<std::size_t>(fit.points[order[n].second].y)];
        const auto best = std::max_element(votes.begin(), votes.end());  // first max = smallest class index
        return static_cast<double>(best - votes.begin());
    }
    double total = 0.0;
    for (std::size_t n = 0; n < k; ++n) total += fit.points[order[n].second].y;
    return total / static_cast<double>(k);
}

}  // namespace

double TrainedModel::predict(std::span<const double> x) const {
    if (x.size() != dim_) {
        throw std::invalid_argument("predict: input has dimension " + std::to_string(x.size()) + ", model expects " +
                                    std::to_string(dim_));
    }
    return std::visit(overloaded{
                          [&](const KnnFit& fit) { return knn_predict(fit, task_, x); },
                          [&](const LinearFit& fit) {
                              double s = fit.bias;
                              for (std::size_t j = 0; j < x.size(); ++j) s += fit.weights[j] * x[j];
                              return s;
                          },
                          [&](const StumpFit& fit) {
                              return x[fit.feature] > fit.threshold ? fit.polarity : -fit.polarity;
                          },
                          [&](const ConstantFit& fit) { return fit.value; },
                      },
                      params_);
}

// ---------------------------------------------------------------------------
// Training

namespace {

// Weights rescaled to sum to m (uniform when none are given).
Eigen::VectorXd normalized_weights(std::span<const double> weights, std::size_t m) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m));
    if (weights.empty()) return w;
    if (weights.size() != m) {
        throw std::invalid_argument("weights have length " + std::to_string(weights.size()) + ", expected " +
                                    std::to_string(m));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
            throw std::invalid_argument("weights must be finite and nonnegative");
        }
        total += weights[i];
    }
    if (!(total > 0.0)) throw std::invalid_argument("weights must have a positive sum");
    for (std::size_t i = 0; i < m; ++i) w(static_cast<Eigen::Index>(i)) = weights[i] * static_cast<double>(m) / total;
    return w;
}

bool is_uniform(std::span<const double> weights) {
    return std::adjacent_find(weights.begin(), weights.end(), std::not_equal_to<>()) == weights.end();
}

TrainedModel train_ridge(const RidgeParams& params, const Dataset& data, const Eigen::VectorXd& w) {
    const double m = static_cast<double>(data.size());
    Eigen::MatrixXd X = linalg::design_matrix(data);
    Eigen::VectorXd y = linalg::targets(data);
    Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(X.cols());
    double y_mean = 0.0;
    if (params.intercept) {
        x_mean = (w.transpose() * X) / w.sum();
        y_mean = w.dot(y) / w.sum();
        X.rowwise() -= x_mean;
        y.array() -= y_mean;
    }
    const bool uniform = (w.array() == 1.0).all();
    const Eigen::VectorXd coef =
        linalg::solve_regularized_least_squares(X, y, params.lambda * m, uniform ? Eigen::VectorXd() : w);
    LinearFit fit;
    fit.weights.assign(coef.data(), coef.data() + coef.size());
    fit.bias = params.intercept ? y_mean - x_mean.dot(coef) : 0.0;
    return TrainedModel(Algorithm::ridge, std::move(fit), data.task(), data.size(), data.dim());
}

TrainedModel train_logistic(const LogisticParams& params, const Dataset& data, const Eigen::VectorXd& w) {
    const Eigen::MatrixXd X = linalg::design_matrix(data);
    const Eigen::VectorXd y = linalg::targets(data);
    const Eigen::VectorXd p = w / w.sum();
    const LogisticSolution sol = fit_logistic(X, y, p, params.lambda,
                                              GradientDescentOptions{params.step, params.max_iters, params.tol,
                                                                     params.intercept});
    LinearFit fit;
    fit.weights.assign(sol.weights.data(), sol.weights.data() + sol.weights.size());
    fit.bias = sol.bias;
    return TrainedModel(Algorithm::logistic, std::move(fit), data.task(), data.size(), data.dim(),
                        FitStatus{sol.converged, sol.iterations});
}

TrainedModel train_stump(const Dataset& data, const Eigen::VectorXd& w) {
    const std::size_t m = data.size();
    const double total = w.sum();
    double positive_total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (data[i].y > 0.0) positive_total += w(static_cast<Eigen::Index>(i));
    }
    // Polarity +1 predicts +1 above the threshold. With threshold -inf it
    // predicts +1 everywhere, so its error is the negative mass.
    StumpFit best;
    best.feature = 0;
    best.threshold = -std::numeric_limits<double>::infinity();
    best.polarity = 1.0;
    best.weighted_error = (total - positive_total) / total;
    if (positive_total / total < best.weighted_error) {
        best.polarity = -1.0;
        best.weighted_error = positive_total / total;
    }

    std::vector<std::size_t> order(m);
    for (std::size_t f = 0; f < data.dim(); ++f) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return data[a].x[f] < data[b].x[f]; });
        // Mass at or below the running threshold, split by label.
        double below_pos = 0.0;
        double below_neg = 0.0;
        auto consider = [&](double threshold) {
            const double err_plus = below_pos + ((total - positive_total) - below_neg);
            const double err_minus = below_neg + (positive_total - below_pos);
            if (err_plus / total < best.weighted_error) best = StumpFit{f, threshold, 1.0, err_plus / total};
            if (err_minus / total < best.weighted_error) best = StumpFit{f, threshold, -1.0, err_minus / total};
        };
        for (std::size_t n = 0; n < m; ++n) {
            const std::size_t i = order[n];
            (data[i].y > 0.0 ? below_pos : below_neg) += w(static_cast<Eigen::Index>(i));
            const bool last = n + 1 == m;
            if (!last && data[order[n + 1]].x[f] == data[i].x[f]) continue;
            if (last) {
                consider(std::numeric_limits<double>::infinity());
            } else {
                consider(0.5 * (data[i].x[f] + data[order[n + 1]].x[f]));
            }
        }
    }
    return TrainedModel(Algorithm::stump, best, data.task(), m, data.dim());
}

}  // namespace

TrainedModel train(const LearnerSpec& spec, const Dataset& data, std::span<const double> weights) {
    if (!spec.supports(data.task())) {
        throw std::invalid_argument(spec.describe() + " does not support " + std::string(to_string(data.task())) +
                                    " tasks");
    }
    const Eigen::VectorXd w = normalized_weights(weights, data.size());
    if (!weights.empty() && !spec.accepts_weights() && !is_uniform(weights)) {
        throw std::invalid_argument(spec.describe() + " does not accept example weights");
    }

    return std::visit(
        overloaded{
            [&](const KnnParams& p) {
                return TrainedModel(Algorithm::knn, KnnFit{p.k, data.examples(), data.num_classes()}, data.task(),
                                    data.size(), data.dim());
            },
            [&](const RidgeParams& p) { return train_ridge(p, data, w); },
            [&](const LogisticParams& p) { return train_logistic(p, data, w); },
            [&](const StumpParams&) { return train_stump(data, w); },
            [&](const ConstantParams& p) {
                return TrainedModel(Algorithm::constant, ConstantFit{p.value}, data.task(), data.size(), data.dim());
            },
            [&](const MeanParams&) {
                const double mean = w.dot(linalg::targets(data)) / w.sum();
                return TrainedModel(Algorithm::mean, ConstantFit{mean}, data.task(), data.size(), data.dim());
            },
        },
        spec.params());
}

StabilityDescriptor theoretical_stability(const LearnerSpec& spec, std::size_t m, const LossKind& kind) {
    if (m < 1) throw std::invalid_argument("theoretical_stability: m must be >= 1");
    const double md = static_cast<double>(m);
    StabilityDescriptor out;
    std::visit(overloaded{
                   [&](const KnnParams& p) {
                       out.value = static_cast<double>(p.k) / md;
                       out.loss = LossKind::Kind::classification01;
                       out.formula = "k/m";
                       out.note = "per-paper constant";
                       if (kind.kind != LossKind::Kind::classification01) {
                           out.note += "; stated for the classification loss";
                       }
                   },
                   [&](const RidgeParams& p) {
                       out.value = 1.0 / (p.lambda * md);
                       out.formula = "1/(lambda*m)";
                       out.note = "per-paper constant";
                   },
                   [&](const ConstantParams&) {
                       out.value = 0.0;
                       out.formula = "0";
                       out.note = "model does not depend on the training set";
                   },
                   [&](const auto&) {
                       out.formula = "unknown";
                       out.note = "no stability constant available for " + spec.describe();
                   },
               },
               spec.params());
    return out;
}

}  // namespace stackstab
