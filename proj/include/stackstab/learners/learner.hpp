#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stackstab/core/dataset.hpp"
#include "stackstab/core/loss.hpp"

namespace stackstab {

enum class Algorithm { knn, ridge, logistic, stump, constant, mean };

std::string_view to_string(Algorithm algorithm) noexcept;
Algorithm algorithm_from_string(std::string_view name);

struct KnnParams {
    std::size_t k = 1;
    friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

/// Ridge regression. The penalty is written lambda * m * I so that the
/// hypothesis-stability constant is 1 / (lambda * m).
struct RidgeParams {
    double lambda = 1.0;
    bool intercept = false;
    friend bool operator==(const RidgeParams&, const RidgeParams&) = default;
};

/// L2-regularized binary logistic regression fitted by full-batch gradient
/// descent on the mean cross-entropy + (lambda / 2) ||w||^2. The intercept is
/// not penalized.
struct LogisticParams {
    double lambda = 0.01;
    double step = 0.1;
    std::size_t max_iters = 5000;
    double tol = 1e-8;
    bool intercept = true;
    friend bool operator==(const LogisticParams&, const LogisticParams&) = default;
};

/// Axis-aligned decision stump over midpoint thresholds (plus +-inf).
struct StumpParams {
    friend bool operator==(const StumpParams&, const StumpParams&) = default;
};

/// Predicts a fixed value regardless of the training set.
struct ConstantParams {
    double value = 0.0;
    friend bool operator==(const ConstantParams&, const ConstantParams&) = default;
};

/// Predicts the (weighted) mean training label.
struct MeanParams {
    friend bool operator==(const MeanParams&, const MeanParams&) = default;
};

class LearnerSpec {
public:
    using Params = std::variant<KnnParams, RidgeParams, LogisticParams, StumpParams, ConstantParams, MeanParams>;

    explicit LearnerSpec(Params params);

    static LearnerSpec knn(std::size_t k);
    static LearnerSpec ridge(double lambda, bool intercept = false);
    static LearnerSpec logistic(LogisticParams params = {});
    static LearnerSpec stump();
    static LearnerSpec constant(double value);
    static LearnerSpec mean();

    Algorithm algorithm() const noexcept;
    const Params& params() const noexcept { return params_; }

    bool supports(Task task) const noexcept;
    bool accepts_weights() const noexcept;
    /// Only ridge and logistic have an intercept; others report false.
    bool has_intercept() const noexcept;
    /// Ridge/logistic with the intercept flag replaced; other learners unchanged.
    LearnerSpec with_intercept(bool intercept) const;
    /// Linear in its inputs (ridge, logistic): used by the weighted-bagging equivalence.
    bool is_linear() const noexcept;

    std::string describe() const;

    friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;

private:
    Params params_;
};

struct KnnFit {
    std::size_t k = 1;
    std::vector<Example> points;
    std::size_t num_classes = 0;
};

struct LinearFit {
    std::vector<double> weights;
    double bias = 0.0;
};

struct StumpFit {
    std::size_t feature = 0;
    double threshold = 0.0;
    double polarity = 1.0;
    double weighted_error = 0.0;
};

struct ConstantFit {
    double value = 0.0;
};

/// Optimizer outcome. Non-convergence is flagged, not fatal.
struct FitStatus {
    bool converged = true;
    std::size_t iterations = 0;
};

/// A fitted predictor f_D. Immutable; predict is a pure function.
class TrainedModel {
public:
    using Params = std::variant<KnnFit, LinearFit, StumpFit, ConstantFit>;

    TrainedModel(Algorithm algorithm, Params params, Task task, std::size_t training_size, std::size_t dim,
                 FitStatus status = {});

    /// knn: mean label (regression), mean of +-1 labels (binary score) or
    /// plurality class (multiclass) over the k nearest points; ridge/logistic:
    /// <w, x> + b (log-odds for logistic); stump: +-1; constant/mean: the value.
    double predict(std::span<const double> x) const;

    Algorithm algorithm() const noexcept { return algorithm_; }
    const Params& params() const noexcept { return params_; }
    Task task() const noexcept { return task_; }
    std::size_t training_size() const noexcept { return training_size_; }
    std::size_t dim() const noexcept { return dim_; }
    const FitStatus& status() const noexcept { return status_; }

private:
    Algorithm algorithm_;
    Params params_;
    Task task_;
    std::size_t training_size_;
    std::size_t dim_;
    FitStatus status_;
};

/// Fits `spec` on `data`. `weights`, when non-empty, are nonnegative per-example
/// importances (length m, positive sum); k-NN rejects non-uniform weights.
TrainedModel train(const LearnerSpec& spec, const Dataset& data, std::span<const double> weights = {});

/// Hypothesis-stability constant of a learner: k/m for k-NN (classification
/// loss), 1/(lambda m) for ridge, 0 for the constant predictor, unknown otherwise.
struct StabilityDescriptor {
    std::optional<double> value;
    std::optional<LossKind::Kind> loss;  // nullopt: not tied to one loss
    std::string formula;
    std::string note;
};

StabilityDescriptor theoretical_stability(const LearnerSpec& spec, std::size_t m, const LossKind& kind);

}  // namespace stackstab
