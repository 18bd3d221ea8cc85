#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stackstab/core/dataset.hpp"
#include "stackstab/core/parallel.hpp"
#include "stackstab/core/resample.hpp"
#include "stackstab/core/rng.hpp"
#include "stackstab/learners/learner.hpp"
#include "stackstab/learners/logistic.hpp"

namespace stackstab {

struct MeanAggregation {};

/// Majority vote over member decisions; ties go to the smallest class index.
struct PluralityAggregation {};

/// F(x) = sum_t theta_t f_t(x).
struct WeightedAggregation {
    std::vector<double> theta;
};

/// F(x) = sign(sum_t alpha_t sign(f_t(x))).
struct AdaBoostAggregation {
    std::vector<double> alpha;
};

/// F(x) = g(f_1(x), ..., f_T(x)).
struct CombinerAggregation {
    TrainedModel combiner;
};

using Aggregation =
    std::variant<MeanAggregation, PluralityAggregation, WeightedAggregation, AdaBoostAggregation, CombinerAggregation>;

std::string aggregation_name(const Aggregation& aggregation);

class EnsembleModel {
public:
    /// `member_indices` is either empty or one entry per member.
    EnsembleModel(Task task, std::vector<TrainedModel> members, std::vector<ResampleIndices> member_indices,
                  Aggregation aggregation, std::vector<double> labels = {});

    double predict(std::span<const double> x) const;

    /// (f_1(x), ..., f_T(x)).
    std::vector<double> member_outputs(std::span<const double> x) const;

    std::size_t size() const noexcept { return members_.size(); }
    std::size_t dim() const noexcept { return members_.front().dim(); }
    Task task() const noexcept { return task_; }
    const std::vector<TrainedModel>& members() const noexcept { return members_; }
    const std::vector<ResampleIndices>& member_indices() const noexcept { return member_indices_; }
    const Aggregation& aggregation() const noexcept { return aggregation_; }
    std::span<const double> labels() const noexcept { return labels_; }

private:
    Task task_;
    std::vector<TrainedModel> members_;
    std::vector<ResampleIndices> member_indices_;
    Aggregation aggregation_;
    std::vector<double> labels_;
};

/// Trains spec[t] on reindex(data, replicates[t]) for every t.
std::vector<TrainedModel> train_members(std::span<const LearnerSpec> specs, const Dataset& data,
                                        std::span<const ResampleIndices> replicates, Parallelism parallelism = {});

/// Mean for regression, plurality for classification.
Aggregation default_aggregation(Task task);

/// Members on T independent bootstrap replicates; replicate t is drawn from
/// derive(seed, "member", t).
EnsembleModel bagging_train(const LearnerSpec& spec, const Dataset& data, std::size_t T, Seed seed,
                            Parallelism parallelism = {});

/// As bagging_train with size-p subsamples drawn without replacement. Replicates
/// are independent of one another.
EnsembleModel subbagging_train(const LearnerSpec& spec, const Dataset& data, std::size_t T, std::size_t p, Seed seed,
                               Parallelism parallelism = {});

/// Bagging-style ensemble over caller-chosen replicates.
EnsembleModel ensemble_from_replicates(const LearnerSpec& spec, const Dataset& data,
                                       std::vector<ResampleIndices> replicates, Parallelism parallelism = {});

// ---------------------------------------------------------------------------
// AdaBoost.M1

/// log((1 - err) / err).
double adaboost_alpha(double weighted_error);

/// Weight given to a round with zero weighted error, log(1e12).
inline const double kAdaBoostPerfectAlpha = std::log(1e12);

struct AdaBoostTrace {
    std::vector<double> errors;
    std::vector<double> alphas;
    std::vector<double> min_importance;  // min_i omega_ti after each update
    std::string stop_reason;
};

/// Round t: fit on importances omega_t, err_t = sum omega I(miss) / sum omega,
/// alpha_t = log((1 - err_t) / err_t), omega_i *= exp(alpha_t I(miss_i)).
/// err_t = 0 keeps the member with alpha = log(1e12) and stops; err_t >= 0.5
/// stops before adding the member (a first-round failure keeps it with alpha 0).
EnsembleModel adaboost_train(const LearnerSpec& weak_spec, const Dataset& data, std::size_t T,
                             AdaBoostTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Stacking

enum class Sampling { none, bootstrap, subsample };

std::string_view to_string(Sampling sampling) noexcept;

struct StackingRecipe {
    std::vector<LearnerSpec> base_specs;
    LearnerSpec combiner_spec = LearnerSpec::ridge(1e-6);
    Sampling sampling = Sampling::none;
    std::size_t subsample_size = 0;  // p, subsample only
    bool combiner_intercept = false;
    /// 0: meta-features are resubstitution predictions f_t(x_i) of members
    /// trained on D. K >= 2: K contiguous folds, out-of-fold predictions.
    std::size_t out_of_fold = 0;
};

/// The T-dimensional meta dataset {(f_1(x_i), ..., f_T(x_i)), y_i}.
Dataset meta_dataset(std::span<const TrainedModel> members, const Dataset& data);

/// Classical stacking: every base trained on all of D.
EnsembleModel stacking_train(const StackingRecipe& recipe, const Dataset& data, Seed seed,
                             Parallelism parallelism = {});

/// Bag-stacking (bootstrap) or dag-stacking (subsample): base t on replicate t
/// drawn from derive(seed, "member", t); meta-features over the full D.
EnsembleModel stacked_sampling_train(const StackingRecipe& recipe, const Dataset& data, Seed seed,
                                     Parallelism parallelism = {});

/// Dispatches on recipe.sampling.
EnsembleModel stack_train(const StackingRecipe& recipe, const Dataset& data, Seed seed, Parallelism parallelism = {});

// ---------------------------------------------------------------------------
// Weighted bagging

/// Learns theta for fixed members. Regression: (F^T F + lambda_reg I) theta =
/// F^T y with F_it = f_t(x_i). Binary: minimizes sum_i log(1 + exp(-y_i F_i theta))
/// + (lambda_reg / 2) ||theta||^2 by gradient descent. Throws
/// SingularSystemError for rank-deficient F with lambda_reg = 0.
EnsembleModel weighted_bagging_fit(std::vector<TrainedModel> members, std::vector<ResampleIndices> member_indices,
                                   const Dataset& data, double lambda_reg, const GradientDescentOptions& options = {});

}  // namespace stackstab
