#include "stackstab/ensembles/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stackstab/core/errors.hpp"
#include "stackstab/core/loss.hpp"
#include "stackstab/core/overloaded.hpp"
#include "stackstab/learners/linalg.hpp"

namespace stackstab {

std::string aggregation_name(const Aggregation& aggregation) {
    return std::visit(overloaded{
                          [](const MeanAggregation&) { return std::string("mean"); },
                          [](const PluralityAggregation&) { return std::string("plurality"); },
                          [](const WeightedAggregation&) { return std::string("weighted"); },
                          [](const AdaBoostAggregation&) { return std::string("adaboost"); },
                          [](const CombinerAggregation&) { return std::string("combiner"); },
                      },
                      aggregation);
}

EnsembleModel::EnsembleModel(Task task, std::vector<TrainedModel> members, std::vector<ResampleIndices> member_indices,
                             Aggregation aggregation, std::vector<double> labels)
    : task_(task),
      members_(std::move(members)),
      member_indices_(std::move(member_indices)),
      aggregation_(std::move(aggregation)),
      labels_(std::move(labels)) {
    if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
    if (!member_indices_.empty() && member_indices_.size() != members_.size()) {
        throw std::invalid_argument("member_indices must be empty or match the member count");
    }
    const std::size_t T = members_.size();
    for (const auto& member : members_) {
        if (member.dim() != members_.front().dim()) throw std::invalid_argument("ensemble members differ in dimension");
    }
    std::visit(overloaded{
                   [&](const WeightedAggregation& a) {
                       if (a.theta.size() != T) throw std::invalid_argument("theta length must equal T");
                   },
                   [&](const AdaBoostAggregation& a) {
                       if (a.alpha.size() != T) throw std::invalid_argument("alpha length must equal T");
                   },
                   [&](const CombinerAggregation& a) {
                       if (a.combiner.dim() != T) throw std::invalid_argument("combiner input dimension must equal T");
                   },
                   [&](const PluralityAggregation&) {
                       if (task_ == Task::regression) {
                           throw std::invalid_argument("plurality aggregation needs a classification task");
                       }
                   },
                   [](const MeanAggregation&) {},
               },
               aggregation_);
    if (labels_.empty()) {
        if (task_ == Task::binary) labels_ = {-1.0, 1.0};
        if (task_ == Task::multiclass) {
            std::size_t k = 0;
            for (const auto& member : members_) {
                if (const auto* knn = std::get_if<KnnFit>(&member.params())) k = std::max(k, knn->num_classes);
            }
            for (std::size_t c = 0; c < k; ++c) labels_.push_back(static_cast<double>(c));
        }
    }
}

std::vector<double> EnsembleModel::member_outputs(std::span<const double> x) const {
    std::vector<double> out;
    out.reserve(members_.size());
    for (const auto& member : members_) out.push_back(member.predict(x));
    return out;
}

double EnsembleModel::predict(std::span<const double> x) const {
    const std::vector<double> f = member_outputs(x);
    return std::visit(
        overloaded{
            [&](const MeanAggregation&) {
                double total = 0.0;
                for (double v : f) total += v;
                return total / static_cast<double>(f.size());
            },
            [&](const PluralityAggregation&) {
                // Class positions follow the sorted label set, so the first
                // maximum is the smallest class index.
                std::vector<std::size_t> votes(labels_.size(), 0);
                for (double v : f) {
                    const double decision = task_ == Task::binary ? classify(v) : v;
                    const auto it = std::find(labels_.begin(), labels_.end(), decision);
                    if (it != labels_.end()) ++votes[static_cast<std::size_t>(it - labels_.begin())];
                }
                const auto best = std::max_element(votes.begin(), votes.end());
                return labels_[static_cast<std::size_t>(best - votes.begin())];
            },
            [&](const WeightedAggregation& a) {
                double total = 0.0;
                for (std::size_t t = 0; t < f.size(); ++t) total += a.theta[t] * f[t];
                return total;
            },
            [&](const AdaBoostAggregation& a) {
                double total = 0.0;
                for (std::size_t t = 0; t < f.size(); ++t) total += a.alpha[t] * classify(f[t]);
                return classify(total);
            },
            [&](const CombinerAggregation& a) { return a.combiner.predict(f); },
        },
        aggregation_);
}

// ---------------------------------------------------------------------------

std::vector<TrainedModel> train_members(std::span<const LearnerSpec> specs, const Dataset& data,
                                        std::span<const ResampleIndices> replicates, Parallelism parallelism) {
    if (specs.size() != replicates.size()) throw std::invalid_argument("one replicate per member spec required");
    std::vector<std::optional<TrainedModel>> slots(specs.size());
    parallel_for(specs.size(), parallelism, [&](std::size_t t) {
        try {
            slots[t] = train(specs[t], reindex(data, replicates[t]));
        } catch (const std::exception& e) {
            throw TrainingError("ensemble member", t, e.what());
        }
    });
    std::vector<TrainedModel> members;
    members.reserve(slots.size());
    for (auto& slot : slots) members.push_back(std::move(*slot));
    return members;
}

Aggregation default_aggregation(Task task) {
    if (task == Task::regression) return MeanAggregation{};
    return PluralityAggregation{};
}

EnsembleModel ensemble_from_replicates(const LearnerSpec& spec, const Dataset& data,
                                       std::vector<ResampleIndices> replicates, Parallelism parallelism) {
    if (replicates.empty()) throw std::invalid_argument("ensemble needs T >= 1");
    const std::vector<LearnerSpec> specs(replicates.size(), spec);
    auto members = train_members(specs, data, replicates, parallelism);
    return EnsembleModel(data.task(), std::move(members), std::move(replicates), default_aggregation(data.task()),
                         std::vector<double>(data.labels().begin(), data.labels().end()));
}

EnsembleModel bagging_train(const LearnerSpec& spec, const Dataset& data, std::size_t T, Seed seed,
                            Parallelism parallelism) {
    if (T < 1) throw std::invalid_argument("bagging: T must be >= 1");
    std::vector<ResampleIndices> replicates;
    replicates.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        RandomStream stream = substream(seed, "member", t);
        replicates.push_back(bootstrap_indices(data.size(), stream));
    }
    return ensemble_from_replicates(spec, data, std::move(replicates), parallelism);
}

EnsembleModel subbagging_train(const LearnerSpec& spec, const Dataset& data, std::size_t T, std::size_t p, Seed seed,
                               Parallelism parallelism) {
    if (T < 1) throw std::invalid_argument("subbagging: T must be >= 1");
    if (p < 1 || p > data.size()) {
        throw std::invalid_argument("subbagging: p=" + std::to_string(p) + " must lie in [1, m=" +
                                    std::to_string(data.size()) + "]");
    }
    std::vector<ResampleIndices> replicates;
    replicates.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        RandomStream stream = substream(seed, "member", t);
        replicates.push_back(subsample_indices(data.size(), p, stream));
    }
    return ensemble_from_replicates(spec, data, std::move(replicates), parallelism);
}

// ---------------------------------------------------------------------------
// AdaBoost.M1

double adaboost_alpha(double weighted_error) {
    if (!(weighted_error >= 0.0 && weighted_error <= 1.0)) {
        throw std::invalid_argument("weighted error must lie in [0, 1]");
    }
    return std::log((1.0 - weighted_error) / weighted_error);
}

EnsembleModel adaboost_train(const LearnerSpec& weak_spec, const Dataset& data, std::size_t T, AdaBoostTrace* trace) {
    if (T < 1) throw std::invalid_argument("adaboost: T must be >= 1");
    if (data.task() != Task::binary) throw std::invalid_argument("adaboost: requires a binary task");
    if (!weak_spec.accepts_weights()) {
        throw std::invalid_argument("adaboost: weak learner " + weak_spec.describe() + " does not accept weights");
    }
    const std::size_t m = data.size();
    std::vector<double> importance(m, 1.0 / static_cast<double>(m));
    std::vector<TrainedModel> members;
    std::vector<double> alphas;
    AdaBoostTrace local;
    AdaBoostTrace& tr = trace ? *trace : local;
    tr = AdaBoostTrace{};
    tr.stop_reason = "completed T rounds";

    for (std::size_t t = 0; t < T; ++t) {
        TrainedModel member = [&] {
            try {
                return train(weak_spec, data, importance);
            } catch (const std::exception& e) {
                throw TrainingError("adaboost round", t, e.what());
            }
        }();
        std::vector<bool> miss(m);
        double missed = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            miss[i] = classify(member.predict(data[i].x)) != data[i].y;
            if (miss[i]) missed += importance[i];
            total += importance[i];
        }
        const double err = missed / total;
        tr.errors.push_back(err);

        if (err >= 0.5) {
            if (members.empty()) {
                members.push_back(std::move(member));
                alphas.push_back(0.0);
                tr.alphas.push_back(0.0);
            }
            tr.stop_reason = "weighted error >= 0.5 in round " + std::to_string(t);
            break;
        }
        const double alpha = err == 0.0 ? kAdaBoostPerfectAlpha : adaboost_alpha(err);
        members.push_back(std::move(member));
        alphas.push_back(alpha);
        tr.alphas.push_back(alpha);
        if (err == 0.0) {
            tr.stop_reason = "zero weighted error in round " + std::to_string(t);
            break;
        }
        double smallest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            if (miss[i]) importance[i] *= std::exp(alpha);
            smallest = std::min(smallest, importance[i]);
        }
        tr.min_importance.push_back(smallest);
    }
    return EnsembleModel(Task::binary, std::move(members), {}, AdaBoostAggregation{std::move(alphas)});
}

// ---------------------------------------------------------------------------
// Stacking

std::string_view to_string(Sampling sampling) noexcept {
    switch (sampling) {
        case Sampling::none: return "none";
        case Sampling::bootstrap: return "bootstrap";
        case Sampling::subsample: return "subsample";
    }
    return "unknown";
}

Dataset meta_dataset(std::span<const TrainedModel> members, const Dataset& data) {
    std::vector<Example> rows;
    rows.reserve(data.size());
    for (const auto& z : data.examples()) {
        Example row;
        row.x.reserve(members.size());
        for (const auto& member : members) row.x.push_back(member.predict(z.x));
        row.y = z.y;
        rows.push_back(std::move(row));
    }
    return Dataset(data.task(), std::move(rows), std::vector<double>(data.labels().begin(), data.labels().end()));
}

namespace {

void check_recipe(const StackingRecipe& recipe, const Dataset& data) {
    if (recipe.base_specs.empty()) throw std::invalid_argument("stacking: at least one base learner required");
    for (const auto& spec : recipe.base_specs) {
        if (!spec.supports(data.task())) {
            throw std::invalid_argument("stacking: base " + spec.describe() + " does not support the task");
        }
    }
    if (!recipe.combiner_spec.supports(data.task())) {
        throw std::invalid_argument("stacking: combiner " + recipe.combiner_spec.describe() +
                                    " does not support the task");
    }
    if (recipe.out_of_fold == 1 || recipe.out_of_fold > data.size()) {
        throw std::invalid_argument("stacking: out-of-fold needs 2 <= K <= m folds");
    }
}

// Meta dataset from out-of-fold predictions over K contiguous folds.
Dataset out_of_fold_meta(const StackingRecipe& recipe, const Dataset& data, Parallelism parallelism) {
    const std::size_t m = data.size();
    const std::size_t K = recipe.out_of_fold;
    const std::size_t T = recipe.base_specs.size();
    std::vector<std::vector<double>> features(m, std::vector<double>(T));
    parallel_for(K * T, parallelism, [&](std::size_t job) {
        const std::size_t k = job / T;
        const std::size_t t = job % T;
        const std::size_t begin = k * m / K;
        const std::size_t end = (k + 1) * m / K;
        std::vector<Example> train_rows;
        for (std::size_t i = 0; i < m; ++i) {
            if (i < begin || i >= end) train_rows.push_back(data[i]);
        }
        const TrainedModel model = train(recipe.base_specs[t], data.with_examples(std::move(train_rows)));
        for (std::size_t i = begin; i < end; ++i) features[i][t] = model.predict(data[i].x);
    });
    std::vector<Example> rows(m);
    for (std::size_t i = 0; i < m; ++i) rows[i] = Example{std::move(features[i]), data[i].y};
    return Dataset(data.task(), std::move(rows), std::vector<double>(data.labels().begin(), data.labels().end()));
}

EnsembleModel finish_stacking(const StackingRecipe& recipe, const Dataset& data, std::vector<TrainedModel> members,
                              std::vector<ResampleIndices> replicates, Parallelism parallelism) {
    const Dataset meta = recipe.out_of_fold >= 2 ? out_of_fold_meta(recipe, data, parallelism)
                                                 : meta_dataset(members, data);
    TrainedModel combiner = [&] {
        try {
            return train(recipe.combiner_spec.with_intercept(recipe.combiner_intercept), meta);
        } catch (const SingularSystemError&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("combiner training failed: ") + e.what());
        }
    }();
    return EnsembleModel(data.task(), std::move(members), std::move(replicates), CombinerAggregation{std::move(combiner)},
                         std::vector<double>(data.labels().begin(), data.labels().end()));
}

}  // namespace

EnsembleModel stacking_train(const StackingRecipe& recipe, const Dataset& data, Seed /*seed*/,
                             Parallelism parallelism) {
    if (recipe.sampling != Sampling::none) throw std::invalid_argument("stacking_train expects sampling=none");
    check_recipe(recipe, data);
    std::vector<ResampleIndices> replicates(recipe.base_specs.size());
    for (auto& r : replicates) {
        r.indices.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) r.indices[i] = i;
        r.with_replacement = false;
    }
    auto members = train_members(recipe.base_specs, data, replicates, parallelism);
    return finish_stacking(recipe, data, std::move(members), std::move(replicates), parallelism);
}

EnsembleModel stacked_sampling_train(const StackingRecipe& recipe, const Dataset& data, Seed seed,
                                     Parallelism parallelism) {
    if (recipe.sampling == Sampling::none) {
        throw std::invalid_argument("stacked_sampling_train expects sampling=bootstrap or subsample");
    }
    check_recipe(recipe, data);
    if (recipe.sampling == Sampling::subsample &&
        (recipe.subsample_size < 1 || recipe.subsample_size > data.size())) {
        throw std::invalid_argument("dag-stacking: p=" + std::to_string(recipe.subsample_size) +
                                    " must lie in [1, m=" + std::to_string(data.size()) + "]");
    }
    const std::size_t T = recipe.base_specs.size();
    std::vector<ResampleIndices> replicates;
    replicates.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        RandomStream stream = substream(seed, "member", t);
        replicates.push_back(recipe.sampling == Sampling::bootstrap
                                 ? bootstrap_indices(data.size(), stream)
                                 : subsample_indices(data.size(), recipe.subsample_size, stream));
    }
    auto members = train_members(recipe.base_specs, data, replicates, parallelism);
    return finish_stacking(recipe, data, std::move(members), std::move(replicates), parallelism);
}

EnsembleModel stack_train(const StackingRecipe& recipe, const Dataset& data, Seed seed, Parallelism parallelism) {
    return recipe.sampling == Sampling::none ? stacking_train(recipe, data, seed, parallelism)
                                             : stacked_sampling_train(recipe, data, seed, parallelism);
}

// ---------------------------------------------------------------------------
// Weighted bagging

EnsembleModel weighted_bagging_fit(std::vector<TrainedModel> members, std::vector<ResampleIndices> member_indices,
                                   const Dataset& data, double lambda_reg, const GradientDescentOptions& options) {
    if (members.empty()) throw std::invalid_argument("weighted bagging: members must be nonempty");
    if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg)) {
        throw std::invalid_argument("weighted bagging: lambda_reg must be >= 0");
    }
    const Dataset meta = meta_dataset(members, data);
    const Eigen::MatrixXd F = linalg::design_matrix(meta);
    const Eigen::VectorXd y = linalg::targets(meta);

    Eigen::VectorXd theta;
    switch (data.task()) {
        case Task::regression:
            try {
                theta = linalg::solve_regularized_least_squares(F, y, lambda_reg);
            } catch (const SingularSystemError&) {
                throw SingularSystemError(
                    "weighted bagging: member predictions are linearly dependent; use lambda_reg > 0");
            }
            break;
        case Task::binary: {
            const double m = static_cast<double>(data.size());
            const Eigen::VectorXd p = Eigen::VectorXd::Constant(F.rows(), 1.0 / m);
            GradientDescentOptions gd = options;
            gd.intercept = false;
            theta = fit_logistic(F, y, p, lambda_reg / m, gd).weights;
            break;
        }
        case Task::multiclass:
            throw std::invalid_argument("weighted bagging supports regression and binary tasks only");
    }
    std::vector<double> weights(theta.data(), theta.data() + theta.size());
    return EnsembleModel(data.task(), std::move(members), std::move(member_indices),
                         WeightedAggregation{std::move(weights)},
                         std::vector<double>(data.labels().begin(), data.labels().end()));
}

}  // namespace stackstab
