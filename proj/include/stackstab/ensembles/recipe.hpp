#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>

#include "stackstab/core/dataset.hpp"
#include "stackstab/core/parallel.hpp"
#include "stackstab/core/rng.hpp"
#include "stackstab/ensembles/ensemble.hpp"
#include "stackstab/learners/learner.hpp"

namespace stackstab {

struct SingleLearnerRecipe {
    LearnerSpec learner;
};

struct BaggingRecipe {
    LearnerSpec base;
    std::size_t T = 10;
};

struct SubbaggingRecipe {
    LearnerSpec base;
    std::size_t T = 10;
    std::size_t p = 1;
};

struct AdaBoostRecipe {
    LearnerSpec weak;
    std::size_t T = 10;
};

/// Bagging members whose aggregation weights are learned (weighted_bagging_fit).
struct WeightedBaggingRecipe {
    LearnerSpec base;
    std::size_t T = 10;
    double lambda_reg = 0.0;
    GradientDescentOptions gradient_descent{};
};

/// Anything that maps (D, seed) to a predictor: a single learner or a full
/// ensemble pipeline including its internal resampling.
using Recipe = std::variant<SingleLearnerRecipe, BaggingRecipe, SubbaggingRecipe, AdaBoostRecipe, StackingRecipe,
                            WeightedBaggingRecipe>;

std::string recipe_name(const Recipe& recipe);

class FittedModel {
public:
    explicit FittedModel(TrainedModel model) : model_(std::move(model)) {}
    explicit FittedModel(EnsembleModel model) : model_(std::move(model)) {}

    double predict(std::span<const double> x) const;

    bool is_ensemble() const noexcept { return std::holds_alternative<EnsembleModel>(model_); }
    const std::variant<TrainedModel, EnsembleModel>& model() const noexcept { return model_; }

private:
    std::variant<TrainedModel, EnsembleModel> model_;
};

FittedModel train_recipe(const Recipe& recipe, const Dataset& data, Seed seed, Parallelism parallelism = {});

}  // namespace stackstab
