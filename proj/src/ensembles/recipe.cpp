#include "stackstab/ensembles/recipe.hpp"

#include "stackstab/core/overloaded.hpp"

namespace stackstab {

std::string recipe_name(const Recipe& recipe) {
    return std::visit(overloaded{
                          [](const SingleLearnerRecipe& r) { return r.learner.describe(); },
                          [](const BaggingRecipe& r) {
                              return "bagging(" + r.base.describe() + ", T=" + std::to_string(r.T) + ")";
                          },
                          [](const SubbaggingRecipe& r) {
                              return "subbagging(" + r.base.describe() + ", T=" + std::to_string(r.T) +
                                     ", p=" + std::to_string(r.p) + ")";
                          },
                          [](const AdaBoostRecipe& r) {
                              return "adaboost(" + r.weak.describe() + ", T=" + std::to_string(r.T) + ")";
                          },
                          [](const StackingRecipe& r) {
                              std::string name = r.sampling == Sampling::none        ? "stacking("
                                                 : r.sampling == Sampling::bootstrap ? "bag-stacking("
                                                                                     : "dag-stacking(";
                              for (const auto& b : r.base_specs) name += b.describe() + ", ";
                              return name + "combiner=" + r.combiner_spec.describe() + ")";
                          },
                          [](const WeightedBaggingRecipe& r) {
                              return "weighted-bagging(" + r.base.describe() + ", T=" + std::to_string(r.T) + ")";
                          },
                      },
                      recipe);
}

double FittedModel::predict(std::span<const double> x) const {
    return std::visit([&](const auto& m) { return m.predict(x); }, model_);
}

FittedModel train_recipe(const Recipe& recipe, const Dataset& data, Seed seed, Parallelism parallelism) {
    return std::visit(
        overloaded{
            [&](const SingleLearnerRecipe& r) { return FittedModel(train(r.learner, data)); },
            [&](const BaggingRecipe& r) { return FittedModel(bagging_train(r.base, data, r.T, seed, parallelism)); },
            [&](const SubbaggingRecipe& r) {
                return FittedModel(subbagging_train(r.base, data, r.T, r.p, seed, parallelism));
            },
            [&](const AdaBoostRecipe& r) { return FittedModel(adaboost_train(r.weak, data, r.T)); },
            [&](const StackingRecipe& r) { return FittedModel(stack_train(r, data, seed, parallelism)); },
            [&](const WeightedBaggingRecipe& r) {
                EnsembleModel bag = bagging_train(r.base, data, r.T, seed, parallelism);
                return FittedModel(weighted_bagging_fit(bag.members(), bag.member_indices(), data, r.lambda_reg,
                                                        r.gradient_descent));
            },
        },
        recipe);
}

}  // namespace stackstab
