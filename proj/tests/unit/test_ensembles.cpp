#include <doctest.h>

#include <cmath>
#include <set>

#include "stackstab/core/errors.hpp"
#include "stackstab/core/estimators.hpp"
#include "stackstab/core/synthetic.hpp"
#include "stackstab/ensembles/ensemble.hpp"
#include "stackstab/ensembles/recipe.hpp"
#include "stackstab/ensembles/serialization.hpp"

using namespace stackstab;

namespace {

ResampleIndices identity(std::size_t m) {
    ResampleIndices r;
    for (std::size_t i = 0; i < m; ++i) r.indices.push_back(i);
    return r;
}

TrainedModel constant_model(double v, std::size_t dim, Task task = Task::regression) {
    return TrainedModel(Algorithm::constant, ConstantFit{v}, task, 1, dim);
}

Dataset xor_like() {
    return Dataset(Task::binary, {{{0.0, 0.0}, 1.0}, {{3.0, 3.0}, 1.0}, {{1.0, 2.0}, -1.0}, {{2.0, 1.0}, -1.0}});
}

std::vector<std::vector<double>> probes(std::size_t n, std::size_t d, Seed seed) {
    std::vector<std::vector<double>> out;
    RandomStream s(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(d);
        for (auto& v : x) v = 2.0 * s.normal();
        out.push_back(x);
    }
    return out;
}

}  // namespace

TEST_CASE("bagging with the identity resample equals the base model") {
    const Dataset data = gen_synthetic(LinearSpec{25, 2, 0.3}, Seed{1});
    const EnsembleModel bag = ensemble_from_replicates(LearnerSpec::ridge(0.5), data, {identity(25)});
    const TrainedModel single = train(LearnerSpec::ridge(0.5), data);
    for (const auto& x : probes(20, 2, Seed{2})) CHECK(bag.predict(x) == single.predict(x));
}

TEST_CASE("bagging a constant-label dataset predicts that label") {
    std::vector<Example> ex;
    for (int i = 0; i < 10; ++i) ex.push_back({{static_cast<double>(i)}, -1.0});
    const EnsembleModel bag = bagging_train(LearnerSpec::knn(3), Dataset(Task::binary, ex), 15, Seed{4});
    for (const auto& x : probes(10, 1, Seed{5})) CHECK(bag.predict(x) == -1.0);
}

TEST_CASE("bagged mean predictors average member means") {
    const Dataset data = gen_synthetic(LinearSpec{40, 2, 1.0}, Seed{6});
    const EnsembleModel bag = bagging_train(LearnerSpec::mean(), data, 500, Seed{7});
    double total = 0.0;
    for (const auto& r : bag.member_indices()) {
        double s = 0.0;
        for (std::size_t i : r.indices) s += data[i].y;
        total += s / static_cast<double>(r.indices.size());
    }
    CHECK(bag.predict(std::vector<double>{0.0, 0.0}) == doctest::Approx(total / 500.0).epsilon(1e-12));
}

TEST_CASE("bagging is deterministic and independent of thread count") {
    const Dataset data = gen_synthetic(BlobsSpec{40, 2, 1.0}, Seed{8});
    const EnsembleModel a = bagging_train(LearnerSpec::knn(1), data, 9, Seed{3}, Parallelism{1});
    const EnsembleModel b = bagging_train(LearnerSpec::knn(1), data, 9, Seed{3}, Parallelism{6});
    CHECK(a.member_indices() == b.member_indices());
    for (const auto& x : probes(30, 2, Seed{9})) CHECK(a.predict(x) == b.predict(x));
}

TEST_CASE("mean and plurality are invariant under member permutation") {
    const Dataset data = gen_synthetic(BlobsSpec{30, 2, 1.0}, Seed{8});
    const EnsembleModel bag = bagging_train(LearnerSpec::knn(1), data, 7, Seed{3});
    std::vector<TrainedModel> reversed(bag.members().rbegin(), bag.members().rend());
    const EnsembleModel other(Task::binary, reversed, {}, PluralityAggregation{});
    for (const auto& x : probes(30, 2, Seed{9})) CHECK(bag.predict(x) == other.predict(x));
}

TEST_CASE("subbagging") {
    const Dataset data = gen_synthetic(LinearSpec{20, 3, 0.4}, Seed{10});
    SUBCASE("p = m gives members equal to the full-data ridge model") {
        const EnsembleModel sub = subbagging_train(LearnerSpec::ridge(0.2), data, 5, 20, Seed{11});
        const TrainedModel full_model = train(LearnerSpec::ridge(0.2), data);
        const auto& full = std::get<LinearFit>(full_model.params()).weights;
        for (const auto& member : sub.members()) {
            const auto& w = std::get<LinearFit>(member.params()).weights;
            for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(w[j] - full[j]) < 1e-9);
        }
    }
    SUBCASE("p = 1 reduces 1-NN members to single labels") {
        const Dataset blobs = gen_synthetic(BlobsSpec{20, 2, 1.0}, Seed{12});
        const EnsembleModel sub = subbagging_train(LearnerSpec::knn(1), blobs, 9, 1, Seed{13});
        int votes = 0;
        for (const auto& r : sub.member_indices()) votes += blobs[r.indices[0]].y > 0 ? 1 : -1;
        const double majority = votes > 0 ? 1.0 : -1.0;
        for (const auto& x : probes(10, 2, Seed{14})) CHECK(sub.predict(x) == majority);
    }
    SUBCASE("deterministic per seed, p validated") {
        const auto a = subbagging_train(LearnerSpec::ridge(1.0), data, 4, 7, Seed{15});
        const auto b = subbagging_train(LearnerSpec::ridge(1.0), data, 4, 7, Seed{15});
        CHECK(a.member_indices() == b.member_indices());
        CHECK_THROWS(subbagging_train(LearnerSpec::ridge(1.0), data, 4, 21, Seed{15}));
        CHECK_THROWS(subbagging_train(LearnerSpec::ridge(1.0), data, 4, 0, Seed{15}));
    }
}

TEST_CASE("aggregation rules") {
    const std::vector<double> x{0.0};
    const EnsembleModel vote(Task::binary,
                             {constant_model(1.0, 1, Task::binary), constant_model(0.4, 1, Task::binary),
                              constant_model(-2.0, 1, Task::binary)},
                             {}, PluralityAggregation{});
    CHECK(vote.predict(x) == 1.0);
    const EnsembleModel tie(Task::binary, {constant_model(1.0, 1, Task::binary), constant_model(-1.0, 1, Task::binary)},
                            {}, PluralityAggregation{});
    CHECK(tie.predict(x) == -1.0);

    std::vector<TrainedModel> members{constant_model(1.0, 1), constant_model(2.5, 1), constant_model(-0.5, 1)};
    const EnsembleModel mean(Task::regression, members, {}, MeanAggregation{});
    const EnsembleModel weighted(Task::regression, members, {}, WeightedAggregation{{1.0 / 3, 1.0 / 3, 1.0 / 3}});
    CHECK(weighted.predict(x) == doctest::Approx(mean.predict(x)).epsilon(1e-15));

    const EnsembleModel zero(Task::binary, {constant_model(1.0, 1, Task::binary)}, {}, AdaBoostAggregation{{0.0}});
    CHECK(zero.predict(x) == 0.0);
    CHECK_THROWS(EnsembleModel(Task::regression, members, {}, WeightedAggregation{{1.0}}));
}

TEST_CASE("weighted bagging with uniform theta reproduces bagging on the same members") {
    const Dataset data = gen_synthetic(LinearSpec{30, 2, 0.5}, Seed{16});
    const EnsembleModel bag = bagging_train(LearnerSpec::mean(), data, 4, Seed{17});
    const EnsembleModel uniform(Task::regression, bag.members(), bag.member_indices(),
                                WeightedAggregation{std::vector<double>(4, 0.25)});
    for (const auto& x : probes(10, 2, Seed{18})) CHECK(uniform.predict(x) == bag.predict(x));
}

TEST_CASE("adaboost") {
    CHECK(adaboost_alpha(0.5) == 0.0);
    CHECK(adaboost_alpha(0.2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(std::abs(adaboost_alpha(0.2) - 1.3862943611198906) < 1e-12);

    SUBCASE("XOR-like data needs several stumps") {
        const Dataset data = xor_like();
        const TrainedModel single = train(LearnerSpec::stump(), data);
        CHECK(empirical_error(single, data, LossKind::classification01()) > 0.0);

        AdaBoostTrace trace;
        const EnsembleModel boost = adaboost_train(LearnerSpec::stump(), data, 10, &trace);
        CHECK(empirical_error(boost, data, LossKind::classification01()) == 0.0);
        CHECK(boost.size() <= 10);
        for (double w : trace.min_importance) CHECK(w > 0.0);
        for (double e : trace.errors) {
            CHECK(e >= 0.0);
            CHECK(e <= 1.0);
        }
    }
    SUBCASE("a perfect first stump stops with the large finite weight") {
        const Dataset data(Task::binary, {{{-1.0}, -1.0}, {{1.0}, 1.0}});
        AdaBoostTrace trace;
        const EnsembleModel boost = adaboost_train(LearnerSpec::stump(), data, 5, &trace);
        CHECK(boost.size() == 1);
        CHECK(trace.alphas[0] == kAdaBoostPerfectAlpha);
        CHECK(std::isfinite(kAdaBoostPerfectAlpha));
    }
    SUBCASE("preconditions") {
        CHECK_THROWS(adaboost_train(LearnerSpec::stump(), xor_like(), 0));
        CHECK_THROWS(adaboost_train(LearnerSpec::stump(), gen_synthetic(LinearSpec{10, 1, 0.1}, Seed{1}), 3));
    }
}

TEST_CASE("stacking") {
    SUBCASE("a single perfect base passes through the combiner") {
        const Dataset data = gen_synthetic(LinearSpec{40, 2, 0.0}, Seed{19});
        StackingRecipe recipe;
        recipe.base_specs = {LearnerSpec::ridge(1e-10)};
        recipe.combiner_spec = LearnerSpec::ridge(1e-10);
        recipe.combiner_intercept = true;
        const EnsembleModel model = stacking_train(recipe, data, Seed{0});
        const auto& fit = std::get<LinearFit>(std::get<CombinerAggregation>(model.aggregation()).combiner.params());
        CHECK(std::abs(fit.weights[0] - 1.0) < 1e-4);
        CHECK(std::abs(fit.bias) < 1e-4);
        for (const auto& x : probes(10, 2, Seed{20}))
            CHECK(std::abs(model.predict(x) - model.members()[0].predict(x)) < 1e-4 * (1.0 + std::abs(model.predict(x))));
    }
    SUBCASE("identical bases stay solvable and permutation invariant") {
        const Dataset data = gen_synthetic(LinearSpec{30, 2, 0.5}, Seed{21});
        StackingRecipe recipe;
        recipe.base_specs = {LearnerSpec::ridge(0.1), LearnerSpec::ridge(0.1), LearnerSpec::ridge(0.1)};
        const EnsembleModel a = stacking_train(recipe, data, Seed{0});
        std::swap(recipe.base_specs[0], recipe.base_specs[2]);
        const EnsembleModel b = stacking_train(recipe, data, Seed{0});
        for (const auto& x : probes(10, 2, Seed{22})) CHECK(a.predict(x) == doctest::Approx(b.predict(x)).epsilon(1e-9));
    }
    SUBCASE("meta dataset has T columns and the original labels") {
        const Dataset data = gen_synthetic(BlobsSpec{30, 2, 2.0}, Seed{23});
        std::vector<TrainedModel> members{train(LearnerSpec::knn(1), data), train(LearnerSpec::knn(3), data),
                                          train(LearnerSpec::knn(5), data)};
        const Dataset meta = meta_dataset(members, data);
        CHECK(meta.size() == 30);
        CHECK(meta.dim() == 3);
        for (std::size_t i = 0; i < 30; ++i) CHECK(meta[i].y == data[i].y);
    }
    SUBCASE("dag-stacking with p = m equals classical stacking for ridge bases") {
        const Dataset data = gen_synthetic(LinearSpec{25, 2, 0.5}, Seed{24});
        StackingRecipe recipe;
        recipe.base_specs = {LearnerSpec::ridge(0.1), LearnerSpec::ridge(1.0)};
        recipe.combiner_spec = LearnerSpec::ridge(0.01);
        const EnsembleModel classical = stacking_train(recipe, data, Seed{0});
        recipe.sampling = Sampling::subsample;
        recipe.subsample_size = 25;
        const EnsembleModel dag = stacked_sampling_train(recipe, data, Seed{25});
        for (const auto& x : probes(10, 2, Seed{26})) CHECK(std::abs(classical.predict(x) - dag.predict(x)) < 1e-9);
    }
    SUBCASE("bag-stacking is deterministic per seed") {
        const Dataset data = gen_synthetic(LinearSpec{25, 2, 0.5}, Seed{24});
        StackingRecipe recipe;
        recipe.base_specs = {LearnerSpec::ridge(0.1), LearnerSpec::knn(2)};
        recipe.sampling = Sampling::bootstrap;
        const auto a = stacked_sampling_train(recipe, data, Seed{3});
        const auto b = stacked_sampling_train(recipe, data, Seed{3}, Parallelism{4});
        CHECK(a.member_indices() == b.member_indices());
        for (const auto& x : probes(10, 2, Seed{26})) CHECK(a.predict(x) == b.predict(x));
    }
    SUBCASE("out-of-fold meta features") {
        const Dataset data = gen_synthetic(BlobsSpec{30, 2, 2.0}, Seed{23});
        StackingRecipe recipe;
        recipe.base_specs = {LearnerSpec::knn(1), LearnerSpec::knn(3)};
        recipe.out_of_fold = 5;
        CHECK_NOTHROW(stacking_train(recipe, data, Seed{0}));
        recipe.out_of_fold = 1;
        CHECK_THROWS(stacking_train(recipe, data, Seed{0}));
    }
}

TEST_CASE("weighted bagging fit") {
    SUBCASE("hand-solved 2x2 system") {
        const Dataset data(Task::regression, {{{0.0}, 2.0}, {{1.0}, 3.0}});
        // Member 1 outputs 1 at x=0 and 0 at x=1; member 2 the reverse.
        const TrainedModel f1(Algorithm::ridge, LinearFit{{-1.0}, 1.0}, Task::regression, 2, 1);
        const TrainedModel f2(Algorithm::ridge, LinearFit{{1.0}, 0.0}, Task::regression, 2, 1);
        const EnsembleModel model = weighted_bagging_fit({f1, f2}, {}, data, 0.0);
        const auto& theta = std::get<WeightedAggregation>(model.aggregation()).theta;
        CHECK(theta[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(theta[1] == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("an exact single member gets theta = 1") {
        const Dataset data = gen_synthetic(LinearSpec{30, 2, 0.0}, Seed{27});
        const TrainedModel exact = train(LearnerSpec::ridge(1e-12), data);
        const EnsembleModel model = weighted_bagging_fit({exact}, {}, data, 0.0);
        CHECK(std::abs(std::get<WeightedAggregation>(model.aggregation()).theta[0] - 1.0) < 1e-9);
    }
    SUBCASE("duplicate members without regularization are singular") {
        const Dataset data = gen_synthetic(LinearSpec{30, 2, 0.3}, Seed{28});
        const TrainedModel f = train(LearnerSpec::ridge(0.1), data);
        CHECK_THROWS_AS(weighted_bagging_fit({f, f}, {}, data, 0.0), SingularSystemError);
        CHECK_NOTHROW(weighted_bagging_fit({f, f}, {}, data, 1e-3));
    }
}

TEST_CASE("bag-stacking with a linear combiner equals weighted bagging") {
    for (std::size_t T : {3, 5, 9}) {
        const Dataset data = gen_synthetic(LinearSpec{60, 3, 0.5}, Seed{100 + T});
        StackingRecipe recipe;
        recipe.base_specs.assign(T, LearnerSpec::ridge(0.1));
        recipe.combiner_spec = LearnerSpec::ridge(1e-6);
        recipe.sampling = Sampling::bootstrap;
        const EnsembleModel stacked = stacked_sampling_train(recipe, data, Seed{T});
        const EnsembleModel weighted =
            weighted_bagging_fit(stacked.members(), stacked.member_indices(), data, 1e-6 * 60.0);
        const auto& a = std::get<LinearFit>(std::get<CombinerAggregation>(stacked.aggregation()).combiner.params()).weights;
        const auto& b = std::get<WeightedAggregation>(weighted.aggregation()).theta;
        for (std::size_t t = 0; t < T; ++t) CHECK(std::abs(a[t] - b[t]) <= 1e-9);
        for (const auto& x : probes(100, 3, Seed{T})) CHECK(std::abs(stacked.predict(x) - weighted.predict(x)) <= 1e-9);
    }
    SUBCASE("binary task with a logistic combiner") {
        const Dataset data = gen_synthetic(BlobsSpec{60, 2, 1.0}, Seed{31});
        LogisticParams params;
        params.intercept = false;
        StackingRecipe recipe;
        recipe.base_specs.assign(5, LearnerSpec::knn(3));
        recipe.combiner_spec = LearnerSpec::logistic(params);
        recipe.sampling = Sampling::bootstrap;
        const EnsembleModel stacked = stacked_sampling_train(recipe, data, Seed{32});
        GradientDescentOptions gd{params.step, params.max_iters, params.tol, false};
        const EnsembleModel weighted =
            weighted_bagging_fit(stacked.members(), stacked.member_indices(), data, params.lambda * 60.0, gd);
        const auto& a = std::get<LinearFit>(std::get<CombinerAggregation>(stacked.aggregation()).combiner.params()).weights;
        const auto& b = std::get<WeightedAggregation>(weighted.aggregation()).theta;
        for (std::size_t t = 0; t < 5; ++t) CHECK(std::abs(a[t] - b[t]) <= 1e-9);
    }
}

TEST_CASE("recipes train through one entry point") {
    const Dataset data = gen_synthetic(BlobsSpec{30, 2, 2.0}, Seed{33});
    const std::vector<Recipe> recipes{
        SingleLearnerRecipe{LearnerSpec::knn(1)},
        BaggingRecipe{LearnerSpec::knn(1), 5},
        SubbaggingRecipe{LearnerSpec::knn(1), 5, 10},
        AdaBoostRecipe{LearnerSpec::stump(), 5},
        StackingRecipe{{LearnerSpec::knn(1), LearnerSpec::knn(3)}},
        WeightedBaggingRecipe{LearnerSpec::knn(3), 4, 0.1},
    };
    for (const auto& r : recipes) {
        const FittedModel a = train_recipe(r, data, Seed{1});
        const FittedModel b = train_recipe(r, data, Seed{1}, Parallelism{4});
        CHECK(empirical_error(a, data, LossKind::classification01()) ==
              empirical_error(b, data, LossKind::classification01()));
        CHECK_FALSE(recipe_name(r).empty());
    }
}

TEST_CASE("model serialization round-trips predictions exactly") {
    const Dataset blobs = gen_synthetic(BlobsSpec{30, 2, 2.0}, Seed{34});
    const Dataset lin = gen_synthetic(LinearSpec{30, 2, 0.3}, Seed{35});
    std::vector<std::pair<FittedModel, std::size_t>> models{
        {train_recipe(SingleLearnerRecipe{LearnerSpec::knn(3)}, blobs, Seed{1}), 2},
        {train_recipe(SingleLearnerRecipe{LearnerSpec::stump()}, blobs, Seed{1}), 2},
        {train_recipe(SingleLearnerRecipe{LearnerSpec::logistic()}, blobs, Seed{1}), 2},
        {train_recipe(AdaBoostRecipe{LearnerSpec::stump(), 6}, blobs, Seed{1}), 2},
        {train_recipe(BaggingRecipe{LearnerSpec::ridge(0.5), 4}, lin, Seed{1}), 2},
        {train_recipe(StackingRecipe{{LearnerSpec::ridge(0.1), LearnerSpec::knn(2)}}, lin, Seed{1}), 2},
        {train_recipe(WeightedBaggingRecipe{LearnerSpec::ridge(0.5), 3, 0.1}, lin, Seed{1}), 2},
    };
    for (const auto& [model, dim] : models) {
        const nlohmann::json j = fitted_to_json(model);
        const FittedModel back = fitted_from_json(nlohmann::json::parse(j.dump()));
        CHECK(fitted_to_json(back) == j);
        for (const auto& x : probes(20, dim, Seed{36})) CHECK(back.predict(x) == model.predict(x));
    }
    CHECK_THROWS(fitted_from_json(nlohmann::json{{"format", "other"}}));
}
