#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "stackstab/core/dataset.hpp"
#include "stackstab/core/errors.hpp"
#include "stackstab/core/loss.hpp"
#include "stackstab/core/parallel.hpp"
#include "stackstab/core/rng.hpp"

namespace stackstab {

template <class Model>
concept Predictor = requires(const Model& model, std::span<const double> x) {
    { model.predict(x) } -> std::convertible_to<double>;
};

/// Mean of a loss sample with its Monte-Carlo standard error.
struct RiskEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

/// mean and sample-std / sqrt(n), accumulated in index order.
RiskEstimate summarize(std::span<const double> values);

/// R_emp: (1/m) sum_i loss(f_D, z_i).
template <Predictor Model>
double empirical_error(const Model& model, const Dataset& data, const LossKind& kind) {
    double total = 0.0;
    for (const auto& z : data.examples()) total += loss(kind, model.predict(z.x), z, data.task());
    return total / static_cast<double>(data.size());
}

/// Monte-Carlo estimate of R_gen on a holdout set disjoint from the training set.
template <Predictor Model>
RiskEstimate holdout_risk(const Model& model, const Dataset& holdout, const LossKind& kind) {
    std::vector<double> losses;
    losses.reserve(holdout.size());
    for (const auto& z : holdout.examples()) losses.push_back(loss(kind, model.predict(z.x), z, holdout.task()));
    return summarize(losses);
}

/// R_loo: (1/m) sum_i loss(f_{D\i}, z_i). `train(dataset, seed)` must return a
/// Predictor; fold i is trained with seed derive(seed, "loo", i) so that any
/// resampling inside the recipe is reproducible per fold.
template <class Trainer>
double loo_error(Trainer&& train, const Dataset& data, const LossKind& kind, Seed seed,
                 Parallelism parallelism = {}) {
    const std::size_t m = data.size();
    if (m < 2) throw std::invalid_argument("leave-one-out error requires m >= 2");
    std::vector<double> fold_loss(m);
    parallel_for(m, parallelism, [&](std::size_t i) {
        try {
            const auto model = train(remove_example(data, i), derive(seed, "loo", i));
            fold_loss[i] = loss(kind, model.predict(data[i].x), data[i], data.task());
        } catch (const std::exception& e) {
            throw TrainingError("leave-one-out fold", i, e.what());
        }
    });
    double total = 0.0;
    for (double v : fold_loss) total += v;
    return total / static_cast<double>(m);
}

}  // namespace stackstab
