#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stackstab/bounds/bounds.hpp"
#include "stackstab/core/loss.hpp"
#include "stackstab/core/parallel.hpp"
#include "stackstab/core/rng.hpp"
#include "stackstab/core/synthetic.hpp"
#include "stackstab/ensembles/recipe.hpp"
#include "stackstab/learners/learner.hpp"

namespace stackstab {

enum class StabilityMode { hypothesis, pointwise };

std::string to_string(StabilityMode mode);
StabilityMode stability_mode_from_string(const std::string& name);

/// Which training index i is perturbed in each trial.
struct IndexPolicy {
    enum class Kind { random, fixed, max_scan };

    Kind kind = Kind::random;
    std::size_t index = 0;            // fixed
    std::vector<std::size_t> scanned;  // max_scan: every listed i is perturbed in every trial

    static IndexPolicy random() { return {}; }
    static IndexPolicy fixed(std::size_t i) { return {Kind::fixed, i, {}}; }
    static IndexPolicy max_over(std::vector<std::size_t> indices) { return {Kind::max_scan, 0, std::move(indices)}; }

    std::string describe() const;
};

struct StabilityEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t trials = 0;
    StabilityMode mode = StabilityMode::hypothesis;
    IndexPolicy policy;
    LossKind loss;
    std::size_t m = 0;

    // max_scan only: per scanned index mean, and the index attaining the maximum
    // (mean and std_error above refer to that index).
    std::vector<double> scanned_means;
    std::optional<std::size_t> argmax_index;
};

/// Trains a predictor on (D, seed).
using RecipeTrainer = std::function<FittedModel(const Dataset&, Seed)>;

RecipeTrainer recipe_trainer(Recipe recipe);

/// Per trial t: fresh D of size m and a fresh z from `source`, an index i chosen
/// by `policy`, f_D and f_{D\i} trained with independent derived seeds, and the
/// difference |loss(f_D, z) - loss(f_{D\i}, z)|. Mean and standard error are
/// reduced in trial order.
StabilityEstimate estimate_hypothesis_stability(const RecipeTrainer& train, const DataSource& source, std::size_t m,
                                                const LossKind& kind, std::size_t trials, const IndexPolicy& policy,
                                                Seed seed, Parallelism parallelism = {});

/// As above with z replacing z_i and the loss evaluated at the displaced z_i:
/// |loss(f_D, z_i) - loss(f_{D\i u z}, z_i)|.
StabilityEstimate estimate_pointwise_hypothesis_stability(const RecipeTrainer& train, const DataSource& source,
                                                          std::size_t m, const LossKind& kind, std::size_t trials,
                                                          const IndexPolicy& policy, Seed seed,
                                                          Parallelism parallelism = {});

StabilityEstimate estimate_stability(StabilityMode mode, const RecipeTrainer& train, const DataSource& source,
                                     std::size_t m, const LossKind& kind, std::size_t trials,
                                     const IndexPolicy& policy, Seed seed, Parallelism parallelism = {});

struct ComparisonRecord {
    enum class Status { satisfied, violated, not_applicable };

    double estimate = 0.0;
    double std_error = 0.0;
    std::optional<double> bound;
    std::string bound_formula;
    Status status = Status::not_applicable;
    std::optional<double> slack;  // bound - estimate
    std::string note;
};

std::string to_string(ComparisonRecord::Status status);

/// satisfied iff estimate.mean <= bound + 3 stderr. A bound without a value is
/// not applicable. Throws std::invalid_argument when the bound is stated for a
/// different loss.
ComparisonRecord compare_to_bound(const StabilityEstimate& estimate, const BoundResult& bound);
ComparisonRecord compare_to_bound(const StabilityEstimate& estimate, const StabilityDescriptor& descriptor);
ComparisonRecord compare_to_bound(const StabilityEstimate& estimate, std::optional<double> bound,
                                  std::optional<LossKind::Kind> bound_loss, std::string formula);

}  // namespace stackstab
