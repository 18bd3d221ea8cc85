#include "stackstab/stability/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stackstab/core/errors.hpp"
#include "stackstab/core/estimators.hpp"

namespace stackstab {

std::string to_string(StabilityMode mode) {
    return mode == StabilityMode::hypothesis ? "hypothesis" : "pointwise";
}

StabilityMode stability_mode_from_string(const std::string& name) {
    if (name == "hypothesis") return StabilityMode::hypothesis;
    if (name == "pointwise") return StabilityMode::pointwise;
    throw std::invalid_argument("unknown stability mode '" + name + "' (expected hypothesis or pointwise)");
}

std::string IndexPolicy::describe() const {
    switch (kind) {
        case Kind::random: return "random-i";
        case Kind::fixed: return "fixed-i(" + std::to_string(index) + ")";
        case Kind::max_scan: return "max-over-scanned-i(" + std::to_string(scanned.size()) + ")";
    }
    return "unknown";
}

RecipeTrainer recipe_trainer(Recipe recipe) {
    return [recipe = std::move(recipe)](const Dataset& data, Seed seed) { return train_recipe(recipe, data, seed); };
}

namespace {

void check_policy(const IndexPolicy& policy, std::size_t m) {
    if (policy.kind == IndexPolicy::Kind::fixed && policy.index >= m)
        throw std::invalid_argument("fixed index " + std::to_string(policy.index) + " out of range for m = " +
                                    std::to_string(m));
    if (policy.kind == IndexPolicy::Kind::max_scan) {
        if (policy.scanned.empty()) throw std::invalid_argument("max-over-scanned-i needs at least one index");
        for (std::size_t i : policy.scanned) {
            if (i >= m)
                throw std::invalid_argument("scanned index " + std::to_string(i) + " out of range for m = " +
                                            std::to_string(m));
        }
    }
}

// Loss differences of one trial, one per perturbed index.
std::vector<double> run_trial(StabilityMode mode, const RecipeTrainer& train, const DataSource& source,
                              std::size_t m, const LossKind& kind, const IndexPolicy& policy, Seed seed,
                              std::size_t t) {
    const Dataset data = source.draw(m, derive(seed, "trial-data", t));
    const Example z = source.draw_example(derive(seed, "trial-point", t));

    std::vector<std::size_t> indices;
    switch (policy.kind) {
        case IndexPolicy::Kind::random:
            indices.push_back(static_cast<std::size_t>(substream(seed, "trial-index", t).uniform_index(m)));
            break;
        case IndexPolicy::Kind::fixed: indices.push_back(policy.index); break;
        case IndexPolicy::Kind::max_scan: indices = policy.scanned; break;
    }

    const FittedModel full = train(data, derive(seed, "trial-train", t));
    const Seed perturbed_root = derive(seed, "trial-train-perturbed", t);

    std::vector<double> diffs;
    diffs.reserve(indices.size());
    for (std::size_t i : indices) {
        const Seed perturbed_seed = derive(perturbed_root, "index", i);
        if (mode == StabilityMode::hypothesis) {
            const FittedModel reduced = train(remove_example(data, i), perturbed_seed);
            diffs.push_back(std::abs(loss(kind, full.predict(z.x), z, data.task()) -
                                     loss(kind, reduced.predict(z.x), z, data.task())));
        } else {
            const Example& zi = data[i];
            const FittedModel replaced = train(replace_example(data, i, z), perturbed_seed);
            diffs.push_back(std::abs(loss(kind, full.predict(zi.x), zi, data.task()) -
                                     loss(kind, replaced.predict(zi.x), zi, data.task())));
        }
    }
    return diffs;
}

}  // namespace

StabilityEstimate estimate_stability(StabilityMode mode, const RecipeTrainer& train, const DataSource& source,
                                     std::size_t m, const LossKind& kind, std::size_t trials,
                                     const IndexPolicy& policy, Seed seed, Parallelism parallelism) {
    if (m < 2) throw std::invalid_argument("stability estimation requires m >= 2");
    if (trials < 1) throw std::invalid_argument("stability estimation requires at least one trial");
    check_policy(policy, m);

    std::vector<std::vector<double>> per_trial(trials);
    parallel_for(trials, parallelism, [&](std::size_t t) {
        try {
            per_trial[t] = run_trial(mode, train, source, m, kind, policy, seed, t);
        } catch (const std::exception& e) {
            throw TrainingError("stability trial", t, e.what());
        }
    });

    StabilityEstimate est;
    est.trials = trials;
    est.mode = mode;
    est.policy = policy;
    est.loss = kind;
    est.m = m;

    const std::size_t width = per_trial.front().size();
    std::vector<RiskEstimate> columns;
    columns.reserve(width);
    std::vector<double> column(trials);
    for (std::size_t j = 0; j < width; ++j) {
        for (std::size_t t = 0; t < trials; ++t) column[t] = per_trial[t][j];
        columns.push_back(summarize(column));
    }

    std::size_t best = 0;
    for (std::size_t j = 1; j < width; ++j) {
        if (columns[j].mean > columns[best].mean) best = j;
    }
    est.mean = columns[best].mean;
    est.std_error = columns[best].std_error;
    if (policy.kind == IndexPolicy::Kind::max_scan) {
        for (const auto& c : columns) est.scanned_means.push_back(c.mean);
        est.argmax_index = policy.scanned[best];
    }
    return est;
}

StabilityEstimate estimate_hypothesis_stability(const RecipeTrainer& train, const DataSource& source, std::size_t m,
                                                const LossKind& kind, std::size_t trials, const IndexPolicy& policy,
                                                Seed seed, Parallelism parallelism) {
    return estimate_stability(StabilityMode::hypothesis, train, source, m, kind, trials, policy, seed, parallelism);
}

StabilityEstimate estimate_pointwise_hypothesis_stability(const RecipeTrainer& train, const DataSource& source,
                                                          std::size_t m, const LossKind& kind, std::size_t trials,
                                                          const IndexPolicy& policy, Seed seed,
                                                          Parallelism parallelism) {
    return estimate_stability(StabilityMode::pointwise, train, source, m, kind, trials, policy, seed, parallelism);
}

std::string to_string(ComparisonRecord::Status status) {
    switch (status) {
        case ComparisonRecord::Status::satisfied: return "satisfied";
        case ComparisonRecord::Status::violated: return "violated";
        case ComparisonRecord::Status::not_applicable: return "not-applicable";
    }
    return "unknown";
}

ComparisonRecord compare_to_bound(const StabilityEstimate& estimate, std::optional<double> bound,
                                  std::optional<LossKind::Kind> bound_loss, std::string formula) {
    if (bound_loss && *bound_loss != estimate.loss.kind) {
        throw std::invalid_argument("loss kind mismatch: estimate uses " + std::string(to_string(estimate.loss.kind)) +
                                    ", bound is stated for " + std::string(to_string(*bound_loss)));
    }
    ComparisonRecord r;
    r.estimate = estimate.mean;
    r.std_error = estimate.std_error;
    r.bound_formula = std::move(formula);
    if (!bound) {
        r.status = ComparisonRecord::Status::not_applicable;
        r.note = "no theoretical value known";
        return r;
    }
    r.bound = bound;
    r.slack = *bound - estimate.mean;
    r.status = estimate.mean <= *bound + 3.0 * estimate.std_error ? ComparisonRecord::Status::satisfied
                                                                   : ComparisonRecord::Status::violated;
    return r;
}

ComparisonRecord compare_to_bound(const StabilityEstimate& estimate, const BoundResult& bound) {
    return compare_to_bound(estimate, bound.value, bound.loss, bound.formula);
}

ComparisonRecord compare_to_bound(const StabilityEstimate& estimate, const StabilityDescriptor& descriptor) {
    ComparisonRecord r = compare_to_bound(estimate, descriptor.value, descriptor.loss, descriptor.formula);
    if (!descriptor.note.empty()) r.note = descriptor.note;
    return r;
}

}  // namespace stackstab
