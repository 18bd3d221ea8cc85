#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "stackstab/core/dataset.hpp"
#include "stackstab/core/parallel.hpp"
#include "stackstab/harness/config.hpp"

namespace stackstab::harness {

struct RunOptions {
    Parallelism parallelism;
    std::optional<std::filesystem::path> save_model;  // experiment only
};

/// Result section plus wall-clock timings and a short human-readable summary.
struct CommandOutput {
    nlohmann::json results;
    nlohmann::json timings = nlohmann::json::object();
    std::string summary;
};

/// The configured dataset: synthetic draws use the config seed.
Dataset load_dataset(const ExperimentConfig& config);

CommandOutput run_stability(const ExperimentConfig& config, const RunOptions& options);
CommandOutput run_bounds(const ExperimentConfig& config, const RunOptions& options);
CommandOutput run_equivalence(const ExperimentConfig& config, const RunOptions& options);
CommandOutput run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Evaluates one entry of the "bounds" list. `m` and `M` fill in missing fields.
BoundResult evaluate_bound_request(const BoundRequest& request, const ExperimentConfig& config,
                                   std::optional<std::size_t> m, std::optional<double> M);

nlohmann::json bound_to_json(const BoundResult& bound);

}  // namespace stackstab::harness
