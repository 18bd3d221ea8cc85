#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stackstab/bounds/bounds.hpp"
#include "stackstab/core/dataset.hpp"
#include "stackstab/core/loss.hpp"
#include "stackstab/core/synthetic.hpp"
#include "stackstab/ensembles/recipe.hpp"
#include "stackstab/stability/empirical.hpp"

namespace stackstab::harness {

/// Invalid configuration or command line (exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvDataset {
    std::filesystem::path path;
    std::string label_column = "label";
    Task task = Task::binary;
};

using DatasetConfig = std::variant<SyntheticSpec, CsvDataset>;

struct LossConfig {
    std::optional<LossKind::Kind> kind;  // default follows the task
    double gamma = 1.0;
    std::optional<double> M;  // squared loss: derived from the data when absent
};

struct StabilityConfig {
    std::vector<StabilityMode> modes{StabilityMode::hypothesis};
    std::size_t trials = 400;
    IndexPolicy policy;
    std::optional<std::size_t> m;  // defaults to the dataset size
};

struct HoldoutConfig {
    std::size_t m = 1000;               // synthetic sources
    std::optional<std::filesystem::path> path;  // CSV datasets
};

struct EquivalenceConfig {
    std::size_t T = 5;
    LearnerSpec base = LearnerSpec::ridge(0.1);
    LearnerSpec combiner = LearnerSpec::ridge(1e-6);
    std::size_t probe_points = 100;
    double self_test_perturbation = 0.0;
    double tolerance = 1e-9;
};

/// One entry of the "bounds" list, kept as validated JSON and evaluated by the
/// bounds command.
struct BoundRequest {
    std::string kind;
    nlohmann::json params;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    DatasetConfig dataset = SyntheticSpec{BlobsSpec{}};
    Recipe recipe = SingleLearnerRecipe{LearnerSpec::knn(1)};
    LossConfig loss;
    StabilityConfig stability;
    std::vector<BoundRequest> bounds;
    HoldoutConfig holdout;
    double delta = 0.05;
    double B = 1.0;
    EquivalenceConfig equivalence;
};

/// Parses and validates a config document. Unknown keys, wrong types and out of
/// range values raise ConfigError naming the offending path.
ExperimentConfig parse_config(const nlohmann::json& document);

/// Config with every default materialized.
nlohmann::json config_to_json(const ExperimentConfig& config);

nlohmann::json load_config_file(const std::filesystem::path& path);

/// Applies "a.b.c=value" to the document. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& document, const std::string& assignment);

LearnerSpec learner_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json learner_to_json(const LearnerSpec& spec);
nlohmann::json recipe_to_json(const Recipe& recipe);

/// Task of the configured dataset without loading it.
Task dataset_task(const DatasetConfig& dataset);

}  // namespace stackstab::harness
