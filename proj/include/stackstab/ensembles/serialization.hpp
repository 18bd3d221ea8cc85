#pragma once

#include <json.hpp>

#include "stackstab/ensembles/ensemble.hpp"
#include "stackstab/ensembles/recipe.hpp"
#include "stackstab/learners/learner.hpp"

namespace stackstab {

/// Versioned identifier of the model JSON layout (see docs/model-format.md).
inline constexpr const char* kModelFormat = "stackstab.model/v1";

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

nlohmann::json ensemble_to_json(const EnsembleModel& model);
EnsembleModel ensemble_from_json(const nlohmann::json& j);

/// Top-level document: {"format", "type": "learner" | "ensemble", "model"}.
nlohmann::json fitted_to_json(const FittedModel& model);
FittedModel fitted_from_json(const nlohmann::json& j);

}  // namespace stackstab
