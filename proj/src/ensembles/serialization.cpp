#include "stackstab/ensembles/serialization.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "stackstab/core/overloaded.hpp"

namespace stackstab {

using nlohmann::json;

namespace {

// JSON has no infinities; stump sentinels are written as strings.
json encode_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double decode_real(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw std::invalid_argument("bad real value '" + s + "'");
    }
    return j.get<double>();
}

json indices_to_json(const ResampleIndices& r) {
    return json{{"indices", r.indices}, {"with_replacement", r.with_replacement}};
}

ResampleIndices indices_from_json(const json& j) {
    return ResampleIndices{j.at("indices").get<std::vector<std::size_t>>(), j.at("with_replacement").get<bool>()};
}

}  // namespace

json model_to_json(const TrainedModel& model) {
    json params = std::visit(overloaded{
                                 [](const KnnFit& f) {
                                     json xs = json::array();
                                     json ys = json::array();
                                     for (const auto& p : f.points) {
                                         xs.push_back(p.x);
                                         ys.push_back(p.y);
                                     }
                                     return json{{"k", f.k}, {"num_classes", f.num_classes}, {"points_x", xs},
                                                 {"points_y", ys}};
                                 },
                                 [](const LinearFit& f) { return json{{"weights", f.weights}, {"bias", f.bias}}; },
                                 [](const StumpFit& f) {
                                     return json{{"feature", f.feature},
                                                 {"threshold", encode_real(f.threshold)},
                                                 {"polarity", f.polarity},
                                                 {"weighted_error", f.weighted_error}};
                                 },
                                 [](const ConstantFit& f) { return json{{"value", f.value}}; },
                             },
                             model.params());
    return json{{"algorithm", to_string(model.algorithm())},
                {"task", to_string(model.task())},
                {"training_size", model.training_size()},
                {"dim", model.dim()},
                {"status", {{"converged", model.status().converged}, {"iterations", model.status().iterations}}},
                {"params", std::move(params)}};
}

TrainedModel model_from_json(const json& j) {
    const Algorithm algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    const Task task = task_from_string(j.at("task").get<std::string>());
    const json& p = j.at("params");
    TrainedModel::Params params = [&]() -> TrainedModel::Params {
        switch (algorithm) {
            case Algorithm::knn: {
                KnnFit f;
                f.k = p.at("k").get<std::size_t>();
                f.num_classes = p.at("num_classes").get<std::size_t>();
                const auto& xs = p.at("points_x");
                const auto& ys = p.at("points_y");
                if (xs.size() != ys.size()) throw std::invalid_argument("knn: points_x/points_y length mismatch");
                for (std::size_t i = 0; i < xs.size(); ++i) {
                    f.points.push_back(Example{xs[i].get<std::vector<double>>(), ys[i].get<double>()});
                }
                return f;
            }
            case Algorithm::ridge:
            case Algorithm::logistic:
                return LinearFit{p.at("weights").get<std::vector<double>>(), p.at("bias").get<double>()};
            case Algorithm::stump:
                return StumpFit{p.at("feature").get<std::size_t>(), decode_real(p.at("threshold")),
                                p.at("polarity").get<double>(), p.at("weighted_error").get<double>()};
            case Algorithm::constant:
            case Algorithm::mean: return ConstantFit{p.at("value").get<double>()};
        }
        throw std::invalid_argument("unhandled algorithm");
    }();
    const json& status = j.at("status");
    return TrainedModel(algorithm, std::move(params), task, j.at("training_size").get<std::size_t>(),
                        j.at("dim").get<std::size_t>(),
                        FitStatus{status.at("converged").get<bool>(), status.at("iterations").get<std::size_t>()});
}

json ensemble_to_json(const EnsembleModel& model) {
    json aggregation = std::visit(overloaded{
                                      [](const MeanAggregation&) { return json{{"type", "mean"}}; },
                                      [](const PluralityAggregation&) { return json{{"type", "plurality"}}; },
                                      [](const WeightedAggregation& a) {
                                          return json{{"type", "weighted"}, {"theta", a.theta}};
                                      },
                                      [](const AdaBoostAggregation& a) {
                                          return json{{"type", "adaboost"}, {"alpha", a.alpha}};
                                      },
                                      [](const CombinerAggregation& a) {
                                          return json{{"type", "combiner"}, {"combiner", model_to_json(a.combiner)}};
                                      },
                                  },
                                  model.aggregation());
    json members = json::array();
    for (const auto& m : model.members()) members.push_back(model_to_json(m));
    json indices = json::array();
    for (const auto& r : model.member_indices()) indices.push_back(indices_to_json(r));
    return json{{"task", to_string(model.task())},
                {"labels", std::vector<double>(model.labels().begin(), model.labels().end())},
                {"aggregation", std::move(aggregation)},
                {"members", std::move(members)},
                {"member_indices", std::move(indices)}};
}

EnsembleModel ensemble_from_json(const json& j) {
    const Task task = task_from_string(j.at("task").get<std::string>());
    std::vector<TrainedModel> members;
    for (const auto& m : j.at("members")) members.push_back(model_from_json(m));
    std::vector<ResampleIndices> indices;
    for (const auto& r : j.at("member_indices")) indices.push_back(indices_from_json(r));
    const json& a = j.at("aggregation");
    const auto type = a.at("type").get<std::string>();
    Aggregation aggregation = [&]() -> Aggregation {
        if (type == "mean") return MeanAggregation{};
        if (type == "plurality") return PluralityAggregation{};
        if (type == "weighted") return WeightedAggregation{a.at("theta").get<std::vector<double>>()};
        if (type == "adaboost") return AdaBoostAggregation{a.at("alpha").get<std::vector<double>>()};
        if (type == "combiner") return CombinerAggregation{model_from_json(a.at("combiner"))};
        throw std::invalid_argument("unknown aggregation type '" + type + "'");
    }();
    return EnsembleModel(task, std::move(members), std::move(indices), std::move(aggregation),
                         j.at("labels").get<std::vector<double>>());
}

json fitted_to_json(const FittedModel& model) {
    if (const auto* e = std::get_if<EnsembleModel>(&model.model())) {
        return json{{"format", kModelFormat}, {"type", "ensemble"}, {"model", ensemble_to_json(*e)}};
    }
    return json{{"format", kModelFormat},
                {"type", "learner"},
                {"model", model_to_json(std::get<TrainedModel>(model.model()))}};
}

FittedModel fitted_from_json(const json& j) {
    if (j.at("format").get<std::string>() != kModelFormat) {
        throw std::invalid_argument("unsupported model format '" + j.at("format").get<std::string>() + "'");
    }
    const auto type = j.at("type").get<std::string>();
    if (type == "ensemble") return FittedModel(ensemble_from_json(j.at("model")));
    if (type == "learner") return FittedModel(model_from_json(j.at("model")));
    throw std::invalid_argument("unknown model type '" + type + "'");
}

}  // namespace stackstab
