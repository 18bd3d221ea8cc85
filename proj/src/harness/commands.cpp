#include "stackstab/harness/commands.hpp"

#include <chrono>
#include <fstream>
#include <memory>
#include <cmath>
#include <sstream>

#include "stackstab/core/csv.hpp"
#include "stackstab/core/estimators.hpp"
#include "stackstab/core/overloaded.hpp"
#include "stackstab/ensembles/serialization.hpp"

namespace stackstab::harness {

using nlohmann::json;

namespace {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// bound requests

double real_field(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key) || j.at(key).is_null()) throw ConfigError(path + "." + key + " is required");
    const json& v = j.at(key);
    if (!v.is_number()) throw ConfigError(path + "." + key + " must be a number");
    return v.get<double>();
}

double real_field_or(const json& j, const std::string& key, const std::string& path, std::optional<double> fallback) {
    if (j.contains(key) && !j.at(key).is_null()) return real_field(j, key, path);
    if (!fallback) throw ConfigError(path + "." + key + " is required");
    return *fallback;
}

std::size_t count_field_or(const json& j, const std::string& key, const std::string& path,
                           std::optional<std::size_t> fallback) {
    if (j.contains(key) && !j.at(key).is_null()) {
        if (!j.at(key).is_number_unsigned()) throw ConfigError(path + "." + key + " must be a nonnegative integer");
        return j.at(key).get<std::size_t>();
    }
    if (!fallback) throw ConfigError(path + "." + key + " is required");
    return *fallback;
}

std::string string_field_or(const json& j, const std::string& key, const std::string& path,
                            const std::string& fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    if (!j.at(key).is_string()) throw ConfigError(path + "." + key + " must be a string");
    return j.at(key).get<std::string>();
}

double learner_beta(const LearnerSpec& spec, std::size_t m, const std::string& path) {
    const StabilityDescriptor d = theoretical_stability(spec, m, LossKind::classification01());
    if (!d.value) throw ConfigError(path + ": no stability constant known for " + spec.describe());
    return *d.value;
}

double combiner_beta(const json& j, const std::string& path, std::optional<std::size_t> m) {
    if (j.contains("combiner_beta")) return real_field(j, "combiner_beta", path);
    if (!j.contains("combiner")) throw ConfigError(path + " needs combiner_beta or combiner");
    return learner_beta(learner_from_json(j.at("combiner"), path + ".combiner"), count_field_or(j, "m", path, m),
                        path + ".combiner");
}

std::vector<double> base_betas(const json& j, const std::string& path, std::optional<std::size_t> m) {
    std::vector<double> out;
    if (j.contains("base_betas")) {
        const json& list = j.at("base_betas");
        if (!list.is_array()) throw ConfigError(path + ".base_betas must be an array");
        for (const auto& v : list) {
            if (!v.is_number()) throw ConfigError(path + ".base_betas must hold numbers");
            out.push_back(v.get<double>());
        }
        return out;
    }
    if (!j.contains("bases") || !j.at("bases").is_array())
        throw ConfigError(path + " needs base_betas or a bases array");
    const std::size_t mm = count_field_or(j, "m", path, m);
    for (std::size_t i = 0; i < j.at("bases").size(); ++i) {
        const std::string p = path + ".bases[" + std::to_string(i) + "]";
        out.push_back(learner_beta(learner_from_json(j.at("bases")[i], p), mm, p));
    }
    return out;
}

BoundTask bound_task_field(const json& j, const std::string& path, const ExperimentConfig& config) {
    const std::string fallback = dataset_task(config.dataset) == Task::regression ? "regression" : "classification";
    const std::string t = string_field_or(j, "task", path, fallback);
    if (t == "regression") return BoundTask::regression;
    if (t == "classification") return BoundTask::classification;
    throw ConfigError(path + ".task must be regression or classification");
}

GammaSchedule schedule_for(const LearnerSpec& spec, const std::string& path) {
    return std::visit(overloaded{
                          [](const KnnParams& p) { return GammaSchedule::inverse(static_cast<double>(p.k)); },
                          [](const RidgeParams& p) { return GammaSchedule::inverse(1.0 / p.lambda); },
                          [](const ConstantParams&) { return GammaSchedule::constant(0.0); },
                          [&](const auto&) -> GammaSchedule {
                              throw ConfigError(path + ": no stability schedule known for " + spec.describe());
                          },
                      },
                      spec.params());
}

GammaSchedule gamma_field(const json& j, const std::string& path) {
    if (j.contains("base")) return schedule_for(learner_from_json(j.at("base"), path + ".base"), path + ".base");
    if (!j.contains("gamma")) throw ConfigError(path + " needs gamma or base");
    const json& g = j.at("gamma");
    if (g.is_number()) return GammaSchedule::constant(g.get<double>());
    if (!g.is_object()) throw ConfigError(path + ".gamma must be a number or an object");
    const std::string schedule = string_field_or(g, "schedule", path + ".gamma", "");
    for (const auto& [key, value] : g.items()) {
        if (key != "schedule" && key != "c" && key != "value")
            throw ConfigError("unknown key " + path + ".gamma." + key);
    }
    if (schedule == "inverse") return GammaSchedule::inverse(real_field(g, "c", path + ".gamma"));
    if (schedule == "constant") return GammaSchedule::constant(real_field(g, "value", path + ".gamma"));
    throw ConfigError(path + ".gamma.schedule must be inverse or constant");
}

OccupancyMode occupancy_field(const json& j, const std::string& path) {
    const std::string mode = string_field_or(j, "occupancy", path, "automatic");
    if (mode == "automatic") return OccupancyMode::automatic;
    if (mode == "exact") return OccupancyMode::exact;
    if (mode == "approximate") return OccupancyMode::approximate;
    throw ConfigError(path + ".occupancy must be automatic, exact or approximate");
}

BoundResult evaluate(const json& j, const std::string& path, const ExperimentConfig& config,
                     std::optional<std::size_t> m, std::optional<double> M) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "stacking") {
        const auto betas = base_betas(j, path, m);
        return stacking_bound(combiner_beta(j, path, m), betas);
    }
    if (kind == "inclusion_tail") {
        const std::size_t T = count_field_or(j, "T", path, std::nullopt);
        const std::size_t s = count_field_or(j, "s", path, T / 2);
        const double q = real_field(j, "q", path);
        BoundResult r;
        r.value = inclusion_tail(T, s, q);
        r.formula = "inclusion-tail: P(N > s), N ~ Binomial(T, q)";
        r.inputs = {{"T", static_cast<double>(T)}, {"s", static_cast<double>(s)}, {"q", q}};
        return r;
    }
    if (kind == "bag_stacking") {
        const auto betas = base_betas(j, path, m);
        const std::size_t T = count_field_or(j, "T", path, betas.size());
        const std::size_t mm = count_field_or(j, "m", path, m);
        const auto q = BootstrapInclusion::from_token(string_field_or(j, "q_mode", path, "paper"),
                                                      real_field_or(j, "q", path, 0.0));
        return bag_stacking_bound(T, mm, combiner_beta(j, path, m), betas, q);
    }
    if (kind == "dag_stacking") {
        const auto betas = base_betas(j, path, m);
        const std::size_t T = count_field_or(j, "T", path, betas.size());
        const std::size_t mm = count_field_or(j, "m", path, m);
        const std::size_t p = count_field_or(j, "p", path, std::nullopt);
        const auto q = SubsampleInclusion::from_token(string_field_or(j, "q_mode", path, "paper-example"),
                                                      real_field_or(j, "q", path, 0.0));
        return dag_stacking_bound(T, p, mm, combiner_beta(j, path, m), betas, q);
    }
    if (kind == "bagging") {
        return bagging_stability_bound(gamma_field(j, path), count_field_or(j, "m", path, m),
                                       real_field_or(j, "B", path, config.B), bound_task_field(j, path, config),
                                       occupancy_field(j, path));
    }
    if (kind == "subbagging") {
        const std::size_t p = count_field_or(j, "p", path, std::nullopt);
        double gamma_p = 0.0;
        if (j.contains("base")) {
            gamma_p = learner_beta(learner_from_json(j.at("base"), path + ".base"), p, path + ".base");
        } else {
            gamma_p = real_field(j, "gamma_p", path);
        }
        return subbagging_stability_bound(gamma_p, p, count_field_or(j, "m", path, m),
                                          real_field_or(j, "B", path, config.B), bound_task_field(j, path, config));
    }
    if (kind == "combiner_on_bagging") {
        json inner_request = j.at("inner");
        if (j.contains("m") && !inner_request.contains("m")) inner_request["m"] = j.at("m");
        const BoundResult inner = evaluate(inner_request, path + ".inner", config, m, M);
        return combiner_on_bagging_bound(combiner_beta(j, path, m), real_field_or(j, "B", path, config.B), inner);
    }
    if (kind == "gen") {
        const std::string variant = string_field_or(j, "variant", path, "hypothesis");
        GenBoundKind k;
        if (variant == "hypothesis") k = GenBoundKind::hypothesis;
        else if (variant == "pointwise") k = GenBoundKind::pointwise;
        else if (variant == "uniform") k = GenBoundKind::uniform;
        else throw ConfigError(path + ".variant must be hypothesis, pointwise or uniform");
        return gen_bound(k, real_field(j, "observed_error", path), real_field(j, "beta", path),
                         real_field_or(j, "M", path, M.value_or(1.0)), count_field_or(j, "m", path, m),
                         real_field_or(j, "delta", path, config.delta));
    }
    if (kind == "gen_subbagging") {
        const std::string variant = string_field_or(j, "variant", path, "loo");
        SubbaggingGenVariant v;
        if (variant == "loo") v = SubbaggingGenVariant::loo;
        else if (variant == "emp") v = SubbaggingGenVariant::emp;
        else throw ConfigError(path + ".variant must be loo or emp");
        return gen_bound_subbagging(v, real_field(j, "observed_error", path), real_field(j, "gamma", path),
                                    count_field_or(j, "p", path, std::nullopt), count_field_or(j, "m", path, m),
                                    real_field_or(j, "M", path, M.value_or(1.0)),
                                    real_field_or(j, "B", path, config.B), real_field_or(j, "delta", path, config.delta));
    }
    throw ConfigError(path + ".kind: unknown bound '" + kind + "'");
}

// ---------------------------------------------------------------------------
// shared pieces of stability / experiment

LossKind resolve_loss(const ExperimentConfig& config, Task task, double auto_M) {
    const LossKind::Kind kind = config.loss.kind.value_or(task == Task::regression ? LossKind::Kind::squared
                                                                                   : LossKind::Kind::classification01);
    switch (kind) {
        case LossKind::Kind::squared: return LossKind::squared(config.loss.M.value_or(auto_M));
        case LossKind::Kind::classification01: return LossKind::classification01();
        case LossKind::Kind::gamma: return LossKind::gamma_margin(config.loss.gamma);
    }
    return LossKind::classification01();
}

/// (max|y| + max|f(x)|)^2 over the given sets: the squared loss never exceeds it there.
double squared_bound(const FittedModel& model, std::initializer_list<const Dataset*> sets) {
    double max_y = 0.0;
    double max_f = 0.0;
    for (const Dataset* d : sets) {
        if (!d) continue;
        for (const auto& z : d->examples()) {
            max_y = std::max(max_y, std::abs(z.y));
            max_f = std::max(max_f, std::abs(model.predict(z.x)));
        }
    }
    const double M = (max_y + max_f) * (max_y + max_f);
    return M > 0.0 ? M : 1.0;
}

json loss_to_json(const LossKind& loss) {
    json j{{"kind", std::string(to_string(loss.kind))}, {"M", loss.bound}};
    if (loss.kind == LossKind::Kind::gamma) j["gamma"] = loss.gamma;
    return j;
}

json policy_json(const IndexPolicy& p) {
    json j{{"kind", p.kind == IndexPolicy::Kind::random  ? "random"
                    : p.kind == IndexPolicy::Kind::fixed ? "fixed"
                                                         : "scan"},
           {"description", p.describe()}};
    if (p.kind == IndexPolicy::Kind::fixed) j["index"] = p.index;
    if (p.kind == IndexPolicy::Kind::max_scan) j["indices"] = p.scanned;
    return j;
}

json estimate_to_json(const StabilityEstimate& e) {
    json j{{"mode", to_string(e.mode)}, {"mean", e.mean},       {"std_error", e.std_error},
           {"trials", e.trials},        {"m", e.m},             {"policy", policy_json(e.policy)},
           {"loss", loss_to_json(e.loss)}};
    j["scanned_means"] = e.scanned_means;
    j["argmax_index"] = e.argmax_index ? json(*e.argmax_index) : json(nullptr);
    return j;
}

json comparison_to_json(const ComparisonRecord& c) {
    return json{{"estimate", c.estimate},
                {"std_error", c.std_error},
                {"bound", optional_json(c.bound)},
                {"bound_formula", c.bound_formula},
                {"status", to_string(c.status)},
                {"satisfied", c.status == ComparisonRecord::Status::not_applicable
                                  ? json(nullptr)
                                  : json(c.status == ComparisonRecord::Status::satisfied)},
                {"slack", optional_json(c.slack)},
                {"note", c.note}};
}

/// Theoretical stability of the configured recipe at training size m, when known.
/// The published constants are hypothesis-stability constants. Only a model
/// that ignores its training set is known to be stable in every sense.
struct Theory {
    std::optional<BoundResult> bound;
    std::string note;
    bool every_notion = false;
};

Theory theory_for(const Recipe& recipe, std::size_t m, Task task, double B) {
    const BoundTask bound_task = task == Task::regression ? BoundTask::regression : BoundTask::classification;
    auto descriptor_bound = [&](const LearnerSpec& spec, std::size_t size) -> std::optional<BoundResult> {
        const StabilityDescriptor d = theoretical_stability(spec, size, LossKind::classification01());
        if (!d.value) return std::nullopt;
        BoundResult r;
        r.value = *d.value;
        r.formula = spec.describe() + ": " + d.formula;
        r.inputs = {{"m", static_cast<double>(size)}};
        r.loss = d.loss;
        if (!d.note.empty()) r.notes.push_back(d.note);
        return r;
    };
    auto unknown = [](const std::string& why) { return Theory{std::nullopt, why}; };

    return std::visit(
        overloaded{
            [&](const SingleLearnerRecipe& r) -> Theory {
                auto b = descriptor_bound(r.learner, m);
                if (!b) return unknown("no stability constant known for " + r.learner.describe());
                return Theory{b, "", r.learner.algorithm() == Algorithm::constant};
            },
            [&](const BaggingRecipe& r) -> Theory {
                try {
                    return Theory{bagging_stability_bound(schedule_for(r.base, "recipe.base"), m, B, bound_task), ""};
                } catch (const ConfigError&) {
                    return unknown("no stability schedule known for " + r.base.describe());
                }
            },
            [&](const SubbaggingRecipe& r) -> Theory {
                auto g = descriptor_bound(r.base, r.p);
                if (!g || r.p > m) return unknown("no stability constant known for " + r.base.describe());
                return Theory{subbagging_stability_bound(g->value, r.p, m, B, bound_task), ""};
            },
            [&](const StackingRecipe& r) -> Theory {
                std::vector<double> betas;
                std::optional<LossKind::Kind> loss;
                for (const auto& spec : r.base_specs) {
                    auto b = descriptor_bound(spec, m);
                    if (!b) return unknown("no stability constant known for base " + spec.describe());
                    betas.push_back(b->value);
                    if (b->loss) loss = b->loss;
                }
                auto c = descriptor_bound(r.combiner_spec, m);
                if (!c) return unknown("no stability constant known for combiner " + r.combiner_spec.describe());
                if (c->loss) loss = c->loss;
                BoundResult out;
                if (r.sampling == Sampling::none) out = stacking_bound(c->value, betas);
                else if (r.sampling == Sampling::bootstrap)
                    out = bag_stacking_bound(betas.size(), m, c->value, betas);
                else out = dag_stacking_bound(betas.size(), r.subsample_size, m, c->value, betas);
                out.loss = loss;
                return Theory{out, ""};
            },
            [&](const AdaBoostRecipe&) -> Theory { return unknown("no stability constant known for adaboost"); },
            [&](const WeightedBaggingRecipe&) -> Theory {
                return unknown("no stability constant known for weighted bagging");
            },
        },
        recipe);
}

constexpr const char* kHypothesisOnly = "the theoretical constant bounds hypothesis stability only";

ComparisonRecord compare(const StabilityEstimate& e, const Theory& theory) {
    if (!theory.bound) {
        ComparisonRecord r = compare_to_bound(e, std::nullopt, std::nullopt, "unknown");
        r.note = theory.note;
        return r;
    }
    if (e.mode != StabilityMode::hypothesis && !theory.every_notion) {
        ComparisonRecord r = compare_to_bound(e, std::nullopt, std::nullopt, theory.bound->formula);
        r.note = kHypothesisOnly;
        return r;
    }
    try {
        ComparisonRecord r = compare_to_bound(e, *theory.bound);
        if (!theory.bound->notes.empty()) r.note = theory.bound->notes.front();
        return r;
    } catch (const std::invalid_argument& ex) {
        ComparisonRecord r = compare_to_bound(e, std::nullopt, std::nullopt, theory.bound->formula);
        r.note = ex.what();
        return r;
    }
}

json theory_to_json(const Theory& t) {
    return json{{"bound", t.bound ? bound_to_json(*t.bound) : json(nullptr)},
                {"status", t.bound ? "known" : "unknown"},
                {"notion", t.bound ? json(t.every_notion ? "all" : "hypothesis") : json(nullptr)},
                {"note", t.note}};
}

const SyntheticSpec& require_synthetic(const ExperimentConfig& config, const std::string& what) {
    if (const auto* s = std::get_if<SyntheticSpec>(&config.dataset)) return *s;
    throw ConfigError(what + " needs a synthetic dataset source to draw fresh training sets");
}

std::size_t synthetic_size(const SyntheticSpec& spec) {
    return std::visit([](const auto& s) { return s.m; }, spec);
}

/// Runs every configured stability mode; fills results["stability"].
json stability_section(const ExperimentConfig& config, const SyntheticSpec& spec, const LossKind& loss, Task task,
                       const Parallelism& parallelism, std::string& summary) {
    const std::size_t m = config.stability.m.value_or(synthetic_size(spec));
    const SyntheticSource source(spec, Seed{config.seed});
    const RecipeTrainer trainer = recipe_trainer(config.recipe);
    const Theory theory = theory_for(config.recipe, m, task, config.B);

    json estimates = json::array();
    json comparisons = json::array();
    std::ostringstream s;
    for (StabilityMode mode : config.stability.modes) {
        const StabilityEstimate e = estimate_stability(mode, trainer, source, m, loss, config.stability.trials,
                                                       config.stability.policy,
                                                       derive(Seed{config.seed}, "stability"), parallelism);
        estimates.push_back(estimate_to_json(e));
        const ComparisonRecord c = compare(e, theory);
        comparisons.push_back(comparison_to_json(c));
        s << "  " << to_string(mode) << " stability: " << e.mean << " +- " << e.std_error << " (" << e.trials
          << " trials); bound ";
        if (c.bound) s << *c.bound;
        else s << "n/a";
        s << ": " << to_string(c.status) << "\n";
    }
    summary += s.str();
    return json{{"m", m},
                {"trials", config.stability.trials},
                {"loss", loss_to_json(loss)},
                {"estimates", estimates},
                {"theory", theory_to_json(theory)},
                {"comparisons", comparisons}};
}

}  // namespace

json bound_to_json(const BoundResult& bound) {
    json inputs = json::object();
    for (const auto& [name, value] : bound.inputs) inputs[name] = value;
    json j{{"value", bound.value}, {"formula", bound.formula}, {"inputs", inputs}, {"notes", bound.notes}};
    j["q_mode"] = bound.q_mode.empty() ? json(nullptr) : json(bound.q_mode);
    j["loss"] = bound.loss ? json(std::string(to_string(*bound.loss))) : json(nullptr);
    return j;
}

BoundResult evaluate_bound_request(const BoundRequest& request, const ExperimentConfig& config,
                                   std::optional<std::size_t> m, std::optional<double> M) {
    const std::string path = "bounds(" + request.kind + ")";
    try {
        return evaluate(request.params, path, config, m, M);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

Dataset load_dataset(const ExperimentConfig& config) {
    return std::visit(overloaded{
                          [&](const SyntheticSpec& s) { return gen_synthetic(s, Seed{config.seed}); },
                          [&](const CsvDataset& c) { return load_csv(c.path, c.label_column, c.task); },
                      },
                      config.dataset);
}

CommandOutput run_stability(const ExperimentConfig& config, const RunOptions& options) {
    Stopwatch total;
    const SyntheticSpec& spec = require_synthetic(config, "the stability command");
    const Task task = dataset_task(config.dataset);

    double auto_M = 1.0;
    if (task == Task::regression && !config.loss.M) {
        // Squared-loss range from a reference draw and the model trained on it.
        const Dataset reference = gen_synthetic(spec, Seed{config.seed});
        const FittedModel model = train_recipe(config.recipe, reference, derive(Seed{config.seed}, "train"));
        auto_M = squared_bound(model, {&reference});
    }
    const LossKind loss = resolve_loss(config, task, auto_M);

    CommandOutput out;
    out.summary = "stability: " + recipe_name(config.recipe) + "\n";
    Stopwatch stage;
    out.results = json{{"recipe", recipe_name(config.recipe)},
                       {"stability", stability_section(config, spec, loss, task, options.parallelism, out.summary)}};
    out.timings["stability_seconds"] = stage.seconds();
    out.timings["total_seconds"] = total.seconds();
    return out;
}

CommandOutput run_bounds(const ExperimentConfig& config, const RunOptions&) {
    Stopwatch total;
    CommandOutput out;
    json list = json::array();
    std::ostringstream s;
    for (const auto& request : config.bounds) {
        const BoundResult r = evaluate_bound_request(request, config, std::nullopt, std::nullopt);
        json j = bound_to_json(r);
        j["kind"] = request.kind;
        j["label"] = request.params.value("label", request.kind);
        list.push_back(j);
        s << "  " << j["label"].get<std::string>() << ": " << r.value << "\n";
    }
    out.results = json{{"bounds", list}};
    out.summary = "bounds:\n" + s.str();
    out.timings["total_seconds"] = total.seconds();
    return out;
}

CommandOutput run_equivalence(const ExperimentConfig& config, const RunOptions& options) {
    Stopwatch total;
    const EquivalenceConfig& eq = config.equivalence;
    const Task task = dataset_task(config.dataset);
    if (task == Task::multiclass) throw ConfigError("equivalence is defined for regression and binary tasks only");
    if (!eq.combiner.is_linear()) throw ConfigError("equivalence only defined for linear combiner");
    if (eq.combiner.has_intercept())
        throw ConfigError("equivalence requires a combiner without intercept (weighted bagging has none)");

    double lambda = 0.0;
    GradientDescentOptions gd;
    gd.intercept = false;
    if (const auto* ridge = std::get_if<RidgeParams>(&eq.combiner.params())) {
        if (task != Task::regression) throw ConfigError("binary equivalence needs a logistic combiner");
        lambda = ridge->lambda;
    } else {
        const auto& logistic = std::get<LogisticParams>(eq.combiner.params());
        if (task != Task::binary) throw ConfigError("regression equivalence needs a ridge combiner");
        lambda = logistic.lambda;
        gd.step = logistic.step;
        gd.max_iters = logistic.max_iters;
        gd.tol = logistic.tol;
    }

    const Dataset data = load_dataset(config);
    const double lambda_reg = lambda * static_cast<double>(data.size());

    StackingRecipe recipe;
    recipe.base_specs.assign(eq.T, eq.base);
    recipe.combiner_spec = eq.combiner;
    recipe.sampling = Sampling::bootstrap;
    recipe.combiner_intercept = false;
    const EnsembleModel stacked =
        stacked_sampling_train(recipe, data, derive(Seed{config.seed}, "train"), options.parallelism);
    const auto& combiner = std::get<CombinerAggregation>(stacked.aggregation()).combiner;
    const std::vector<double> theta_stack = std::get<LinearFit>(combiner.params()).weights;

    EnsembleModel weighted = weighted_bagging_fit(stacked.members(), stacked.member_indices(), data, lambda_reg, gd);
    std::vector<double> theta_weighted = std::get<WeightedAggregation>(weighted.aggregation()).theta;
    if (eq.self_test_perturbation != 0.0) {
        theta_weighted[0] += eq.self_test_perturbation;
        weighted = EnsembleModel(weighted.task(), weighted.members(), weighted.member_indices(),
                                 WeightedAggregation{theta_weighted}, std::vector<double>(weighted.labels().begin(),
                                                                                          weighted.labels().end()));
    }

    double theta_diff = 0.0;
    for (std::size_t t = 0; t < theta_stack.size(); ++t)
        theta_diff = std::max(theta_diff, std::abs(theta_stack[t] - theta_weighted[t]));

    std::unique_ptr<SyntheticSource> source;
    if (const auto* s = std::get_if<SyntheticSpec>(&config.dataset))
        source = std::make_unique<SyntheticSource>(*s, Seed{config.seed});
    double prediction_diff = 0.0;
    for (std::size_t j = 0; j < eq.probe_points; ++j) {
        const std::vector<double> x = source ? source->draw_example(derive(Seed{config.seed}, "probe", j)).x
                                             : data[j % data.size()].x;
        prediction_diff = std::max(prediction_diff, std::abs(stacked.predict(x) - weighted.predict(x)));
    }

    const bool pass = theta_diff <= eq.tolerance && prediction_diff <= eq.tolerance;
    CommandOutput out;
    out.results = json{{"pass", pass},
                       {"max_theta_difference", theta_diff},
                       {"max_prediction_difference", prediction_diff},
                       {"theta_stacking", theta_stack},
                       {"theta_weighted", theta_weighted},
                       {"lambda_reg", lambda_reg},
                       {"tolerance", eq.tolerance},
                       {"probe_points", eq.probe_points},
                       {"self_test_perturbation", eq.self_test_perturbation},
                       {"T", eq.T},
                       {"m", data.size()}};
    std::ostringstream s;
    s << "equivalence: " << (pass ? "PASS" : "FAIL") << " max|theta diff| = " << theta_diff
      << ", max|prediction diff| = " << prediction_diff << " (tolerance " << eq.tolerance << ")\n";
    out.summary = s.str();
    out.timings["total_seconds"] = total.seconds();
    return out;
}

CommandOutput run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    Stopwatch total;
    CommandOutput out;
    auto stage = [&](const std::string& name, auto&& fn) {
        Stopwatch w;
        try {
            auto result = fn();
            out.timings[name + "_seconds"] = w.seconds();
            return result;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error("stage " + name + ": " + e.what());
        }
    };

    const Task task = dataset_task(config.dataset);
    const Dataset data = stage("dataset", [&] { return load_dataset(config); });
    const Seed seed{config.seed};
    const FittedModel model =
        stage("train", [&] { return train_recipe(config.recipe, data, derive(seed, "train"), options.parallelism); });

    const SyntheticSpec* spec = std::get_if<SyntheticSpec>(&config.dataset);
    std::optional<Dataset> holdout = stage("holdout_data", [&]() -> std::optional<Dataset> {
        if (spec) return SyntheticSource(*spec, seed).draw(config.holdout.m, derive(seed, "holdout"));
        if (config.holdout.path) {
            const auto& csv = std::get<CsvDataset>(config.dataset);
            return load_csv(*config.holdout.path, csv.label_column, csv.task);
        }
        return std::nullopt;
    });

    const LossKind loss =
        resolve_loss(config, task, squared_bound(model, {&data, holdout ? &*holdout : nullptr}));

    const double r_emp = stage("empirical", [&] { return empirical_error(model, data, loss); });
    const double r_loo = stage("loo", [&] {
        return loo_error([&](const Dataset& d, Seed s) { return train_recipe(config.recipe, d, s); }, data, loss,
                         derive(seed, "loo"), options.parallelism);
    });
    const std::optional<RiskEstimate> r_holdout = stage("holdout", [&]() -> std::optional<RiskEstimate> {
        if (!holdout) return std::nullopt;
        return holdout_risk(model, *holdout, loss);
    });

    out.summary = "experiment: " + recipe_name(config.recipe) + " on m = " + std::to_string(data.size()) + "\n";
    std::ostringstream s;
    s << "  R_emp = " << r_emp << ", R_loo = " << r_loo;
    if (r_holdout) s << ", holdout = " << r_holdout->mean << " +- " << r_holdout->std_error;
    s << "\n";
    out.summary += s.str();

    json stability = nullptr;
    if (spec) {
        stability = stage("stability", [&] {
            return stability_section(config, *spec, loss, task, options.parallelism, out.summary);
        });
    }

    const std::size_t m = data.size();
    const Theory theory = theory_for(config.recipe, m, task, config.B);
    json gen_bounds = json::array();
    json gen_skipped = json::array();
    auto add_gen = [&](const std::string& name, const BoundResult& b) {
        json j = bound_to_json(b);
        j["kind"] = name;
        j["holdout_within_bound"] = r_holdout ? json(r_holdout->mean <= b.value) : json(nullptr);
        gen_bounds.push_back(j);
        std::ostringstream line;
        line << "  " << name << " bound: " << b.value << "\n";
        out.summary += line.str();
    };
    auto skip_gen = [&](const std::string& name, const std::string& reason) {
        gen_skipped.push_back(json{{"kind", name}, {"reason", reason}});
    };
    stage("gen_bounds", [&] {
        // Each theorem needs the matching stability notion: hypothesis for the
        // R_loo bound, pointwise for the R_emp bound, uniform for the
        // exponential bound.
        if (theory.bound) {
            const double beta = theory.bound->value;
            add_gen("hypothesis", gen_bound(GenBoundKind::hypothesis, r_loo, beta, loss.bound, m, config.delta));
            if (theory.every_notion) {
                add_gen("pointwise", gen_bound(GenBoundKind::pointwise, r_emp, beta, loss.bound, m, config.delta));
                add_gen("uniform", gen_bound(GenBoundKind::uniform, r_emp, beta, loss.bound, m, config.delta));
            } else {
                skip_gen("pointwise", "needs a pointwise stability constant; " + std::string(kHypothesisOnly));
                skip_gen("uniform", "needs a uniform stability constant; " + std::string(kHypothesisOnly));
            }
        } else {
            for (const char* name : {"hypothesis", "pointwise", "uniform"}) skip_gen(name, theory.note);
        }
        if (const auto* sub = std::get_if<SubbaggingRecipe>(&config.recipe)) {
            const StabilityDescriptor d = theoretical_stability(sub->base, sub->p, loss);
            if (d.value && sub->p <= m) {
                add_gen("subbagging_loo", gen_bound_subbagging(SubbaggingGenVariant::loo, r_loo, *d.value, sub->p, m,
                                                               loss.bound, config.B, config.delta));
                if (sub->base.algorithm() == Algorithm::constant) {
                    add_gen("subbagging_emp", gen_bound_subbagging(SubbaggingGenVariant::emp, r_emp, *d.value, sub->p,
                                                                   m, loss.bound, config.B, config.delta));
                } else {
                    skip_gen("subbagging_emp", "needs the base pointwise constant gamma'_p; " +
                                                   std::string(kHypothesisOnly));
                }
            } else {
                skip_gen("subbagging_loo", "no stability constant known for " + sub->base.describe());
                skip_gen("subbagging_emp", "no stability constant known for " + sub->base.describe());
            }
        }
        return 0;
    });

    json bounds = json::array();
    for (const auto& request : config.bounds) {
        const BoundResult r = evaluate_bound_request(request, config, m, loss.bound);
        json j = bound_to_json(r);
        j["kind"] = request.kind;
        j["label"] = request.params.value("label", request.kind);
        bounds.push_back(j);
    }

    if (options.save_model) {
        stage("save_model", [&] {
            std::ofstream file(*options.save_model);
            if (!file) throw std::runtime_error("cannot write model to " + options.save_model->string());
            file << fitted_to_json(model).dump(2) << "\n";
            return 0;
        });
    }

    json holdout_json = nullptr;
    if (r_holdout) {
        holdout_json = json{{"mean", r_holdout->mean}, {"std_error", r_holdout->std_error}, {"n", r_holdout->n}};
    }
    out.results = json{{"recipe", recipe_name(config.recipe)},
                       {"dataset", {{"m", data.size()}, {"d", data.dim()}, {"task", std::string(to_string(task))}}},
                       {"loss", loss_to_json(loss)},
                       {"errors", {{"empirical", r_emp}, {"loo", r_loo}, {"holdout", holdout_json}}},
                       {"stability", stability},
                       {"theory", theory_to_json(theory)},
                       {"gen_bounds", gen_bounds},
                       {"gen_bounds_skipped", gen_skipped},
                       {"bounds", bounds}};
    out.timings["total_seconds"] = total.seconds();
    return out;
}

}  // namespace stackstab::harness
