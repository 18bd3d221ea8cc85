#include "stackstab/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>

#include "stackstab/core/overloaded.hpp"

namespace stackstab::harness {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

/// Reads the fields of one JSON object and rejects keys that were never asked for.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(join(path_, key) + " is required");
        return j_.at(key);
    }

    std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 0) {
        return has(key) ? count_value(at(key), join(path_, key), min) : fallback;
    }

    std::uint64_t uint64(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_number_unsigned()) throw ConfigError(join(path_, key) + " must be a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    double real(const std::string& key, double fallback) { return has(key) ? real_value(at(key), join(path_, key)) : fallback; }

    std::optional<double> optional_real(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return real_value(at(key), join(path_, key));
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_boolean()) throw ConfigError(join(path_, key) + " must be true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        return string_value(at(key), join(path_, key));
    }

    std::string path(const std::string& key) const { return join(path_, key); }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw ConfigError("unknown key " + join(path_, key));
        }
    }

    static std::size_t count_value(const json& v, const std::string& where, std::size_t min) {
        if (!v.is_number_unsigned()) throw ConfigError(where + " must be a nonnegative integer");
        const auto n = v.get<std::size_t>();
        if (n < min) throw ConfigError(where + " must be >= " + std::to_string(min));
        return n;
    }

    static double real_value(const json& v, const std::string& where) {
        if (!v.is_number()) throw ConfigError(where + " must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(where + " must be finite");
        return x;
    }

    static std::string string_value(const json& v, const std::string& where) {
        if (!v.is_string()) throw ConfigError(where + " must be a string");
        return v.get<std::string>();
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class Fn>
auto guarded(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

DatasetConfig dataset_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string source = r.string("source", "synthetic");
    DatasetConfig out;
    if (source == "synthetic") {
        const std::string generator = r.string("generator", "blobs");
        if (generator == "blobs") {
            BlobsSpec s;
            s.m = r.count("m", s.m, 1);
            s.d = r.count("d", s.d, 1);
            s.separation = r.real("separation", s.separation);
            out = SyntheticSpec{s};
        } else if (generator == "linear") {
            LinearSpec s;
            s.m = r.count("m", s.m, 1);
            s.d = r.count("d", s.d, 1);
            s.noise_std = r.real("noise_std", s.noise_std);
            out = SyntheticSpec{s};
        } else {
            throw ConfigError(r.path("generator") + " must be blobs or linear");
        }
        guarded(path, [&] {
            validate(std::get<SyntheticSpec>(out));
            return 0;
        });
    } else if (source == "csv") {
        CsvDataset c;
        c.path = r.string("path", "");
        if (c.path.empty()) throw ConfigError(r.path("path") + " is required for csv datasets");
        c.label_column = r.string("label_column", c.label_column);
        c.task = guarded(r.path("task"), [&] { return task_from_string(r.string("task", "binary")); });
        out = c;
    } else {
        throw ConfigError(r.path("source") + " must be synthetic or csv");
    }
    r.finish();
    return out;
}

json dataset_to_json(const DatasetConfig& d) {
    return std::visit(overloaded{
                          [](const SyntheticSpec& s) {
                              return std::visit(overloaded{
                                                    [](const BlobsSpec& b) {
                                                        return json{{"source", "synthetic"},
                                                                    {"generator", "blobs"},
                                                                    {"m", b.m},
                                                                    {"d", b.d},
                                                                    {"separation", b.separation}};
                                                    },
                                                    [](const LinearSpec& l) {
                                                        return json{{"source", "synthetic"},
                                                                    {"generator", "linear"},
                                                                    {"m", l.m},
                                                                    {"d", l.d},
                                                                    {"noise_std", l.noise_std}};
                                                    },
                                                },
                                                s);
                          },
                          [](const CsvDataset& c) {
                              return json{{"source", "csv"},
                                          {"path", c.path.string()},
                                          {"label_column", c.label_column},
                                          {"task", std::string(to_string(c.task))}};
                          },
                      },
                      d);
}

std::vector<LearnerSpec> learners_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path + " must be a non-empty array of learners");
    std::vector<LearnerSpec> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(learner_from_json(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Recipe recipe_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string type = r.string("type", "learner");
    std::optional<Recipe> out;
    if (type == "learner") {
        out = SingleLearnerRecipe{learner_from_json(r.at("learner"), r.path("learner"))};
    } else if (type == "bagging") {
        BaggingRecipe b{learner_from_json(r.at("base"), r.path("base"))};
        b.T = r.count("T", b.T, 1);
        out = b;
    } else if (type == "subbagging") {
        SubbaggingRecipe s{learner_from_json(r.at("base"), r.path("base"))};
        s.T = r.count("T", s.T, 1);
        s.p = r.count("p", s.p, 1);
        out = s;
    } else if (type == "adaboost") {
        AdaBoostRecipe a{r.has("weak") ? learner_from_json(r.at("weak"), r.path("weak")) : LearnerSpec::stump()};
        a.T = r.count("T", a.T, 1);
        out = a;
    } else if (type == "stacking") {
        StackingRecipe s;
        s.base_specs = learners_from_json(r.at("bases"), r.path("bases"));
        if (r.has("combiner")) s.combiner_spec = learner_from_json(r.at("combiner"), r.path("combiner"));
        const std::string sampling = r.string("sampling", "none");
        if (sampling == "none") s.sampling = Sampling::none;
        else if (sampling == "bootstrap") s.sampling = Sampling::bootstrap;
        else if (sampling == "subsample") s.sampling = Sampling::subsample;
        else throw ConfigError(r.path("sampling") + " must be none, bootstrap or subsample");
        s.subsample_size = r.count("p", 0);
        if (s.sampling == Sampling::subsample && s.subsample_size == 0)
            throw ConfigError(r.path("p") + " is required (>= 1) for subsample stacking");
        s.combiner_intercept = r.boolean("combiner_intercept", false);
        s.out_of_fold = r.count("out_of_fold", 0);
        if (s.out_of_fold == 1) throw ConfigError(r.path("out_of_fold") + " must be 0 or >= 2");
        out = s;
    } else if (type == "weighted_bagging") {
        WeightedBaggingRecipe w{learner_from_json(r.at("base"), r.path("base"))};
        w.T = r.count("T", w.T, 1);
        w.lambda_reg = r.real("lambda_reg", w.lambda_reg);
        if (w.lambda_reg < 0) throw ConfigError(r.path("lambda_reg") + " must be >= 0");
        w.gradient_descent.intercept = false;
        out = w;
    } else {
        throw ConfigError(r.path("type") +
                          " must be learner, bagging, subbagging, adaboost, stacking or weighted_bagging");
    }
    r.finish();
    return *out;
}

LossConfig loss_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    LossConfig l;
    if (r.has("kind")) {
        l.kind = guarded(r.path("kind"), [&] { return loss_kind_from_string(r.string("kind", "")); });
    }
    l.gamma = r.real("gamma", l.gamma);
    if (l.gamma <= 0) throw ConfigError(r.path("gamma") + " must be > 0");
    l.M = r.optional_real("M");
    if (l.M && *l.M <= 0) throw ConfigError(r.path("M") + " must be > 0");
    r.finish();
    return l;
}

IndexPolicy policy_from_json(const json& j, const std::string& path) {
    if (j.is_string()) {
        if (j.get<std::string>() == "random") return IndexPolicy::random();
        throw ConfigError(path + " must be \"random\" or an object");
    }
    ObjectReader r(j, path);
    const std::string kind = r.string("kind", "random");
    IndexPolicy p;
    if (kind == "random") {
    } else if (kind == "fixed") {
        p = IndexPolicy::fixed(r.count("index", 0));
    } else if (kind == "scan") {
        const json& idx = r.at("indices");
        if (!idx.is_array() || idx.empty()) throw ConfigError(r.path("indices") + " must be a non-empty array");
        std::vector<std::size_t> indices;
        for (const auto& v : idx) indices.push_back(ObjectReader::count_value(v, r.path("indices"), 0));
        p = IndexPolicy::max_over(std::move(indices));
    } else {
        throw ConfigError(r.path("kind") + " must be random, fixed or scan");
    }
    r.finish();
    return p;
}

json policy_to_json(const IndexPolicy& p) {
    switch (p.kind) {
        case IndexPolicy::Kind::random: return json{{"kind", "random"}};
        case IndexPolicy::Kind::fixed: return json{{"kind", "fixed"}, {"index", p.index}};
        case IndexPolicy::Kind::max_scan: return json{{"kind", "scan"}, {"indices", p.scanned}};
    }
    return json();
}

StabilityConfig stability_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    StabilityConfig s;
    if (r.has("modes")) {
        const json& modes = r.at("modes");
        if (!modes.is_array() || modes.empty()) throw ConfigError(r.path("modes") + " must be a non-empty array");
        s.modes.clear();
        for (const auto& m : modes) {
            s.modes.push_back(guarded(r.path("modes"), [&] {
                return stability_mode_from_string(ObjectReader::string_value(m, r.path("modes")));
            }));
        }
    }
    s.trials = r.count("trials", s.trials, 1);
    if (r.has("policy")) s.policy = policy_from_json(r.at("policy"), r.path("policy"));
    if (r.has("m")) s.m = r.count("m", 0, 2);
    r.finish();
    return s;
}

const std::map<std::string, std::set<std::string>>& bound_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"stacking", {"combiner_beta", "base_betas", "combiner", "bases", "m"}},
        {"inclusion_tail", {"T", "s", "q"}},
        {"bag_stacking", {"T", "m", "combiner_beta", "base_betas", "combiner", "bases", "q_mode", "q"}},
        {"dag_stacking", {"T", "p", "m", "combiner_beta", "base_betas", "combiner", "bases", "q_mode", "q"}},
        {"bagging", {"task", "m", "B", "gamma", "base", "occupancy"}},
        {"subbagging", {"task", "p", "m", "B", "gamma_p", "base"}},
        {"combiner_on_bagging", {"combiner_beta", "combiner", "m", "B", "inner"}},
        {"gen", {"variant", "observed_error", "beta", "M", "m", "delta"}},
        {"gen_subbagging", {"variant", "observed_error", "gamma", "p", "m", "M", "B", "delta"}},
    };
    return keys;
}

void check_bound_keys(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + " must be an object");
    if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError(path + ".kind is required");
    const std::string kind = j.at("kind").get<std::string>();
    const auto it = bound_keys().find(kind);
    if (it == bound_keys().end()) throw ConfigError(path + ".kind: unknown bound '" + kind + "'");
    for (const auto& [key, value] : j.items()) {
        if (key == "kind" || key == "label") continue;
        if (!it->second.contains(key)) throw ConfigError("unknown key " + path + "." + key);
    }
    if (kind == "combiner_on_bagging") {
        if (!j.contains("inner")) throw ConfigError(path + ".inner is required");
        check_bound_keys(j.at("inner"), path + ".inner");
        const std::string inner = j.at("inner").at("kind").get<std::string>();
        if (inner != "bagging" && inner != "subbagging")
            throw ConfigError(path + ".inner.kind must be bagging or subbagging");
    }
}

HoldoutConfig holdout_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    HoldoutConfig h;
    h.m = r.count("m", h.m, 1);
    if (r.has("path")) h.path = r.string("path", "");
    r.finish();
    return h;
}

EquivalenceConfig equivalence_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    EquivalenceConfig e;
    e.T = r.count("T", e.T, 1);
    if (r.has("base")) e.base = learner_from_json(r.at("base"), r.path("base"));
    if (r.has("combiner")) e.combiner = learner_from_json(r.at("combiner"), r.path("combiner"));
    e.probe_points = r.count("probe_points", e.probe_points, 1);
    e.self_test_perturbation = r.real("self_test_perturbation", e.self_test_perturbation);
    e.tolerance = r.real("tolerance", e.tolerance);
    if (e.tolerance < 0) throw ConfigError(r.path("tolerance") + " must be >= 0");
    r.finish();
    return e;
}

}  // namespace

LearnerSpec learner_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string algorithm = r.string("algorithm", "");
    if (algorithm.empty()) throw ConfigError(r.path("algorithm") + " is required");
    const LearnerSpec spec = guarded(path, [&]() -> LearnerSpec {
        switch (algorithm_from_string(algorithm)) {
            case Algorithm::knn: return LearnerSpec::knn(r.count("k", 1, 1));
            case Algorithm::ridge: return LearnerSpec::ridge(r.real("lambda", 1.0), r.boolean("intercept", false));
            case Algorithm::logistic: {
                LogisticParams p;
                p.lambda = r.real("lambda", p.lambda);
                p.step = r.real("step", p.step);
                p.max_iters = r.count("max_iters", p.max_iters, 1);
                p.tol = r.real("tol", p.tol);
                p.intercept = r.boolean("intercept", p.intercept);
                return LearnerSpec::logistic(p);
            }
            case Algorithm::stump: return LearnerSpec::stump();
            case Algorithm::constant: return LearnerSpec::constant(r.real("value", 0.0));
            case Algorithm::mean: return LearnerSpec::mean();
        }
        throw ConfigError("unreachable");
    });
    r.finish();
    return spec;
}

json learner_to_json(const LearnerSpec& spec) {
    return std::visit(overloaded{
                          [](const KnnParams& p) { return json{{"algorithm", "knn"}, {"k", p.k}}; },
                          [](const RidgeParams& p) {
                              return json{{"algorithm", "ridge"}, {"lambda", p.lambda}, {"intercept", p.intercept}};
                          },
                          [](const LogisticParams& p) {
                              return json{{"algorithm", "logistic"}, {"lambda", p.lambda},
                                          {"step", p.step},          {"max_iters", p.max_iters},
                                          {"tol", p.tol},            {"intercept", p.intercept}};
                          },
                          [](const StumpParams&) { return json{{"algorithm", "stump"}}; },
                          [](const ConstantParams& p) { return json{{"algorithm", "constant"}, {"value", p.value}}; },
                          [](const MeanParams&) { return json{{"algorithm", "mean"}}; },
                      },
                      spec.params());
}

json recipe_to_json(const Recipe& recipe) {
    return std::visit(
        overloaded{
            [](const SingleLearnerRecipe& r) { return json{{"type", "learner"}, {"learner", learner_to_json(r.learner)}}; },
            [](const BaggingRecipe& r) { return json{{"type", "bagging"}, {"base", learner_to_json(r.base)}, {"T", r.T}}; },
            [](const SubbaggingRecipe& r) {
                return json{{"type", "subbagging"}, {"base", learner_to_json(r.base)}, {"T", r.T}, {"p", r.p}};
            },
            [](const AdaBoostRecipe& r) { return json{{"type", "adaboost"}, {"weak", learner_to_json(r.weak)}, {"T", r.T}}; },
            [](const StackingRecipe& r) {
                json bases = json::array();
                for (const auto& b : r.base_specs) bases.push_back(learner_to_json(b));
                return json{{"type", "stacking"},
                            {"bases", bases},
                            {"combiner", learner_to_json(r.combiner_spec)},
                            {"sampling", std::string(to_string(r.sampling))},
                            {"p", r.subsample_size},
                            {"combiner_intercept", r.combiner_intercept},
                            {"out_of_fold", r.out_of_fold}};
            },
            [](const WeightedBaggingRecipe& r) {
                return json{{"type", "weighted_bagging"},
                            {"base", learner_to_json(r.base)},
                            {"T", r.T},
                            {"lambda_reg", r.lambda_reg}};
            },
        },
        recipe);
}

Task dataset_task(const DatasetConfig& dataset) {
    return std::visit(overloaded{
                          [](const SyntheticSpec& s) {
                              return std::holds_alternative<LinearSpec>(s) ? Task::regression : Task::binary;
                          },
                          [](const CsvDataset& c) { return c.task; },
                      },
                      dataset);
}

ExperimentConfig parse_config(const json& document) {
    ObjectReader r(document, "");
    ExperimentConfig c;
    c.seed = r.uint64("seed", c.seed);
    if (r.has("dataset")) c.dataset = dataset_from_json(r.at("dataset"), "dataset");
    if (r.has("recipe")) c.recipe = recipe_from_json(r.at("recipe"), "recipe");
    if (r.has("loss")) c.loss = loss_from_json(r.at("loss"), "loss");
    if (r.has("stability")) c.stability = stability_from_json(r.at("stability"), "stability");
    if (r.has("bounds")) {
        const json& list = r.at("bounds");
        if (!list.is_array()) throw ConfigError("bounds must be an array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string path = "bounds[" + std::to_string(i) + "]";
            check_bound_keys(list[i], path);
            c.bounds.push_back({list[i].at("kind").get<std::string>(), list[i]});
        }
    }
    if (r.has("holdout")) c.holdout = holdout_from_json(r.at("holdout"), "holdout");
    c.delta = r.real("delta", c.delta);
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    c.B = r.real("B", c.B);
    if (c.B <= 0.0) throw ConfigError("B must be > 0");
    if (r.has("equivalence")) c.equivalence = equivalence_from_json(r.at("equivalence"), "equivalence");
    r.finish();

    const Task task = dataset_task(c.dataset);
    if (c.loss.kind == LossKind::Kind::squared && task != Task::regression && !c.loss.M)
        throw ConfigError("loss.M is required for the squared loss on classification data");
    if (task == Task::regression && c.loss.kind && *c.loss.kind != LossKind::Kind::squared)
        throw ConfigError("loss.kind must be squared for regression data");
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json modes = json::array();
    for (auto m : c.stability.modes) modes.push_back(to_string(m));
    json bounds = json::array();
    for (const auto& b : c.bounds) bounds.push_back(b.params);

    const Task task = dataset_task(c.dataset);
    const LossKind::Kind kind =
        c.loss.kind.value_or(task == Task::regression ? LossKind::Kind::squared : LossKind::Kind::classification01);
    json loss{{"kind", std::string(to_string(kind))}, {"gamma", c.loss.gamma}};
    loss["M"] = c.loss.M ? json(*c.loss.M) : json(nullptr);

    json holdout{{"m", c.holdout.m}};
    holdout["path"] = c.holdout.path ? json(c.holdout.path->string()) : json(nullptr);

    json stability{{"modes", modes}, {"trials", c.stability.trials}, {"policy", policy_to_json(c.stability.policy)}};
    stability["m"] = c.stability.m ? json(*c.stability.m) : json(nullptr);

    return json{{"seed", c.seed},
                {"dataset", dataset_to_json(c.dataset)},
                {"recipe", recipe_to_json(c.recipe)},
                {"loss", loss},
                {"stability", stability},
                {"bounds", bounds},
                {"holdout", holdout},
                {"delta", c.delta},
                {"B", c.B},
                {"equivalence",
                 {{"T", c.equivalence.T},
                  {"base", learner_to_json(c.equivalence.base)},
                  {"combiner", learner_to_json(c.equivalence.combiner)},
                  {"probe_points", c.equivalence.probe_points},
                  {"self_test_perturbation", c.equivalence.self_test_perturbation},
                  {"tolerance", c.equivalence.tolerance}}}};
}

json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

void apply_override(json& document, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    if (!document.is_object()) document = json::object();
    // Array elements are addressed by a numeric component, e.g. bounds.0.delta.
    auto step = [&](json& node, const std::string& part) -> json& {
        if (node.is_array()) {
            std::size_t index = 0;
            const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), index);
            if (ec != std::errc{} || end != part.data() + part.size() || index >= node.size())
                throw ConfigError("override path " + key + ": '" + part + "' is not a valid index");
            return node[index];
        }
        if (!node.is_object()) throw ConfigError("override path " + key + " crosses a non-object value");
        return node[part];
    };
    json* node = &document;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key has an empty component: " + key);
        json& child = step(*node, part);
        if (dot == std::string::npos) {
            child = value;
            return;
        }
        if (child.is_null()) child = json::object();
        node = &child;
        start = dot + 1;
    }
}

}  // namespace stackstab::harness
