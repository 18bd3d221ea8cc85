#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "stackstab/harness/commands.hpp"
#include "stackstab/harness/config.hpp"
#include "stackstab/harness/report.hpp"

using namespace stackstab;
using namespace stackstab::harness;
using nlohmann::json;

namespace {

json small_stability_config() {
    return json::parse(R"({
        "seed": 3,
        "dataset": {"generator": "blobs", "m": 30, "d": 2, "separation": 2},
        "recipe": {"type": "learner", "learner": {"algorithm": "knn", "k": 1}},
        "stability": {"trials": 40}
    })");
}

RunOptions threads(std::size_t n) {
    RunOptions o;
    o.parallelism.threads = n;
    return o;
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys and bad values") {
    CHECK_NOTHROW(parse_config(small_stability_config()));
    CHECK_THROWS_AS(parse_config(json::parse(R"({"sead": 1})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"delta": 1.5})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"delta": 0})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"dataset": {"generator": "blobs", "m": 0}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"recipe": {"type": "learner", "learner": {"algorithm": "svm"}}})")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"recipe": {"type": "learner", "learner": {"algorithm": "knn", "k": 0}}})")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"seed": "one"})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"bounds": [{"kind": "stacking", "bogus": 1}]})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::array()), ConfigError);
}

TEST_CASE("defaults are materialized and the config round-trips") {
    const ExperimentConfig config = parse_config(json::object());
    const json echoed = config_to_json(config);
    CHECK(echoed["delta"] == 0.05);
    CHECK(echoed["stability"]["trials"] == 400);
    CHECK(echoed["equivalence"]["tolerance"] == 1e-9);
    CHECK(echoed["recipe"]["type"] == "learner");
    CHECK(config_to_json(parse_config(echoed)) == echoed);

    const json full = config_to_json(parse_config(json::parse(R"({
        "recipe": {"type": "stacking", "bases": [{"algorithm": "knn", "k": 1}, {"algorithm": "ridge", "lambda": 0.5}],
                   "combiner": {"algorithm": "ridge", "lambda": 0.01}, "sampling": "subsample", "p": 10}
    })")));
    CHECK(config_to_json(parse_config(full)) == full);
}

TEST_CASE("overrides") {
    json doc = small_stability_config();
    apply_override(doc, "stability.trials=7");
    apply_override(doc, "dataset.separation=3.5");
    apply_override(doc, "delta=0.1");
    CHECK(doc["stability"]["trials"] == 7);
    CHECK(doc["dataset"]["separation"] == 3.5);
    const ExperimentConfig config = parse_config(doc);
    CHECK(config.stability.trials == 7);
    CHECK(config.delta == 0.1);
    CHECK_THROWS_AS(apply_override(doc, "no-equals-sign"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "delta.x=1"), ConfigError);

    json with_list = json::parse(R"({"bounds": [{"kind": "inclusion_tail", "T": 3, "s": 1, "q": 0.2}]})");
    apply_override(with_list, "bounds.0.q=0.5");
    CHECK(with_list["bounds"][0]["q"] == 0.5);
    CHECK_THROWS_AS(apply_override(with_list, "bounds.3.q=0.5"), ConfigError);
    CHECK_THROWS_AS(apply_override(with_list, "bounds.x.q=0.5"), ConfigError);
}

TEST_CASE("config files") {
    const auto path = std::filesystem::temp_directory_path() / "stackstab_cfg_test.json";
    {
        std::ofstream(path) << "{\"seed\": 5}";
    }
    CHECK(load_config_file(path)["seed"] == 5);
    {
        std::ofstream(path) << "{not json";
    }
    CHECK_THROWS_AS(load_config_file(path), ConfigError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config_file(path), ConfigError);
}

TEST_CASE("reports carry the schema and validate") {
    const ExperimentConfig config = parse_config(small_stability_config());
    const CommandOutput out = run_stability(config, threads(2));
    const json report = make_report("stability", config_to_json(config), out.results, 2, out.timings);
    CHECK(report["schema"] == kReportSchema);
    CHECK(report["rng"] == "splitmix64-counter/v1");
    CHECK_NOTHROW(validate_report(report));
    json broken = report;
    broken.erase("results");
    CHECK_THROWS(validate_report(broken));
}

TEST_CASE("stability command is reproducible across threads") {
    const ExperimentConfig config = parse_config(small_stability_config());
    const CommandOutput a = run_stability(config, threads(1));
    const CommandOutput b = run_stability(config, threads(8));
    CHECK(a.results == b.results);
    const json& cmp = a.results["stability"]["comparisons"][0];
    CHECK(cmp["bound"] == doctest::Approx(1.0 / 30.0));
    CHECK(cmp["status"] != "not-applicable");
}

TEST_CASE("hypothesis constants are not compared against pointwise estimates") {
    json doc = small_stability_config();
    doc["stability"]["modes"] = json::array({"hypothesis", "pointwise"});
    const CommandOutput out = run_stability(parse_config(doc), threads(2));
    const json& cmp = out.results["stability"]["comparisons"];
    CHECK(cmp[0]["status"] != "not-applicable");
    CHECK(cmp[1]["status"] == "not-applicable");
    CHECK(out.results["stability"]["theory"]["notion"] == "hypothesis");

    doc["recipe"] = json::parse(R"({"type": "learner", "learner": {"algorithm": "constant", "value": 1}})");
    const CommandOutput constant = run_stability(parse_config(doc), threads(2));
    CHECK(constant.results["stability"]["comparisons"][1]["status"] == "satisfied");
    CHECK(constant.results["stability"]["theory"]["notion"] == "all");
}

TEST_CASE("recipes without a theoretical constant are not applicable") {
    json doc = small_stability_config();
    doc["recipe"] = json::parse(R"({"type": "stacking", "bases": [{"algorithm": "stump"}, {"algorithm": "knn", "k": 1}]})");
    const CommandOutput out = run_stability(parse_config(doc), threads(2));
    CHECK(out.results["stability"]["comparisons"][0]["status"] == "not-applicable");
    CHECK(out.results["stability"]["theory"]["status"] == "unknown");
}

TEST_CASE("a constant learner has zero estimated stability") {
    json doc = small_stability_config();
    doc["dataset"] = json::parse(R"({"generator": "linear", "m": 20, "d": 2, "noise_std": 0.5})");
    doc["recipe"] = json::parse(R"({"type": "learner", "learner": {"algorithm": "constant", "value": 0.5}})");
    const CommandOutput out = run_stability(parse_config(doc), threads(2));
    CHECK(out.results["stability"]["estimates"][0]["mean"] == 0.0);
    CHECK(out.results["stability"]["comparisons"][0]["status"] == "satisfied");
}

TEST_CASE("bounds command") {
    const ExperimentConfig config = parse_config(json::parse(R"({"bounds": [
        {"kind": "stacking", "combiner_beta": 0.05, "base_betas": [0.1, 0.2, 0.3]},
        {"kind": "dag_stacking", "combiner_beta": 0.05, "base_betas": [0.1, 0.2, 0.3], "T": 3, "p": 2, "m": 10},
        {"kind": "gen", "variant": "hypothesis", "observed_error": 0.1, "beta": 0.01, "M": 1, "m": 100, "delta": 0.05, "label": "worked"}
    ]})"));
    const CommandOutput out = run_bounds(config, threads(1));
    const json& list = out.results["bounds"];
    REQUIRE(list.size() == 3);
    CHECK(list[0]["value"] == doctest::Approx(3.0e-4));
    CHECK(list[1]["value"] == doctest::Approx(3.12e-5));
    CHECK(list[1]["q_mode"] == "paper-example");
    CHECK(list[2]["value"] == doctest::Approx(0.93666).epsilon(1e-5));
    CHECK(list[2]["label"] == "worked");

    const ExperimentConfig bad = parse_config(json::parse(
        R"({"bounds": [{"kind": "gen", "variant": "hypothesis", "observed_error": 0.1, "beta": 0.01, "M": 1, "m": 100, "delta": 1.5}]})"));
    CHECK_THROWS_AS(run_bounds(bad, threads(1)), ConfigError);
}

TEST_CASE("equivalence command") {
    json doc = json::parse(R"({"seed": 4, "dataset": {"generator": "linear", "m": 40, "d": 3, "noise_std": 0.3}})");
    const CommandOutput ok = run_equivalence(parse_config(doc), threads(4));
    CHECK(ok.results["pass"] == true);
    CHECK(ok.results["max_prediction_difference"].get<double>() <= 1e-9);

    doc["equivalence"] = json::parse(R"({"self_test_perturbation": 1e-6})");
    CHECK(run_equivalence(parse_config(doc), threads(1)).results["pass"] == false);

    doc["equivalence"] = json::parse(R"({"combiner": {"algorithm": "knn", "k": 3}})");
    CHECK_THROWS_AS(run_equivalence(parse_config(doc), threads(1)), ConfigError);
    doc["equivalence"] = json::parse(R"({"combiner": {"algorithm": "ridge", "lambda": 0.01, "intercept": true}})");
    CHECK_THROWS_AS(run_equivalence(parse_config(doc), threads(1)), ConfigError);

    json binary = json::parse(R"({"seed": 4, "dataset": {"generator": "blobs", "m": 40, "d": 2},
        "equivalence": {"base": {"algorithm": "knn", "k": 3}, "combiner": {"algorithm": "logistic", "intercept": false}}})");
    CHECK(run_equivalence(parse_config(binary), threads(2)).results["pass"] == true);
}

TEST_CASE("experiment command") {
    json doc = json::parse(R"({
        "seed": 1,
        "dataset": {"generator": "blobs", "m": 40, "d": 2, "separation": 2},
        "recipe": {"type": "subbagging", "base": {"algorithm": "knn", "k": 1}, "T": 9, "p": 8},
        "stability": {"trials": 30},
        "holdout": {"m": 200}
    })");
    const ExperimentConfig config = parse_config(doc);
    const CommandOutput a = run_experiment(config, threads(1));
    const CommandOutput b = run_experiment(config, threads(6));
    CHECK(a.results == b.results);
    const json& errors = a.results["errors"];
    CHECK(errors["empirical"].get<double>() >= 0.0);
    CHECK(errors["holdout"]["n"] == 200);
    CHECK(a.results["theory"]["bound"]["value"] == doctest::Approx(2.0 * (1.0 / 8.0) * 8.0 / 40.0));
    bool has_subbagging = false;
    for (const auto& g : a.results["gen_bounds"]) {
        CHECK(g["value"].get<double>() >= 0.0);
        if (g["kind"] == "subbagging_loo") has_subbagging = true;
    }
    CHECK(has_subbagging);
    std::set<std::string> skipped;
    for (const auto& g : a.results["gen_bounds_skipped"]) skipped.insert(g["kind"].get<std::string>());
    CHECK(skipped == std::set<std::string>{"pointwise", "uniform", "subbagging_emp"});
    const json report = make_report("experiment", config_to_json(config), a.results, 1, a.timings);
    CHECK_NOTHROW(validate_report(report));
}

TEST_CASE("CSV datasets feed the experiment command") {
    const auto path = std::filesystem::temp_directory_path() / "stackstab_harness_data.csv";
    {
        std::ofstream f(path);
        f << "a,b,label\n";
        for (int i = 0; i < 12; ++i) f << i << "," << (i % 3) << "," << (i < 6 ? "no" : "yes") << "\n";
    }
    json doc{{"dataset", {{"source", "csv"}, {"path", path.string()}, {"task", "binary"}}},
             {"recipe", json::parse(R"({"type": "learner", "learner": {"algorithm": "knn", "k": 1}})")}};
    const CommandOutput out = run_experiment(parse_config(doc), threads(2));
    CHECK(out.results["dataset"]["m"] == 12);
    CHECK(out.results["stability"].is_null());
    CHECK_THROWS_AS(run_stability(parse_config(doc), threads(1)), ConfigError);
    std::filesystem::remove(path);
}
