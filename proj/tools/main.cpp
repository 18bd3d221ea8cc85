#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stackstab/core/csv.hpp"
#include "stackstab/core/synthetic.hpp"
#include "stackstab/ensembles/serialization.hpp"
#include "stackstab/harness/commands.hpp"
#include "stackstab/harness/config.hpp"
#include "stackstab/harness/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stackstab;
using namespace stackstab::harness;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t threads = 1;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config,-c", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Master seed (overrides the config)");
    cmd->add_option("--out,-o", o.out, "Output file (default: stdout)");
    cmd->add_option("--threads", o.threads, "Worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--set", o.overrides, "Override a config key: dotted.path=value")->take_all();
}

json read_document(const CommonOptions& o) {
    json doc = o.config_path.empty() ? json::object() : load_config_file(o.config_path);
    for (const auto& assignment : o.overrides) apply_override(doc, assignment);
    if (o.seed) doc["seed"] = *o.seed;
    return doc;
}

void write_output(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream file(out);
    if (!file) throw std::runtime_error("cannot write " + out);
    file << text;
    if (!file) throw std::runtime_error("failed writing " + out);
}

int run_report(const std::string& command, const CommonOptions& o, const std::string& save_model) {
    const json document = read_document(o);
    const ExperimentConfig config = parse_config(document);

    RunOptions options;
    options.parallelism.threads = o.threads;
    if (!save_model.empty()) options.save_model = save_model;

    CommandOutput output;
    if (command == "stability") output = run_stability(config, options);
    else if (command == "bounds") output = run_bounds(config, options);
    else if (command == "equivalence") output = run_equivalence(config, options);
    else output = run_experiment(config, options);

    const json report = make_report(command, config_to_json(config), output.results, o.threads, output.timings);
    validate_report(report);
    write_output(o.out, report.dump(2) + "\n");
    std::cerr << output.summary;
    return 0;
}

int run_gen_data(const CommonOptions& o, const std::string& generator, const std::optional<std::size_t>& m,
                 const std::optional<std::size_t>& d, const std::optional<double>& sep,
                 const std::optional<double>& noise) {
    json document = read_document(o);
    json& dataset = document["dataset"];
    if (dataset.is_null()) dataset = json::object();
    if (!generator.empty()) dataset["generator"] = generator;
    if (m) dataset["m"] = *m;
    if (d) dataset["d"] = *d;
    if (sep) dataset["separation"] = *sep;
    if (noise) dataset["noise_std"] = *noise;
    const ExperimentConfig config = parse_config(document);
    const auto* spec = std::get_if<SyntheticSpec>(&config.dataset);
    if (!spec) throw ConfigError("gen-data needs a synthetic dataset");

    const Dataset data = gen_synthetic(*spec, Seed{config.seed});
    if (o.out.empty() || o.out == "-") {
        write_csv(std::cout, data);
    } else {
        write_csv(fs::path(o.out), data);
        std::cout << o.out << "\n";
    }
    return 0;
}

int run_predict(const std::string& model_path, const std::string& csv_path, const std::string& label_column,
                const std::string& out) {
    std::ifstream in(model_path);
    if (!in) throw std::runtime_error("cannot open model " + model_path);
    const FittedModel model = fitted_from_json(json::parse(in));
    const Task task = std::visit([](const auto& mm) { return mm.task(); }, model.model());
    const Dataset data = load_csv(csv_path, label_column, task);
    std::string text = "prediction\n";
    for (const auto& z : data.examples()) text += format_double(model.predict(z.x)) + "\n";
    write_output(out, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stability of stacked ensembles: data generation, estimators, bounds and reports"};
    app.set_version_flag("--version", std::string("stackstab ") + tool_version());
    app.require_subcommand(1);

    CommonOptions common;

    auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
    add_common(gen, common);
    std::string generator;
    std::optional<std::size_t> gen_m, gen_d;
    std::optional<double> gen_sep, gen_noise;
    gen->add_option("generator", generator, "blobs or linear")->check(CLI::IsMember({"blobs", "linear"}));
    gen->add_option("--m", gen_m, "Number of examples")->check(CLI::PositiveNumber);
    gen->add_option("--d", gen_d, "Feature dimension")->check(CLI::PositiveNumber);
    gen->add_option("--sep", gen_sep, "Blob separation");
    gen->add_option("--noise", gen_noise, "Linear generator noise std");

    std::string save_model;
    std::vector<std::pair<std::string, CLI::App*>> reports;
    for (const char* name : {"stability", "bounds", "equivalence", "experiment"}) {
        const char* help = std::string(name) == "stability"     ? "Monte-Carlo stability estimates"
                           : std::string(name) == "bounds"      ? "Evaluate stability and generalization bounds"
                           : std::string(name) == "equivalence" ? "Check weighted bagging against bag-stacking"
                                                                : "Train, evaluate, estimate stability and bounds";
        auto* cmd = app.add_subcommand(name, help);
        add_common(cmd, common);
        if (std::string(name) == "experiment") cmd->add_option("--save-model", save_model, "Write the trained model");
        reports.emplace_back(name, cmd);
    }

    auto* predict = app.add_subcommand("predict", "Apply a saved model to a CSV file");
    std::string model_path, csv_path, label_column = "label", predict_out;
    predict->add_option("--model", model_path, "Model JSON from experiment --save-model")->required();
    predict->add_option("--data", csv_path, "CSV file")->required();
    predict->add_option("--label-column", label_column, "Label column name");
    predict->add_option("--out,-o", predict_out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (*gen) return run_gen_data(common, generator, gen_m, gen_d, gen_sep, gen_noise);
        if (*predict) return run_predict(model_path, csv_path, label_column, predict_out);
        for (const auto& [name, cmd] : reports) {
            if (*cmd) return run_report(name, common, save_model);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kUsageError;
}
