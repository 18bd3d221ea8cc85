#include "stackstab/harness/report.hpp"

#include <map>
#include <stdexcept>
#include <vector>

#include "stackstab/core/rng.hpp"

#ifndef STACKSTAB_VERSION
#define STACKSTAB_VERSION "0.0.0"
#endif

namespace stackstab::harness {

using nlohmann::json;

std::string tool_version() { return STACKSTAB_VERSION; }

json make_report(const std::string& command, json config, json results, std::size_t threads, json timings) {
    return json{{"schema", kReportSchema},
                {"tool_version", tool_version()},
                {"rng", std::string(kRngContract)},
                {"command", command},
                {"config", std::move(config)},
                {"results", std::move(results)},
                {"execution", {{"threads", threads}, {"timings", std::move(timings)}}}};
}

namespace {

enum class Type { object, array, string, number, boolean, nullable_number, nullable_object, any };

bool matches(const json& v, Type t) {
    switch (t) {
        case Type::object: return v.is_object();
        case Type::array: return v.is_array();
        case Type::string: return v.is_string();
        case Type::number: return v.is_number();
        case Type::boolean: return v.is_boolean();
        case Type::nullable_number: return v.is_null() || v.is_number();
        case Type::nullable_object: return v.is_null() || v.is_object();
        case Type::any: return true;
    }
    return false;
}

using Fields = std::vector<std::pair<const char*, Type>>;

void require_fields(const json& j, const std::string& path, const Fields& fields) {
    if (!j.is_object()) throw std::runtime_error(path + " must be an object");
    for (const auto& [key, type] : fields) {
        if (!j.contains(key)) throw std::runtime_error(path + "." + key + " is missing");
        if (!matches(j.at(key), type)) throw std::runtime_error(path + "." + key + " has the wrong type");
    }
}

const Fields kBoundFields{{"value", Type::number}, {"formula", Type::string}, {"inputs", Type::object},
                          {"notes", Type::array},  {"q_mode", Type::any},     {"loss", Type::any}};

void check_bounds(const json& list, const std::string& path) {
    if (!list.is_array()) throw std::runtime_error(path + " must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) require_fields(list[i], path + "[" + std::to_string(i) + "]", kBoundFields);
}

void check_stability(const json& s, const std::string& path) {
    require_fields(s, path,
                   {{"m", Type::number},
                    {"trials", Type::number},
                    {"loss", Type::object},
                    {"estimates", Type::array},
                    {"theory", Type::object},
                    {"comparisons", Type::array}});
    for (std::size_t i = 0; i < s["estimates"].size(); ++i) {
        require_fields(s["estimates"][i], path + ".estimates[" + std::to_string(i) + "]",
                       {{"mode", Type::string},
                        {"mean", Type::number},
                        {"std_error", Type::number},
                        {"trials", Type::number},
                        {"policy", Type::object}});
    }
    for (std::size_t i = 0; i < s["comparisons"].size(); ++i) {
        require_fields(s["comparisons"][i], path + ".comparisons[" + std::to_string(i) + "]",
                       {{"estimate", Type::number},
                        {"std_error", Type::number},
                        {"bound", Type::nullable_number},
                        {"status", Type::string},
                        {"slack", Type::nullable_number}});
    }
    require_fields(s["theory"], path + ".theory", {{"bound", Type::nullable_object}, {"status", Type::string}});
}

}  // namespace

void validate_report(const json& report) {
    require_fields(report, "report",
                   {{"schema", Type::string},
                    {"tool_version", Type::string},
                    {"rng", Type::string},
                    {"command", Type::string},
                    {"config", Type::object},
                    {"results", Type::object},
                    {"execution", Type::object}});
    if (report["schema"] != kReportSchema) throw std::runtime_error("report.schema is not " + std::string(kReportSchema));
    require_fields(report["execution"], "report.execution", {{"threads", Type::number}, {"timings", Type::object}});
    require_fields(report["config"], "report.config",
                   {{"seed", Type::number},
                    {"dataset", Type::object},
                    {"recipe", Type::object},
                    {"loss", Type::object},
                    {"stability", Type::object},
                    {"bounds", Type::array},
                    {"holdout", Type::object},
                    {"delta", Type::number},
                    {"B", Type::number},
                    {"equivalence", Type::object}});

    const std::string command = report["command"];
    const json& r = report["results"];
    if (command == "stability") {
        require_fields(r, "report.results", {{"recipe", Type::string}, {"stability", Type::object}});
        check_stability(r["stability"], "report.results.stability");
    } else if (command == "bounds") {
        require_fields(r, "report.results", {{"bounds", Type::array}});
        check_bounds(r["bounds"], "report.results.bounds");
    } else if (command == "equivalence") {
        require_fields(r, "report.results",
                       {{"pass", Type::boolean},
                        {"max_theta_difference", Type::number},
                        {"max_prediction_difference", Type::number},
                        {"theta_stacking", Type::array},
                        {"theta_weighted", Type::array},
                        {"lambda_reg", Type::number},
                        {"tolerance", Type::number},
                        {"probe_points", Type::number}});
    } else if (command == "experiment") {
        require_fields(r, "report.results",
                       {{"recipe", Type::string},
                        {"dataset", Type::object},
                        {"loss", Type::object},
                        {"errors", Type::object},
                        {"stability", Type::nullable_object},
                        {"theory", Type::object},
                        {"gen_bounds", Type::array},
                        {"gen_bounds_skipped", Type::array},
                        {"bounds", Type::array}});
        require_fields(r["errors"], "report.results.errors",
                       {{"empirical", Type::number}, {"loo", Type::number}, {"holdout", Type::nullable_object}});
        if (!r["stability"].is_null()) check_stability(r["stability"], "report.results.stability");
        check_bounds(r["gen_bounds"], "report.results.gen_bounds");
        check_bounds(r["bounds"], "report.results.bounds");
    } else {
        throw std::runtime_error("report.command '" + command + "' is not a report-producing command");
    }
}

}  // namespace stackstab::harness
