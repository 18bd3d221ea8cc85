#pragma once

#include <string>

#include <json.hpp>

namespace stackstab::harness {

inline constexpr const char* kReportSchema = "stackstab.report/v1";

std::string tool_version();

/// {"schema", "tool_version", "rng", "command", "config", "results", "execution"}.
nlohmann::json make_report(const std::string& command, nlohmann::json config, nlohmann::json results,
                           std::size_t threads, nlohmann::json timings);

/// Throws std::runtime_error naming the first missing or mistyped field.
void validate_report(const nlohmann::json& report);

}  // namespace stackstab::harness
