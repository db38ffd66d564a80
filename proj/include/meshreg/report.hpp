#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "meshreg/registration.hpp"

namespace meshreg {

nlohmann::json to_json(const SolverConfig& cfg);
SolverConfig solver_config_from_json(const nlohmann::json& j);

/// Report as JSON. With include_timing == false the wall_time field is
/// omitted so that two runs of the same job serialise identically.
nlohmann::json to_json(const RegistrationReport& report, bool include_timing = true);
RegistrationReport report_from_json(const nlohmann::json& j);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace meshreg
