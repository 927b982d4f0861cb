#pragma once

#include <filesystem>

#include "json.hpp"

#include "gucci/federated.hpp"
#include "gucci/transitivity.hpp"

namespace gucci {

/// Strict parsers: unknown keys, wrong types and missing required keys throw
/// ConfigError naming the JSON path. A run config requires "data" and
/// "strategy"; everything else has a default.
RunConfig parse_run_config(const nlohmann::json& j);
TransitivityConfig parse_transitivity_config(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
TransitivityConfig load_transitivity_config(const std::filesystem::path& path);

/// Snapshots with every default written out; parse(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json to_json(const TransitivityConfig& cfg);

}  // namespace gucci
