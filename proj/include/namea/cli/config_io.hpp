#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "namea/config.hpp"

namespace namea::cli {

/// Missing keys keep their defaults; unknown keys and ill-typed or
/// out-of-range values throw ConfigError naming the key. The result is
/// validated.
AttackConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const AttackConfig& cfg);

/// JSON file; an empty file yields the defaults.
AttackConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const AttackConfig& cfg);

/// 8 hex digits of FNV-1a over the canonical JSON of the config.
std::string config_hash(const AttackConfig& cfg);

}  // namespace namea::cli
