#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "idseq/trainer.hpp"
#include "json.hpp"

namespace idseq {

// JSON forms of the configuration structs. Readers reject unknown keys so a
// misspelled option fails loudly instead of silently using a default.

nlohmann::ordered_json to_json(const DetectorConfig& cfg);
DetectorConfig detector_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults. Validates the result.
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const CheckpointMeta& meta);
CheckpointMeta checkpoint_meta_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads an optional JSON file, applies overrides, parses.
TrainConfig load_train_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {});

}  // namespace idseq
