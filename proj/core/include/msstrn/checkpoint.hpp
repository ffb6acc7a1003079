#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msstrn/data.hpp"
#include "msstrn/model.hpp"

namespace msstrn {

// Model configuration as a JSON object. Unknown keys are rejected; absent
// keys keep their ModelConfig defaults.
ModelConfig parse_model_config(std::string_view json_text);
std::string dump_model_config(const ModelConfig& config);

struct Checkpoint {
  ModelConfig config;
  ParameterStore parameters;
  std::optional<data::ZScore> normalization;
  std::vector<std::string> node_ids;

  Model model() const { return Model(config, parameters); }
};

// A single JSON document: {"format", "version", "config", "normalization",
// "node_ids", "parameters": {name: {"shape", "values"}}}. Doubles are
// written in shortest round-trip form, so values reload bit-identically.
std::string serialize_checkpoint(const Model& model, const std::optional<data::ZScore>& normalization = std::nullopt,
                                 const std::vector<std::string>& node_ids = {});
Checkpoint deserialize_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::optional<data::ZScore>& normalization = std::nullopt,
                     const std::vector<std::string>& node_ids = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace msstrn
