// Checkpoint container: magic "GAMC", u32 format version, length-prefixed
// JSON config, then one record per parameter (length-prefixed name, u32
// rank, u32 dims, raw float32 little-endian data). Tied tensors are stored
// once, under the token-embedding name.
#pragma once

#include "gamlab/model.hpp"

#include <string>

namespace gamlab {

void save_checkpoint(const std::string& path, LmModel<float>& model);
LmModel<float> load_checkpoint(const std::string& path);

// Config JSON <-> struct (shared with the run-config file and the manifest).
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

} // namespace gamlab
