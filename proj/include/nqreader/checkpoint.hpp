#pragma once

#include <optional>
#include <string>

#include "nqreader/adam.hpp"
#include "nqreader/model.hpp"

namespace nqreader {

// Versioned binary container: config JSON, named f64 tensors with shape
// headers, optional optimizer state. All integers and doubles little-endian.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::optional<AdamState> optimizer;
};

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params, const AdamState* optimizer = nullptr);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace nqreader
