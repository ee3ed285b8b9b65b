#pragma once

#include <ostream>
#include <vector>

#include "nqreader/adam.hpp"
#include "nqreader/data.hpp"
#include "nqreader/model.hpp"

namespace nqreader {

struct StepRecord {
  long step = 0;
  Scalar total = 0.0;
  Scalar long_part = 0.0;
  Scalar start_part = 0.0;
  Scalar end_part = 0.0;
  Scalar type_part = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  long steps = 0;
  std::vector<StepRecord> records;
};

// Windows pages into instances, subsamples negatives, then runs shuffled
// mini-batch Adam for config.epochs epochs (capped by config.max_steps).
// Per-step loss components go to metrics_out as one JSON object per line.
TrainResult train_model(const std::vector<Page>& pages, const ModelConfig& config,
                        ModelParams& params, AdamState& optimizer,
                        std::ostream* metrics_out = nullptr);

}  // namespace nqreader
