#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nqreader/config.hpp"
#include "nqreader/data.hpp"
#include "nqreader/encoder.hpp"
#include "nqreader/inference.hpp"
#include "nqreader/predictor.hpp"
#include "nqreader/reader.hpp"

namespace nqreader {

struct ModelParams {
  EncoderParams encoder;
  std::vector<ReaderBlockParams> blocks;
  PredictorParams predictor;
};

ModelParams model_init(const ModelConfig& config, Rng& rng);

// Stable enumeration order; checkpoints, the optimizer, and the gradient
// checker all key off it.
std::vector<std::pair<std::string, Tensor>> named_parameters(const ModelParams& params);
std::vector<Tensor> parameters(const ModelParams& params);
void reset_gradients(const ModelParams& params);

struct ModelOutput {
  ReaderOutput reader;
  PredictorOutput predictor;
};

// Full pipeline for one instance: pack, encode, read, predict.
ModelOutput model_forward(const ModelParams& params, const ModelConfig& config,
                          const InstanceTuple& instance);

// Loss of one instance including target validation.
LossTerms model_loss(const ModelParams& params, const ModelConfig& config,
                     const InstanceTuple& instance);

// Detached per-span values for page-level answer selection.
SpanPrediction span_prediction(const ModelParams& params, const ModelConfig& config,
                               const InstanceTuple& instance);

}  // namespace nqreader
