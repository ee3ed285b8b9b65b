#pragma once

#include <cstdint>
#include <string>

#include "nqreader/common.hpp"

namespace nqreader {

// Which transform the four predictor heads use in place of the default
// tanh dense layer.
enum class PredictionLayerKind { kTanh, kGelu, kTransformer, kRecurrent };

PredictionLayerKind prediction_layer_from_string(const std::string& name);
std::string to_string(PredictionLayerKind kind);

// Model and pipeline hyperparameters. Defaults target desk scale; the
// reference full-scale configuration of this architecture runs h=1024,
// T=2, K=256 at learning rate 2e-5 over a pretrained encoder, reachable
// through the same fields.
struct ModelConfig {
  Index hidden = 64;        // h; 1024 at full scale
  Index blocks = 2;         // reader depth T; 0 removes the reader entirely
  Index top_k = 16;         // K tokens kept by the dynamic attention mask; 256 at full scale
  Index heads = 4;          // attention heads (hidden must divide evenly)
  Index encoder_depth = 1;  // transformer blocks in the toy encoder, 0..2
  Index vocab = 256;
  Index max_len = 600;      // packed sequence budget: window + question + 3 specials
  Index window = 512;
  Index stride = 192;
  Scalar learning_rate = 1e-3;  // 2e-5 at full scale under a pretrained encoder
  Index batch = 8;
  Index epochs = 5;
  long max_steps = 0;  // optimizer-step cap, 0 = run all epochs
  Scalar keep_negative_p = 0.1;
  Index max_span_len = 30;
  std::uint64_t seed = 1;

  // ablation and variant toggles
  bool no_dual_attention = false;
  bool no_question_self_attention = false;
  bool no_paragraph_self_attention = false;
  bool no_paragraph_mask = false;
  bool no_dynamic_mask = false;
  bool no_multilevel = false;
  bool no_cascade = false;
  bool s2l_cascade = false;
  bool no_question_embedding = false;
  PredictionLayerKind prediction_layer = PredictionLayerKind::kTanh;

  // alternative readings of underdetermined details, defaults as implemented
  bool question_embed_post_self_attention = false;
  bool short_answer_cross_span = false;
  bool type_head_softmax = true;

  void validate() const;
};

// Flat JSON object; unknown keys are rejected.
ModelConfig config_from_json(const std::string& json_text);
ModelConfig config_from_file(const std::string& path);
std::string config_to_json(const ModelConfig& config);

}  // namespace nqreader
