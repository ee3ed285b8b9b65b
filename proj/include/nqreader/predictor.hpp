#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nqreader/attention.hpp"
#include "nqreader/config.hpp"
#include "nqreader/labels.hpp"
#include "nqreader/reader.hpp"

namespace nqreader {

struct DenseHead {
  Tensor w, b;
  Activation act = Activation::kTanh;
};

struct TransformerHead {
  Tensor proj_w, proj_b;  // input width -> h
  TransformerBlockParams block;
};

struct LstmCell {
  Tensor w;  // (in + hidden) x 4*hidden, gate order [input, forget, cell, output]
  Tensor b;  // 1 x 4*hidden
  Index hidden = 0;
};

struct RecurrentHead {
  LstmCell forward_cell;
  LstmCell backward_cell;  // each h/2 wide; outputs concatenate back to h
};

// One prediction-head transform (rows x in -> rows x h), selected by the
// prediction_layer config.
struct HeadLayer {
  std::variant<DenseHead, TransformerHead, RecurrentHead> layer;

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor>>& out) const;
};

HeadLayer head_init(Index input_width, Index hidden, PredictionLayerKind kind, Rng& rng);
Tensor apply_head(const HeadLayer& head, const Tensor& x, Index heads);

// Cascaded answer heads: long -> short start -> short end -> answer type.
struct PredictorParams {
  std::optional<HeadLayer> f_long;  // absent when the long head is ablated away
  Tensor w_long;                    // h x 1
  HeadLayer f_start;
  Tensor w_start;  // h x 1
  HeadLayer f_end;
  Tensor w_end;  // h x 1
  HeadLayer f_type;
  Tensor w_type;  // h x 5

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor>>& out) const;
};

PredictorParams predictor_init(const ModelConfig& config, Rng& rng);

struct PredictorOutput {
  Tensor long_logits;  // 1 x (l+1); slot l is the fixed-zero null logit; undefined if no long head
  Tensor start_logits;  // 1 x m
  Tensor end_logits;    // 1 x m
  Tensor type_output;   // 1 x 5 probabilities (logits when type_head_softmax=false)
  Tensor long_repr;     // l x h
  Tensor start_repr;    // m x h
  Tensor end_repr;      // m x h
};

// H_L and the long-answer logits with the appended fixed-zero null slot.
std::pair<Tensor, Tensor> predict_long(const Tensor& paragraphs, const HeadLayer& f_long,
                                       const Tensor& w_long, Index heads);

// Repeats each paragraph's row once per token of that paragraph.
Tensor tile_by_paragraph(const Tensor& long_repr, const ParagraphMap& seg);

struct ShortPrediction {
  Tensor start_repr, start_logits, end_repr, end_logits;
};

// Start head reads [tiled_long ; document]; its representation is re-used by
// the end head as [start_repr ; document].
ShortPrediction predict_short(const Tensor& tiled_long, const Tensor& document,
                              const HeadLayer& f_start, const Tensor& w_start,
                              const HeadLayer& f_end, const Tensor& w_end, Index heads);

// Type distribution from [mean(document) ; question ; max(end_repr)], with the
// question/end parts dropped under the matching ablations (undefined inputs).
Tensor predict_type(const Tensor& document, const Tensor& question_embed, const Tensor& end_repr,
                    const HeadLayer& f_type, const Tensor& w_type, const ModelConfig& config);

PredictorOutput run_predictor(const ReaderOutput& reader, const ParagraphMap& seg,
                              const PredictorParams& params, const ModelConfig& config);

struct LossTerms {
  Tensor total;
  Tensor long_term;  // undefined when the long head is ablated
  Tensor start_term;
  Tensor end_term;
  Tensor type_term;
};

// Sum of the four cross-entropy losses. NULL instances target the fixed null
// slot for the long head and position 0 for the span heads.
LossTerms total_loss(const PredictorOutput& out, const TargetLabels& targets,
                     const ModelConfig& config);

}  // namespace nqreader
