#pragma once

#include <vector>

#include "nqreader/attention.hpp"
#include "nqreader/config.hpp"

namespace nqreader {

inline constexpr TokenId kClsId = 0;
inline constexpr TokenId kSepId = 1;

// One packed input: [CLS] question [SEP] document [SEP].
struct PackedSequence {
  std::vector<TokenId> ids;
  Index question_begin = 0, question_end = 0;  // [begin, end)
  Index document_begin = 0, document_end = 0;
  TokenId cls_id = kClsId;
  TokenId sep_id = kSepId;

  Index size() const { return static_cast<Index>(ids.size()); }
};

PackedSequence pack_sequence(const std::vector<TokenId>& question,
                             const std::vector<TokenId>& document, Index max_len);

// Trainable stand-in for a pre-trained language model: token + position +
// segment embeddings followed by a small transformer stack. A real LM could
// be slotted in behind encode()'s signature.
struct EncoderParams {
  Tensor token_table;     // vocab x h
  Tensor position_table;  // max_len x h
  Tensor segment_table;   // 2 x h
  std::vector<TransformerBlockParams> blocks;

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor>>& out) const;
};

EncoderParams encoder_init(const ModelConfig& config, Rng& rng);

struct EncoderOutput {
  Tensor question;  // n x h
  Tensor document;  // m x h
};

// Pure function of (sequence, params); CLS and SEP rows are dropped since
// nothing downstream consumes them.
EncoderOutput encode(const PackedSequence& sequence, const EncoderParams& params, Index heads);

}  // namespace nqreader
