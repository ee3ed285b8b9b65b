#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nqreader/tensor.hpp"

namespace nqreader {

inline constexpr Index kFeedForwardMult = 4;
inline constexpr Scalar kLayerNormEps = 1e-5;

struct AttentionParams {
  Tensor w_query, b_query;
  Tensor w_key, b_key;
  Tensor w_value, b_value;
  Tensor w_out, b_out;

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor>>& out) const;
};

// Post-norm transformer block: attention and feed-forward sub-layers, each
// inside residual + layer norm.
struct TransformerBlockParams {
  AttentionParams attention;
  Tensor ln_attn_gain, ln_attn_bias;
  Tensor ff_w1, ff_b1;
  Tensor ff_w2, ff_b2;
  Tensor ln_ff_gain, ln_ff_bias;

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor>>& out) const;
};

AttentionParams attention_init(Index hidden, Rng& rng);
TransformerBlockParams transformer_block_init(Index hidden, Rng& rng);

struct AttentionResult {
  Tensor output;                // rows x hidden
  std::vector<Tensor> weights;  // one rows x rows attention matrix per head
};

// Scaled dot-product self-attention over rows of x. Additive masks apply to
// every head; per-head scaling is 1/sqrt(hidden/heads).
AttentionResult multi_head_attention(const Tensor& x, const AttentionParams& params, Index heads,
                                     const std::vector<AdditiveMask>& masks);

struct TransformerResult {
  Tensor output;
  std::vector<Tensor> attention_weights;
};

// attention_extra, when defined, is added to the attention sub-layer output
// before the residual connection (used for the token-score re-injection).
TransformerResult transformer_block(const Tensor& x, const TransformerBlockParams& params,
                                    Index heads, const std::vector<AdditiveMask>& masks = {},
                                    const Tensor& attention_extra = Tensor());

}  // namespace nqreader
