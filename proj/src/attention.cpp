#include "nqreader/attention.hpp"

#include <cmath>

namespace nqreader {

namespace {

Tensor xavier(Index in, Index out, Rng& rng) {
  Scalar stddev = std::sqrt(2.0 / static_cast<Scalar>(in + out));
  return Tensor::leaf(rng.normal_matrix(in, out, stddev), true);
}

}  // namespace

void AttentionParams::collect(const std::string& prefix,
                              std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back(prefix + ".w_query", w_query);
  out.emplace_back(prefix + ".b_query", b_query);
  out.emplace_back(prefix + ".w_key", w_key);
  out.emplace_back(prefix + ".b_key", b_key);
  out.emplace_back(prefix + ".w_value", w_value);
  out.emplace_back(prefix + ".b_value", b_value);
  out.emplace_back(prefix + ".w_out", w_out);
  out.emplace_back(prefix + ".b_out", b_out);
}

void TransformerBlockParams::collect(const std::string& prefix,
                                     std::vector<std::pair<std::string, Tensor>>& out) const {
  attention.collect(prefix + ".attn", out);
  out.emplace_back(prefix + ".ln_attn_gain", ln_attn_gain);
  out.emplace_back(prefix + ".ln_attn_bias", ln_attn_bias);
  out.emplace_back(prefix + ".ff_w1", ff_w1);
  out.emplace_back(prefix + ".ff_b1", ff_b1);
  out.emplace_back(prefix + ".ff_w2", ff_w2);
  out.emplace_back(prefix + ".ff_b2", ff_b2);
  out.emplace_back(prefix + ".ln_ff_gain", ln_ff_gain);
  out.emplace_back(prefix + ".ln_ff_bias", ln_ff_bias);
}

AttentionParams attention_init(Index hidden, Rng& rng) {
  AttentionParams p;
  p.w_query = xavier(hidden, hidden, rng);
  p.b_query = Tensor::zeros(1, hidden, true);
  p.w_key = xavier(hidden, hidden, rng);
  p.b_key = Tensor::zeros(1, hidden, true);
  p.w_value = xavier(hidden, hidden, rng);
  p.b_value = Tensor::zeros(1, hidden, true);
  p.w_out = xavier(hidden, hidden, rng);
  p.b_out = Tensor::zeros(1, hidden, true);
  return p;
}

TransformerBlockParams transformer_block_init(Index hidden, Rng& rng) {
  TransformerBlockParams p;
  p.attention = attention_init(hidden, rng);
  p.ln_attn_gain = Tensor::leaf(Matrix::Ones(1, hidden), true);
  p.ln_attn_bias = Tensor::zeros(1, hidden, true);
  const Index ff = hidden * kFeedForwardMult;
  p.ff_w1 = xavier(hidden, ff, rng);
  p.ff_b1 = Tensor::zeros(1, ff, true);
  p.ff_w2 = xavier(ff, hidden, rng);
  p.ff_b2 = Tensor::zeros(1, hidden, true);
  p.ln_ff_gain = Tensor::leaf(Matrix::Ones(1, hidden), true);
  p.ln_ff_bias = Tensor::zeros(1, hidden, true);
  return p;
}

AttentionResult multi_head_attention(const Tensor& x, const AttentionParams& params, Index heads,
                                     const std::vector<AdditiveMask>& masks) {
  const Index hidden = x.cols();
  if (hidden % heads != 0)
    throw ConfigError("attention: hidden " + std::to_string(hidden) +
                      " not divisible by head count " + std::to_string(heads));
  const Index head_dim = hidden / heads;
  const Scalar scaling = 1.0 / std::sqrt(static_cast<Scalar>(head_dim));

  Tensor queries = dense(x, params.w_query, params.b_query, Activation::kLinear);
  Tensor keys = dense(x, params.w_key, params.b_key, Activation::kLinear);
  Tensor values = dense(x, params.w_value, params.b_value, Activation::kLinear);

  AttentionResult result;
  Tensor context;
  for (Index head = 0; head < heads; ++head) {
    Tensor q = slice_cols(queries, head * head_dim, head_dim);
    Tensor k = slice_cols(keys, head * head_dim, head_dim);
    Tensor v = slice_cols(values, head * head_dim, head_dim);
    Tensor scores = scale(matmul(q, transpose(k)), scaling);
    Tensor weights = masked_softmax(scores, masks);
    result.weights.push_back(weights);
    Tensor head_context = matmul(weights, v);
    context = head == 0 ? head_context : concat_cols(context, head_context);
  }
  result.output = dense(context, params.w_out, params.b_out, Activation::kLinear);
  return result;
}

TransformerResult transformer_block(const Tensor& x, const TransformerBlockParams& params,
                                    Index heads, const std::vector<AdditiveMask>& masks,
                                    const Tensor& attention_extra) {
  AttentionResult attn = multi_head_attention(x, params.attention, heads, masks);
  Tensor attn_out = attn.output;
  if (attention_extra.defined()) attn_out = add(attn_out, attention_extra);
  Tensor normed =
      layer_norm(add(x, attn_out), params.ln_attn_gain, params.ln_attn_bias, kLayerNormEps);
  Tensor ff = dense(dense(normed, params.ff_w1, params.ff_b1, Activation::kGelu), params.ff_w2,
                    params.ff_b2, Activation::kLinear);
  Tensor out = layer_norm(add(normed, ff), params.ln_ff_gain, params.ln_ff_bias, kLayerNormEps);
  return {out, std::move(attn.weights)};
}

}  // namespace nqreader
