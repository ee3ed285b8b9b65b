#include "nqreader/reader.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nqreader {

namespace {

Tensor xavier(Index in, Index out, Rng& rng) {
  Scalar stddev = std::sqrt(2.0 / static_cast<Scalar>(in + out));
  return Tensor::leaf(rng.normal_matrix(in, out, stddev), true);
}

}  // namespace

void DualAttentionParams::collect(const std::string& prefix,
                                  std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back(prefix + ".w_document", w_document);
  out.emplace_back(prefix + ".w_question", w_question);
  out.emplace_back(prefix + ".ln_document_gain", ln_document_gain);
  out.emplace_back(prefix + ".ln_document_bias", ln_document_bias);
  out.emplace_back(prefix + ".ln_question_gain", ln_question_gain);
  out.emplace_back(prefix + ".ln_question_bias", ln_question_bias);
}

void ReaderBlockParams::collect(const std::string& prefix,
                                std::vector<std::pair<std::string, Tensor>>& out) const {
  dual.collect(prefix + ".dual", out);
  question_block.collect(prefix + ".question", out);
  paragraph_block.collect(prefix + ".paragraph", out);
  out.emplace_back(prefix + ".scorer_w", scorer_w);
  out.emplace_back(prefix + ".scorer_b", scorer_b);
  out.emplace_back(prefix + ".score_proj", score_proj);
}

ReaderBlockParams reader_block_init(Index hidden, Rng& rng) {
  ReaderBlockParams p;
  p.dual.w_document = xavier(2 * hidden, hidden, rng);
  p.dual.w_question = xavier(2 * hidden, hidden, rng);
  p.dual.ln_document_gain = Tensor::leaf(Matrix::Ones(1, hidden), true);
  p.dual.ln_document_bias = Tensor::zeros(1, hidden, true);
  p.dual.ln_question_gain = Tensor::leaf(Matrix::Ones(1, hidden), true);
  p.dual.ln_question_bias = Tensor::zeros(1, hidden, true);
  p.question_block = transformer_block_init(hidden, rng);
  p.paragraph_block = transformer_block_init(hidden, rng);
  p.scorer_w = xavier(hidden, 1, rng);
  p.scorer_b = Tensor::zeros(1, 1, true);
  p.score_proj = xavier(1, hidden, rng);
  return p;
}

DualAttentionResult dual_attention(const Tensor& question_prev, const Tensor& document_prev,
                                   const DualAttentionParams& params) {
  if (question_prev.cols() != document_prev.cols())
    throw ShapeError("dual_attention: hidden sizes differ, " +
                     shape_str(question_prev.rows(), question_prev.cols()) + " vs " +
                     shape_str(document_prev.rows(), document_prev.cols()));

  DualAttentionResult result;
  DualAttentionTrace& trace = result.trace;

  // similarity between every document and question token
  trace.similarity = matmul(document_prev, transpose(question_prev));  // m x n

  // per question token, a distribution over the m document tokens
  trace.attn_over_document = transpose(softmax_rows(transpose(trace.similarity)));  // m x n
  // per document token, a distribution over the n question tokens
  trace.attn_over_question = transpose(softmax_rows(trace.similarity));  // n x m

  trace.question_summary =
      transpose(matmul(transpose(document_prev), trace.attn_over_document));  // n x h
  trace.document_cat = matmul(transpose(trace.attn_over_question),
                              concat_cols(question_prev, trace.question_summary));  // m x 2h
  trace.document_summary =
      transpose(matmul(transpose(question_prev), trace.attn_over_question));  // m x h
  trace.question_cat = matmul(transpose(trace.attn_over_document),
                              concat_cols(document_prev, trace.document_summary));  // n x 2h

  result.document = layer_norm(
      add(document_prev, matmul(trace.document_cat, params.w_document)),
      params.ln_document_gain, params.ln_document_bias, kLayerNormEps);
  result.question = layer_norm(
      add(question_prev, matmul(trace.question_cat, params.w_question)),
      params.ln_question_gain, params.ln_question_bias, kLayerNormEps);
  return result;
}

Tensor question_self_attention(const Tensor& question, const TransformerBlockParams& params,
                               Index heads, std::vector<Tensor>* attention_weights) {
  TransformerResult res = transformer_block(question, params, heads);
  if (attention_weights) *attention_weights = std::move(res.attention_weights);
  return res.output;
}

AdditiveMask paragraph_mask(const ParagraphMap& seg) {
  const Index m = seg.size();
  AdditiveMask mask(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j)
      if (seg[i] != seg[j]) mask.block(i, j);
  return mask;
}

Tensor score_tokens(const Tensor& document, const Tensor& scorer_w, const Tensor& scorer_b) {
  return dense(document, scorer_w, scorer_b, Activation::kSigmoid);
}

TopKSelection dynamic_mask(const Tensor& scores, Index top_k) {
  if (top_k < 1) throw ConfigError("dynamic_mask: top_k must be >= 1");
  if (scores.cols() != 1)
    throw ShapeError("dynamic_mask: scores must be m x 1, got " +
                     shape_str(scores.rows(), scores.cols()));
  const Index m = scores.rows();
  const Index keep = std::min(top_k, m);

  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return scores.value()(a, 0) > scores.value()(b, 0);
  });
  std::vector<Index> selected(order.begin(), order.begin() + keep);
  std::sort(selected.begin(), selected.end());

  std::vector<bool> in_set(static_cast<std::size_t>(m), false);
  for (Index i : selected) in_set[static_cast<std::size_t>(i)] = true;
  AdditiveMask mask(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j)
      if (!in_set[static_cast<std::size_t>(i)] || !in_set[static_cast<std::size_t>(j)])
        mask.block(i, j);
  return {std::move(mask), std::move(selected)};
}

ParagraphAttentionResult paragraph_dynamic_self_attention(const Tensor& document,
                                                          const ParagraphMap& seg,
                                                          const ReaderBlockParams& params,
                                                          const ModelConfig& config) {
  if (seg.size() != document.rows())
    throw ShapeError("paragraph attention: map length " + std::to_string(seg.size()) +
                     " vs document rows " + std::to_string(document.rows()));

  ParagraphAttentionResult result;
  result.token_scores = score_tokens(document, params.scorer_w, params.scorer_b);

  std::vector<AdditiveMask> masks;
  if (!config.no_dynamic_mask) {
    TopKSelection selection = dynamic_mask(result.token_scores, config.top_k);
    result.selected = std::move(selection.selected);
    masks.push_back(std::move(selection.mask));
  } else {
    result.selected.resize(static_cast<std::size_t>(document.rows()));
    std::iota(result.selected.begin(), result.selected.end(), Index{0});
  }
  if (!config.no_paragraph_mask) masks.push_back(paragraph_mask(seg));

  // unselected tokens have fully masked rows, so their attention output is the
  // zero padding required here; the score re-injection keeps their scorer
  // gradient alive
  Tensor reinject = matmul(result.token_scores, params.score_proj);  // m x h
  TransformerResult block =
      transformer_block(document, params.paragraph_block, config.heads, masks, reinject);
  result.output = block.output;
  result.attention_weights = std::move(block.attention_weights);
  return result;
}

ReaderOutput run_reader(const Tensor& question0, const Tensor& document0, const ParagraphMap& seg,
                        const std::vector<ReaderBlockParams>& blocks, const ModelConfig& config) {
  ReaderOutput out;
  Tensor question = question0;
  Tensor document = document0;
  Tensor question_context = question0;  // dual-attention output of the latest block

  for (const ReaderBlockParams& block : blocks) {
    ReaderBlockTrace trace;
    Tensor question_c = question;
    Tensor document_c = document;
    if (!config.no_dual_attention) {
      DualAttentionResult dual = dual_attention(question, document, block.dual);
      question_c = dual.question;
      document_c = dual.document;
      trace.dual = std::move(dual.trace);
    }
    question_context = question_c;

    question = config.no_question_self_attention
                   ? question_c
                   : question_self_attention(question_c, block.question_block, config.heads,
                                             &trace.question_attention);

    if (config.no_paragraph_self_attention) {
      document = document_c;
    } else {
      ParagraphAttentionResult para =
          paragraph_dynamic_self_attention(document_c, seg, block, config);
      document = para.output;
      trace.paragraph_attention = std::move(para.attention_weights);
      trace.token_scores = para.token_scores;
      trace.selected = std::move(para.selected);
    }
    out.blocks.push_back(std::move(trace));
  }

  out.document = document;
  out.paragraphs = segment_mean_pool(document, seg);
  Tensor question_source = config.question_embed_post_self_attention ? question : question_context;
  out.question = mean_pool_rows(question_source);
  return out;
}

}  // namespace nqreader
