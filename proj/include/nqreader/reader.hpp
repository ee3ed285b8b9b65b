#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nqreader/attention.hpp"
#include "nqreader/config.hpp"
#include "nqreader/paragraph_map.hpp"

namespace nqreader {

// Bidirectional question<->document attention with widened projections back
// to h, each side closed by residual + layer norm.
struct DualAttentionParams {
  Tensor w_document;  // 2h x h
  Tensor w_question;  // 2h x h
  Tensor ln_document_gain, ln_document_bias;
  Tensor ln_question_gain, ln_question_bias;

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor>>& out) const;
};

// One reader block: dual attention, a question transformer block, and a
// paragraph-masked, top-K-masked document transformer block with a token
// scorer whose output is re-injected after attention.
struct ReaderBlockParams {
  DualAttentionParams dual;
  TransformerBlockParams question_block;
  TransformerBlockParams paragraph_block;
  Tensor scorer_w;    // h x 1
  Tensor scorer_b;    // 1 x 1
  Tensor score_proj;  // 1 x h, re-injection of token scores

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor>>& out) const;
};

ReaderBlockParams reader_block_init(Index hidden, Rng& rng);

// Intermediates of one dual-attention pass, kept for inspection and tests.
struct DualAttentionTrace {
  Tensor similarity;            // m x n token similarity
  Tensor attn_over_document;    // m x n, each column a distribution over m document tokens
  Tensor attn_over_question;    // n x m, each column a distribution over n question tokens
  Tensor question_summary;      // n x h document-weighted summary per question token
  Tensor document_cat;          // m x 2h
  Tensor document_summary;      // m x h question-weighted summary per document token
  Tensor question_cat;          // n x 2h
};

struct DualAttentionResult {
  Tensor question;  // n x h
  Tensor document;  // m x h
  DualAttentionTrace trace;
};

DualAttentionResult dual_attention(const Tensor& question_prev, const Tensor& document_prev,
                                   const DualAttentionParams& params);

Tensor question_self_attention(const Tensor& question, const TransformerBlockParams& params,
                               Index heads, std::vector<Tensor>* attention_weights = nullptr);

// Zero where both tokens share a paragraph, NEG_INF elsewhere.
AdditiveMask paragraph_mask(const ParagraphMap& seg);

// Per-token importance in (0, 1): sigmoid of a dense h -> 1 scorer.
Tensor score_tokens(const Tensor& document, const Tensor& scorer_w, const Tensor& scorer_b);

struct TopKSelection {
  AdditiveMask mask;            // zero on selected x selected, NEG_INF elsewhere
  std::vector<Index> selected;  // ascending indices of the min(K, m) best scores
};

// Top-K by score, ties broken toward the lower index.
TopKSelection dynamic_mask(const Tensor& scores, Index top_k);

struct ParagraphAttentionResult {
  Tensor output;                          // m x h
  std::vector<Tensor> attention_weights;  // per head, m x m
  Tensor token_scores;                    // m x 1
  std::vector<Index> selected;
};

ParagraphAttentionResult paragraph_dynamic_self_attention(const Tensor& document,
                                                          const ParagraphMap& seg,
                                                          const ReaderBlockParams& params,
                                                          const ModelConfig& config);

struct ReaderBlockTrace {
  DualAttentionTrace dual;
  std::vector<Tensor> question_attention;
  std::vector<Tensor> paragraph_attention;
  Tensor token_scores;
  std::vector<Index> selected;
};

struct ReaderOutput {
  Tensor document;    // m x h final token representation
  Tensor paragraphs;  // l x h per-paragraph mean pooled representation
  Tensor question;    // 1 x h question embedding
  std::vector<ReaderBlockTrace> blocks;
};

// Runs the stacked reader blocks and pools the outputs. With no blocks the
// encoder outputs pass straight through (reader-removed ablation).
ReaderOutput run_reader(const Tensor& question0, const Tensor& document0, const ParagraphMap& seg,
                        const std::vector<ReaderBlockParams>& blocks, const ModelConfig& config);

}  // namespace nqreader
