#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nqreader/labels.hpp"
#include "nqreader/paragraph_map.hpp"

namespace nqreader {

// Plain-value outputs of one document span, detached from the graph.
struct SpanPrediction {
  Index span_id = 0;
  std::vector<Index> paragraph_ids;  // global id per local paragraph, ascending
  ParagraphMap seg;
  Index token_offset = 0;            // span start within the page
  std::vector<Scalar> long_logits;   // length local paragraphs + 1 (null slot); empty if no head
  std::vector<Scalar> start_logits;  // length m
  std::vector<Scalar> end_logits;    // length m
  std::vector<Scalar> type_output;   // length 5
};

struct PagePrediction {
  std::optional<Index> long_paragraph;  // global paragraph id
  Scalar long_score = 0.0;              // best candidate score, kept even when suppressed
  std::optional<std::pair<Index, Index>> short_span;  // page-global inclusive [s, e]
  Scalar short_score = 0.0;
  AnswerType type = AnswerType::kNull;
};

struct Thresholds {
  Scalar long_threshold = -std::numeric_limits<Scalar>::infinity();
  Scalar short_threshold = -std::numeric_limits<Scalar>::infinity();
};

// o_L[c] plus the answer-type score sum(type[1..4]) - type[0].
Scalar long_answer_score(const std::vector<Scalar>& long_logits,
                         const std::vector<Scalar>& type_output, Index paragraph);

// o_S[s] + o_E[e] plus the short-answer type score type[1] - type[0].
Scalar short_answer_score(const std::vector<Scalar>& start_logits,
                          const std::vector<Scalar>& end_logits,
                          const std::vector<Scalar>& type_output, Index start, Index end);

struct SelectOptions {
  Index max_span_len = 30;
  Thresholds thresholds;
  bool cross_span_short = false;       // re-rank the short answer across every span
                                       // containing the winning paragraph
  bool derive_long_from_short = false;  // long head removed: best span's paragraph wins
};

// Page-level answer: the paragraph with the best long score over all spans,
// then the best legal short span inside it within the winning span. Ties break
// toward the lower span id, then the lower paragraph id, then the earlier span
// position. Answers are emitted only at or above their thresholds, the short
// answer only when the long answer is emitted.
PagePrediction select_answers(const std::vector<SpanPrediction>& spans,
                              const SelectOptions& options);

// Gold answers in page-global coordinates for scoring.
struct GoldAnswer {
  std::string page_id;
  std::optional<Index> long_paragraph;
  std::optional<std::pair<Index, Index>> short_span;  // inclusive [s, e]
};

struct PrfStats {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  long correct = 0, predicted = 0, gold = 0;
};

struct F1Report {
  PrfStats long_answer;
  PrfStats short_answer;
};

// Exact-match precision/recall/F1 on paragraph ids and short spans.
// Predictions and gold must carry identical page_id sets.
F1Report page_f1(const std::vector<std::pair<std::string, PagePrediction>>& predictions,
                 const std::vector<GoldAnswer>& gold);

struct DevExample {
  PagePrediction candidate;  // scored with thresholds disabled
  GoldAnswer gold;
};

// Sweeps candidate scores independently for the two thresholds, maximizing the
// respective F1; among maximizers the lowest threshold wins, and +infinity is
// returned when no threshold scores above zero.
Thresholds calibrate_thresholds(const std::vector<DevExample>& dev);

struct AccuracyReport {
  double long_accuracy = 0.0;   // over pages with a gold long answer
  double short_exact_match = 0.0;  // over pages with a gold short span
  long long_total = 0, long_correct = 0;
  long short_total = 0, short_correct = 0;
};

AccuracyReport answer_accuracy(const std::vector<std::pair<std::string, PagePrediction>>& predictions,
                               const std::vector<GoldAnswer>& gold);

}  // namespace nqreader
