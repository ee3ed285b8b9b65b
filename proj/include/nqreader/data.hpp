#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nqreader/labels.hpp"
#include "nqreader/paragraph_map.hpp"

namespace nqreader {

// Gold annotation in page-global coordinates; short_span is [start, end).
struct GoldLabel {
  Index long_pid = 0;
  std::optional<std::pair<Index, Index>> short_span;
  AnswerType type = AnswerType::kLong;
};

struct ParagraphText {
  Index pid = 0;  // page-level paragraph id
  std::vector<TokenId> tokens;
};

struct Page {
  std::string page_id;
  std::vector<TokenId> question;
  std::vector<ParagraphText> paragraphs;
  std::optional<GoldLabel> gold;

  Index total_tokens() const;
  void validate() const;
};

struct PipelineConfig {
  Index window = 512;
  Index stride = 192;
  Scalar keep_negative_p = 0.1;
  std::uint64_t seed = 1;
};

// Sliding-window offsets: starts at 0, stride, 2*stride, ...; each span is
// [start, min(start+window, total)); generation stops with the first span
// reaching the document tail, which is therefore covered exactly once.
std::vector<std::pair<Index, Index>> split_document(Index total_tokens, Index window,
                                                    Index stride);

// One training/evaluation unit in local span coordinates.
struct InstanceTuple {
  std::string page_id;
  Index span_id = 0;
  Index span_offset = 0;
  std::vector<TokenId> question;
  std::vector<TokenId> document;
  ParagraphMap seg;
  std::vector<Index> paragraph_ids;  // local index -> page-level pid
  TargetLabels targets;
};

// Windows a page into instances. Paragraphs clipped at window edges keep
// their page-level id. A window is SHORT iff the gold span lies fully inside
// it; otherwise LONG/YES/NO iff the gold paragraph's first token does; else
// NULL.
std::vector<InstanceTuple> build_instances(const Page& page, const PipelineConfig& config);

// Keeps every positive and each NULL instance with probability keep_p.
std::vector<InstanceTuple> subsample_negatives(std::vector<InstanceTuple> instances,
                                               Scalar keep_p, std::uint64_t seed);

struct SyntheticConfig {
  Index pages = 64;
  Index paragraphs_per_page = 4;
  Index tokens_per_paragraph = 48;
  Index vocab = 256;
  Scalar null_fraction = 0.2;
  Scalar long_only_fraction = 0.0;
  Scalar yes_no_fraction = 0.0;
  std::uint64_t seed = 1;
};

// Random filler pages; answerable pages plant a key phrase in one paragraph
// and ask a question ending in exactly those tokens. Deterministic per seed.
std::vector<Page> generate_corpus(const SyntheticConfig& config);

// Line-delimited JSON, one page per line.
std::vector<Page> load_pages(const std::string& path);
void save_pages(const std::vector<Page>& pages, const std::string& path);

}  // namespace nqreader
