#pragma once

#include <vector>

#include "nqreader/common.hpp"

namespace nqreader {

// Token-index -> paragraph-index map for one document span. Entries must form
// contiguous non-decreasing runs starting at 0, so every paragraph's tokens
// are adjacent and every index in [0, paragraphs()) occurs at least once.
class ParagraphMap {
 public:
  ParagraphMap() = default;

  explicit ParagraphMap(std::vector<Index> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw DataError("ParagraphMap: empty token list");
    if (entries_[0] != 0) throw DataError("ParagraphMap: first token must be in paragraph 0");
    for (std::size_t j = 1; j < entries_.size(); ++j) {
      Index step = entries_[j] - entries_[j - 1];
      if (step != 0 && step != 1)
        throw DataError("ParagraphMap: paragraph indices must be contiguous non-decreasing runs");
    }
    paragraphs_ = entries_.back() + 1;
  }

  Index size() const { return static_cast<Index>(entries_.size()); }
  Index paragraphs() const { return paragraphs_; }
  Index operator[](Index token) const { return entries_[static_cast<std::size_t>(token)]; }
  const std::vector<Index>& entries() const { return entries_; }

  // Tokens per paragraph; every count is >= 1 by construction.
  std::vector<Index> counts() const {
    std::vector<Index> c(static_cast<std::size_t>(paragraphs_), 0);
    for (Index p : entries_) ++c[static_cast<std::size_t>(p)];
    return c;
  }

  bool operator==(const ParagraphMap& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Index> entries_;
  Index paragraphs_ = 0;
};

}  // namespace nqreader
