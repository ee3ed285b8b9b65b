#include "nqreader/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace nqreader {

namespace {

Scalar answer_type_score(const std::vector<Scalar>& type_output) {
  Scalar non_null = 0.0;
  for (std::size_t t = 1; t < type_output.size(); ++t) non_null += type_output[t];
  return non_null - type_output[0];
}

AnswerType argmax_type(const std::vector<Scalar>& type_output) {
  std::size_t best = 0;
  for (std::size_t t = 1; t < type_output.size(); ++t)
    if (type_output[t] > type_output[best]) best = t;
  return static_cast<AnswerType>(best);
}

// Best legal (start, end) by short score inside one paragraph of one span;
// first-found wins on ties (ascending start, then end).
struct ShortCandidate {
  bool found = false;
  Index start = 0, end = 0;
  Scalar score = -std::numeric_limits<Scalar>::infinity();
};

ShortCandidate best_short_in_paragraph(const SpanPrediction& span, Index local_paragraph,
                                       Index max_span_len) {
  ShortCandidate best;
  const Index m = span.seg.size();
  for (Index s = 0; s < m; ++s) {
    if (span.seg[s] != local_paragraph) continue;
    for (Index e = s; e < m && e - s + 1 <= max_span_len; ++e) {
      if (span.seg[e] != local_paragraph) break;
      Scalar score =
          short_answer_score(span.start_logits, span.end_logits, span.type_output, s, e);
      if (!best.found || score > best.score) {
        best.found = true;
        best.start = s;
        best.end = e;
        best.score = score;
      }
    }
  }
  return best;
}

PrfStats make_prf(long correct, long predicted, long gold) {
  PrfStats stats;
  stats.correct = correct;
  stats.predicted = predicted;
  stats.gold = gold;
  stats.precision = predicted > 0 ? static_cast<double>(correct) / predicted : 0.0;
  stats.recall = gold > 0 ? static_cast<double>(correct) / gold : 0.0;
  stats.f1 = (stats.precision + stats.recall) > 0.0
                 ? 2.0 * stats.precision * stats.recall / (stats.precision + stats.recall)
                 : 0.0;
  return stats;
}

void require_aligned(const std::vector<std::pair<std::string, PagePrediction>>& predictions,
                     const std::vector<GoldAnswer>& gold) {
  if (predictions.size() != gold.size())
    throw DataError("page ids: " + std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(gold.size()) + " gold pages");
  std::map<std::string, int> counts;
  for (const auto& [id, _] : predictions) counts[id] += 1;
  for (const GoldAnswer& g : gold) {
    auto it = counts.find(g.page_id);
    if (it == counts.end() || it->second == 0)
      throw DataError("page id mismatch: no prediction for " + g.page_id);
    it->second -= 1;
  }
}

}  // namespace

Scalar long_answer_score(const std::vector<Scalar>& long_logits,
                         const std::vector<Scalar>& type_output, Index paragraph) {
  if (paragraph < 0 || static_cast<std::size_t>(paragraph) >= long_logits.size())
    throw std::out_of_range("long_answer_score: paragraph " + std::to_string(paragraph) +
                            " outside logits of " + std::to_string(long_logits.size()));
  return long_logits[static_cast<std::size_t>(paragraph)] + answer_type_score(type_output);
}

Scalar short_answer_score(const std::vector<Scalar>& start_logits,
                          const std::vector<Scalar>& end_logits,
                          const std::vector<Scalar>& type_output, Index start, Index end) {
  if (start < 0 || start > end || static_cast<std::size_t>(end) >= start_logits.size() ||
      static_cast<std::size_t>(end) >= end_logits.size())
    throw std::out_of_range("short_answer_score: invalid span [" + std::to_string(start) + ", " +
                            std::to_string(end) + "]");
  return start_logits[static_cast<std::size_t>(start)] +
         end_logits[static_cast<std::size_t>(end)] + (type_output[1] - type_output[0]);
}

PagePrediction select_answers(const std::vector<SpanPrediction>& spans,
                              const SelectOptions& options) {
  if (spans.empty()) throw DataError("select_answers: empty span list");
  if (options.max_span_len < 1) throw ConfigError("select_answers: max_span_len must be >= 1");

  // visit spans by ascending span_id so tie-breaks do not depend on list order
  std::vector<std::size_t> visit(spans.size());
  std::iota(visit.begin(), visit.end(), std::size_t{0});
  std::sort(visit.begin(), visit.end(), [&](std::size_t a, std::size_t b) {
    return spans[a].span_id < spans[b].span_id;
  });

  PagePrediction page;
  std::size_t win_span = visit[0];
  std::size_t short_host = visit[0];
  Index win_local = 0;
  Scalar best_long = -std::numeric_limits<Scalar>::infinity();
  bool have_long = false;
  ShortCandidate win_short;

  if (options.derive_long_from_short) {
    // long head removed: the best short span picks its own paragraph
    for (std::size_t si : visit) {
      const SpanPrediction& span = spans[si];
      for (Index local = 0; local < span.seg.paragraphs(); ++local) {
        ShortCandidate cand = best_short_in_paragraph(span, local, options.max_span_len);
        if (cand.found && (!have_long || cand.score > best_long)) {
          have_long = true;
          best_long = cand.score;
          win_span = si;
          short_host = si;
          win_local = local;
          win_short = cand;
        }
      }
    }
  } else {
    for (std::size_t si : visit) {
      const SpanPrediction& span = spans[si];
      for (Index local = 0; local < span.seg.paragraphs(); ++local) {
        Scalar score = long_answer_score(span.long_logits, span.type_output, local);
        if (!have_long || score > best_long) {
          have_long = true;
          best_long = score;
          win_span = si;
          win_local = local;
        }
      }
    }
    short_host = win_span;
    win_short = best_short_in_paragraph(spans[win_span], win_local, options.max_span_len);
    if (options.cross_span_short) {
      // consider the winning paragraph wherever an overlapping span holds it
      Index winning_pid = spans[win_span].paragraph_ids[static_cast<std::size_t>(win_local)];
      for (std::size_t si : visit) {
        if (si == win_span) continue;
        const SpanPrediction& span = spans[si];
        for (Index local = 0; local < span.seg.paragraphs(); ++local) {
          if (span.paragraph_ids[static_cast<std::size_t>(local)] != winning_pid) continue;
          ShortCandidate cand = best_short_in_paragraph(span, local, options.max_span_len);
          if (cand.found && cand.score > win_short.score) {
            win_short = cand;
            short_host = si;
          }
        }
      }
    }
  }

  const SpanPrediction& winner = spans[win_span];
  const SpanPrediction& host = spans[short_host];
  page.long_score = best_long;
  page.short_score = win_short.found ? win_short.score : -std::numeric_limits<Scalar>::infinity();
  page.type = argmax_type(winner.type_output);

  bool emit_long = have_long && std::isfinite(best_long) &&
                   best_long >= options.thresholds.long_threshold;
  if (emit_long) {
    page.long_paragraph = winner.paragraph_ids[static_cast<std::size_t>(win_local)];
    if (win_short.found && win_short.score >= options.thresholds.short_threshold)
      page.short_span = std::make_pair(win_short.start + host.token_offset,
                                       win_short.end + host.token_offset);
  }
  return page;
}

F1Report page_f1(const std::vector<std::pair<std::string, PagePrediction>>& predictions,
                 const std::vector<GoldAnswer>& gold) {
  require_aligned(predictions, gold);
  std::map<std::string, const GoldAnswer*> by_id;
  for (const GoldAnswer& g : gold) by_id[g.page_id] = &g;

  long long_correct = 0, long_predicted = 0, long_gold = 0;
  long short_correct = 0, short_predicted = 0, short_gold = 0;
  for (const auto& [page_id, pred] : predictions) {
    const GoldAnswer& g = *by_id.at(page_id);
    if (g.long_paragraph) ++long_gold;
    if (g.short_span) ++short_gold;
    if (pred.long_paragraph) {
      ++long_predicted;
      if (g.long_paragraph && *pred.long_paragraph == *g.long_paragraph) ++long_correct;
    }
    if (pred.short_span) {
      ++short_predicted;
      if (g.short_span && *pred.short_span == *g.short_span) ++short_correct;
    }
  }

  F1Report report;
  report.long_answer = make_prf(long_correct, long_predicted, long_gold);
  report.short_answer = make_prf(short_correct, short_predicted, short_gold);
  return report;
}

namespace {

// F1 of "emit when score >= threshold" over the dev examples, for one task.
double threshold_f1(const std::vector<DevExample>& dev, Scalar threshold, bool short_task) {
  long correct = 0, predicted = 0, gold = 0;
  for (const DevExample& ex : dev) {
    if (short_task) {
      if (ex.gold.short_span) ++gold;
      if (ex.candidate.short_span && ex.candidate.short_score >= threshold) {
        ++predicted;
        if (ex.gold.short_span && *ex.candidate.short_span == *ex.gold.short_span) ++correct;
      }
    } else {
      if (ex.gold.long_paragraph) ++gold;
      if (ex.candidate.long_paragraph && ex.candidate.long_score >= threshold) {
        ++predicted;
        if (ex.gold.long_paragraph && *ex.candidate.long_paragraph == *ex.gold.long_paragraph)
          ++correct;
      }
    }
  }
  return make_prf(correct, predicted, gold).f1;
}

Scalar sweep_threshold(const std::vector<DevExample>& dev, bool short_task) {
  std::vector<Scalar> candidates;
  for (const DevExample& ex : dev) {
    Scalar score = short_task ? ex.candidate.short_score : ex.candidate.long_score;
    if (std::isfinite(score)) candidates.push_back(score);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // nothing-emitted is always in the sweep; it wins unless some cut has F1 > 0
  Scalar best_threshold = std::numeric_limits<Scalar>::infinity();
  double best_f1 = 0.0;
  for (Scalar threshold : candidates) {  // ascending, so the lowest maximizer sticks
    double f1 = threshold_f1(dev, threshold, short_task);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_threshold = threshold;
    }
  }
  return best_threshold;
}

}  // namespace

Thresholds calibrate_thresholds(const std::vector<DevExample>& dev) {
  if (dev.empty()) throw DataError("calibrate_thresholds: empty dev set");
  Thresholds out;
  out.long_threshold = sweep_threshold(dev, false);
  out.short_threshold = sweep_threshold(dev, true);
  return out;
}

AccuracyReport answer_accuracy(
    const std::vector<std::pair<std::string, PagePrediction>>& predictions,
    const std::vector<GoldAnswer>& gold) {
  require_aligned(predictions, gold);
  std::map<std::string, const GoldAnswer*> by_id;
  for (const GoldAnswer& g : gold) by_id[g.page_id] = &g;

  AccuracyReport report;
  for (const auto& [page_id, pred] : predictions) {
    const GoldAnswer& g = *by_id.at(page_id);
    if (g.long_paragraph) {
      ++report.long_total;
      if (pred.long_paragraph && *pred.long_paragraph == *g.long_paragraph)
        ++report.long_correct;
    }
    if (g.short_span) {
      ++report.short_total;
      if (pred.short_span && *pred.short_span == *g.short_span) ++report.short_correct;
    }
  }
  if (report.long_total > 0)
    report.long_accuracy = static_cast<double>(report.long_correct) / report.long_total;
  if (report.short_total > 0)
    report.short_exact_match = static_cast<double>(report.short_correct) / report.short_total;
  return report;
}

}  // namespace nqreader
