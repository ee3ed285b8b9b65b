#pragma once

#include "nqreader/common.hpp"

namespace nqreader {

// Answer categories attached to every training instance.
enum class AnswerType : int { kNull = 0, kShort = 1, kLong = 2, kYes = 3, kNo = 4 };

inline constexpr int kAnswerTypeCount = 5;

// Sentinel for "no target" in paragraph/span fields.
inline constexpr Index kNullTarget = -1;

// Per-instance supervision in local (document-span) coordinates.
// span_start/span_end are inclusive token indices.
struct TargetLabels {
  Index paragraph = kNullTarget;
  Index span_start = kNullTarget;
  Index span_end = kNullTarget;
  AnswerType type = AnswerType::kNull;

  void validate() const {
    switch (type) {
      case AnswerType::kNull:
        if (paragraph != kNullTarget || span_start != kNullTarget || span_end != kNullTarget)
          throw DataError("TargetLabels: NULL instances must carry no targets");
        return;
      case AnswerType::kShort:
        if (paragraph == kNullTarget)
          throw DataError("TargetLabels: SHORT instances need a paragraph target");
        if (span_start == kNullTarget || span_end == kNullTarget || span_start > span_end ||
            span_start < 0)
          throw DataError("TargetLabels: SHORT instances need a valid span (start <= end)");
        return;
      case AnswerType::kLong:
      case AnswerType::kYes:
      case AnswerType::kNo:
        if (paragraph == kNullTarget)
          throw DataError("TargetLabels: LONG/YES/NO instances need a paragraph target");
        if (span_start != kNullTarget || span_end != kNullTarget)
          throw DataError("TargetLabels: LONG/YES/NO instances must carry no span");
        return;
    }
    throw DataError("TargetLabels: unknown answer type");
  }
};

inline AnswerType answer_type_from_int(int v) {
  if (v < 0 || v >= kAnswerTypeCount)
    throw DataError("answer type " + std::to_string(v) + " outside [0, 5)");
  return static_cast<AnswerType>(v);
}

}  // namespace nqreader
