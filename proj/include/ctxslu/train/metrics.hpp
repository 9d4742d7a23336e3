#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ctxslu::train {

using LabelIds = std::vector<std::size_t>;

struct F1Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const noexcept;
  double recall() const noexcept;
  double f1() const noexcept;
};

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  F1Counts counts;
};

F1Score score(const F1Counts& c);

/// Counts pooled over every (example, label) decision. Label sets need not be sorted.
/// Throws UsageError when the lists differ in length.
F1Counts count_decisions(std::span<const LabelIds> predictions, std::span<const LabelIds> golds);
F1Score f1_micro(std::span<const LabelIds> predictions, std::span<const LabelIds> golds);

}  // namespace ctxslu::train
