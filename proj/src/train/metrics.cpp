#include "ctxslu/train/metrics.hpp"

#include <algorithm>

#include "ctxslu/error.hpp"

namespace ctxslu::train {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double F1Counts::precision() const noexcept { return ratio(tp, tp + fp); }
double F1Counts::recall() const noexcept { return ratio(tp, tp + fn); }

double F1Counts::f1() const noexcept {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

F1Score score(const F1Counts& c) { return {c.precision(), c.recall(), c.f1(), c}; }

F1Counts count_decisions(std::span<const LabelIds> predictions, std::span<const LabelIds> golds) {
  if (predictions.size() != golds.size())
    throw UsageError("f1_micro: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(golds.size()) + " gold sets");
  F1Counts c;
  LabelIds p, g;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    p = predictions[i];
    g = golds[i];
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    LabelIds both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(both));
    c.tp += both.size();
    c.fp += p.size() - both.size();
    c.fn += g.size() - both.size();
  }
  return c;
}

F1Score f1_micro(std::span<const LabelIds> predictions, std::span<const LabelIds> golds) {
  return score(count_decisions(predictions, golds));
}

}  // namespace ctxslu::train
