#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxslu/corpus/corpus.hpp"
#include "ctxslu/train/trainer.hpp"

namespace ctxslu::train {

struct ExperimentRow {
  std::string name;
  TrainConfig cfg;  // cfg.seed is the base seed; run r uses base + r
  bool baseline = false;
};

struct RowResult {
  std::string name;
  bool baseline = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> scores;  // test micro-F1 in percent, one per run
  double mean = 0.0;
  /// One-tailed p against each baseline row (row order); empty with fewer than two runs.
  std::vector<double> p_values;
  /// Largest of p_values: the row must beat every baseline.
  std::optional<double> p_vs_baselines;
  std::string marker;  // "**" for p < 0.01, "*" for p < 0.05
  std::vector<RunResult> runs;
};

struct ExperimentTable {
  std::size_t n_runs = 0;
  std::vector<RowResult> rows;

  /// name,mean_f1,marker,p_vs_baselines,scores (scores separated by ';').
  void write_csv(std::ostream& out) const;
  /// Aligned plain-text table.
  void write_text(std::ostream& out) const;
};

std::string significance_marker(double p);

/// Worker count for independent runs: CTXSLU_THREADS if set (>= 1), otherwise the
/// hardware concurrency.
std::size_t thread_budget();

using RunCallback = std::function<void(const std::string& row, std::uint64_t seed, const RunResult&)>;

/// Trains every row n_runs times. Runs are independent and may execute in parallel;
/// results are stored by (row, run) so the table does not depend on scheduling.
ExperimentTable run_experiment(std::span<const ExperimentRow> rows, const corpus::Splits& splits, std::size_t n_runs,
                               std::size_t threads = 1, const RunCallback& on_run = {});

}  // namespace ctxslu::train
