#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cli/settings.hpp"
#include "ctxslu/train/experiment.hpp"

namespace ctxslu::cli {

/// Writes the corpus to `out` and prints dialogue, turn and label counts.
void cmd_generate(const Settings& s, const std::filesystem::path& out, std::ostream& log);

/// Writes model.ckpt and result.json into `out_dir`.
void cmd_train(const Settings& s, const std::filesystem::path& out_dir, std::ostream& log);

/// Scores `checkpoint` on every window of `corpus`; writes eval.json into `out_dir`.
void cmd_eval(const Settings& s, const std::filesystem::path& out_dir, std::ostream& log);

/// Rows of an ablation grid: the attention rows described by the grid keys, then one
/// baseline row per entry of `baselines`.
std::vector<train::ExperimentRow> ablation_rows(const Settings& s);

/// Writes ablation.csv and ablation.txt into `out_dir`.
void cmd_ablate(const Settings& s, const std::filesystem::path& out_dir, std::ostream& log);

/// Writes attention_weights.csv (selected windows) and attention_by_distance.csv
/// (mean over every window of the corpus) into `out_dir`.
void cmd_inspect_attention(const Settings& s, const std::filesystem::path& out_dir, std::ostream& log);

/// Parses argv and dispatches. Returns the process exit code: 0 success,
/// 2 usage, configuration or data error, 3 numeric failure.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace ctxslu::cli
