#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxslu/corpus/corpus.hpp"
#include "ctxslu/corpus/vocab.hpp"
#include "ctxslu/model/model.hpp"
#include "ctxslu/train/metrics.hpp"
#include "ctxslu/train/optim.hpp"

namespace ctxslu::train {

struct TrainConfig {
  model::ModelConfig model;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 30;
  /// Stop once this many epochs pass without a new best validation micro-F1.
  /// Equal F1 counts as a new best when the validation loss is lower.
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  AdamConfig adam;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::optional<std::filesystem::path> embeddings;

  void validate() const;
  nlohmann::json to_json() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_f1 = 0.0;
  double valid_loss = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_valid_f1 = 0.0;
  F1Score train;  // best checkpoint on the training windows
  F1Score test;   // best checkpoint on the test windows
  bool stopped_early = false;

  nlohmann::json to_json() const;
};

struct TrainOutput {
  RunResult result;
  corpus::Vocabulary vocab;
  corpus::LabelSet labels;
  model::Model model;
};

/// Per-epoch progress callback; may be empty.
using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains on the training split with early stopping on the validation split and
/// reports the best-validation checkpoint. The vocabulary and label set come from
/// the training dialogues. Deterministic for a fixed config.
TrainOutput train(const TrainConfig& cfg, const corpus::Splits& splits, const EpochCallback& on_epoch = {});

/// Micro-F1 of `model` on the examples; gold labels outside the label set count as misses.
F1Score evaluate(model::Model& model, std::span<const model::Example> examples);

}  // namespace ctxslu::train
