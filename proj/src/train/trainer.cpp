#include "ctxslu/train/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "ctxslu/error.hpp"

namespace ctxslu::train {

using nlohmann::json;

void TrainConfig::validate() const {
  model.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

json TrainConfig::to_json() const {
  return json{{"model", model.to_json()},
              {"batch_size", batch_size},
              {"max_epochs", max_epochs},
              {"early_stopping", {{"metric", "valid_micro_f1"}, {"tie_break", "valid_loss"}, {"patience", patience}}},
              {"seed", seed},
              {"adam", {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
              {"clip_norm", clip_norm},
              {"embeddings", embeddings ? embeddings->string() : std::string()}};
}

namespace {

json score_json(const F1Score& s) {
  return json{{"precision", s.precision},
              {"recall", s.recall},
              {"f1", s.f1},
              {"tp", s.counts.tp},
              {"fp", s.counts.fp},
              {"fn", s.counts.fn}};
}

std::vector<model::Example> examples_of(std::span<const corpus::Dialogue> dialogues, std::size_t context_length,
                                        const corpus::Vocabulary& vocab, const corpus::LabelSet& labels) {
  const auto windows = corpus::build_windows(dialogues, context_length);
  return model::encode_all(windows, vocab, labels);
}

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(std::span<ad::Tensor* const> params) {
  Snapshot s;
  for (const ad::Tensor* p : params) s.emplace_back(p->values().begin(), p->values().end());
  return s;
}

void restore(std::span<ad::Tensor* const> params, const Snapshot& s) {
  for (std::size_t k = 0; k < params.size(); ++k) std::copy(s[k].begin(), s[k].end(), params[k]->values().begin());
}

struct Validation {
  F1Score f1;
  double loss = 0.0;
};

/// Micro-F1 and mean loss in one pass. Examples without a usable single-label
/// target are left out of the loss.
Validation validate(model::Model& model, std::span<const model::Example> examples) {
  ad::Tape tape;
  F1Counts c;
  double total = 0.0;
  std::size_t n = 0;
  std::vector<LabelIds> pred(1), gold(1);
  const bool single = model.config().label_mode == model::LabelMode::single_label;
  for (const auto& ex : examples) {
    tape.clear();
    const auto f = model.forward(tape, ex);
    pred[0] = model.from_logits(tape.value(f.logits)).decided;
    gold[0] = ex.gold;
    const F1Counts one = count_decisions(pred, gold);
    c.tp += one.tp;
    c.fp += one.fp;
    c.fn += one.fn + ex.unknown_gold;
    if (!single || ex.gold.size() == 1) {
      total += tape.item(model.loss(tape, f.logits, ex));
      ++n;
    }
  }
  return {score(c), n ? total / static_cast<double>(n) : 0.0};
}

}  // namespace

json RunResult::to_json() const {
  json ep = json::array();
  for (const auto& e : epochs)
    ep.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"valid_f1", e.valid_f1}, {"valid_loss", e.valid_loss}});
  return json{{"seed", seed},
              {"config", config},
              {"epochs", std::move(ep)},
              {"best_epoch", best_epoch},
              {"best_valid_f1", best_valid_f1},
              {"stopped_early", stopped_early},
              {"train", score_json(train)},
              {"test", score_json(test)}};
}

F1Score evaluate(model::Model& model, std::span<const model::Example> examples) {
  ad::Tape tape;
  F1Counts c;
  std::vector<LabelIds> pred(1), gold(1);
  for (const auto& ex : examples) {
    tape.clear();
    pred[0] = model.predict(tape, ex).decided;
    gold[0] = ex.gold;
    const F1Counts one = count_decisions(pred, gold);
    c.tp += one.tp;
    c.fp += one.fp;
    c.fn += one.fn + ex.unknown_gold;
  }
  return score(c);
}

TrainOutput train(const TrainConfig& cfg, const corpus::Splits& splits, const EpochCallback& on_epoch) {
  cfg.validate();
  if (splits.train.empty()) throw DataError("training split is empty");
  if (splits.valid.empty()) throw DataError("validation split is empty");

  corpus::Vocabulary vocab = corpus::Vocabulary::build(splits.train);
  corpus::LabelSet labels = corpus::LabelSet::build(splits.train);
  const std::size_t ctx = cfg.model.context_length;
  const auto train_ex = examples_of(splits.train, ctx, vocab, labels);
  const auto valid_ex = examples_of(splits.valid, ctx, vocab, labels);
  const auto test_ex = examples_of(splits.test, ctx, vocab, labels);

  std::mt19937_64 rng(cfg.seed);
  std::optional<ad::Tensor> table;
  if (cfg.embeddings) table = corpus::load_embeddings(*cfg.embeddings, vocab, cfg.model.word_dim, rng).table;
  model::Model net(cfg.model, model::ModelParams::init(cfg.model, vocab.size(), labels.size(), rng, std::move(table)));

  std::vector<ad::Tensor*> params;
  for (auto& [name, t] : net.params().named(cfg.model)) params.push_back(t);
  for (ad::Tensor* p : params) p->zero_grad();
  AdamState adam = AdamState::for_params(params, cfg.adam);

  RunResult result;
  result.seed = cfg.seed;
  result.config = cfg.to_json();

  std::vector<std::size_t> order(train_ex.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ad::Tape tape;
  Snapshot best;
  double best_f1 = -1.0;
  double best_loss = 0.0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double seed = 1.0 / static_cast<double>(end - start);
      try {
        for (std::size_t k = start; k < end; ++k) {
          const auto& ex = train_ex[order[k]];
          tape.clear();
          const auto f = net.forward(tape, ex);
          const ad::Var loss = net.loss(tape, f.logits, ex);
          total += tape.item(loss);
          tape.backward(loss, seed);
        }
        if (cfg.clip_norm > 0.0) clip_grad_norm(params, cfg.clip_norm);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch starting at " +
                           std::to_string(start) + ": " + e.what());
      }
      adam_step(adam, params);
    }

    const Validation v = validate(net, valid_ex);
    EpochLog log{epoch, total / static_cast<double>(train_ex.size()), v.f1.f1, v.loss};
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.valid_f1 > best_f1 || (log.valid_f1 == best_f1 && log.valid_loss < best_loss)) {
      best_f1 = log.valid_f1;
      best_loss = log.valid_loss;
      result.best_epoch = epoch;
      best = snapshot(params);
    } else if (epoch - result.best_epoch > cfg.patience) {
      result.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }

  restore(params, best);
  result.best_valid_f1 = best_f1;
  result.train = evaluate(net, train_ex);
  result.test = evaluate(net, test_ex);
  return {std::move(result), std::move(vocab), std::move(labels), std::move(net)};
}

}  // namespace ctxslu::train
