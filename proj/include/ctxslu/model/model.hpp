#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxslu/attention/context_attention.hpp"
#include "ctxslu/autodiff/tape.hpp"
#include "ctxslu/corpus/corpus.hpp"
#include "ctxslu/corpus/vocab.hpp"
#include "ctxslu/encoder/lstm.hpp"

namespace ctxslu::model {

/// Where s_hist comes from. `attention` is the proposed model; the other three are baselines.
enum class ContextModel : std::uint8_t { attention, no_context, lstm_summary, lstm_attention };
enum class LabelMode : std::uint8_t { multi_label, single_label };
/// threshold: every label with probability >= threshold. top1: the arg max only.
enum class DecisionRule : std::uint8_t { threshold, top1 };

std::string_view to_string(ContextModel m);
std::string_view to_string(LabelMode m);
std::string_view to_string(DecisionRule r);
ContextModel parse_context_model(std::string_view s);
LabelMode parse_label_mode(std::string_view s);
DecisionRule parse_decision_rule(std::string_view s);

struct ModelConfig {
  std::size_t word_dim = 200;
  std::size_t dim = 128;
  std::size_t context_length = 7;
  ContextModel context = ContextModel::attention;
  attn::AttentionConfig attention;
  LabelMode label_mode = LabelMode::multi_label;
  DecisionRule decision = DecisionRule::threshold;
  double threshold = 0.5;

  void validate() const;
  /// Size of s_hist; 0 for the no-context baseline.
  std::size_t history_dim() const;
  bool uses_speaker() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
  ad::Tensor word_embeddings;  // [word_dim x |V|], shared by every word-level encoder
  enc::BiLstmParams summary_encoder;
  enc::BiLstmParams prediction_encoder;  // input word_dim + history_dim
  std::optional<enc::BiLstmParams> history_encoder;  // LSTM baselines only
  ad::Tensor D;        // [dim x context_length]
  ad::Tensor S;        // [dim x 2]
  ad::Tensor intents;  // [dim x |L|]
  attn::AttentionParams attention;
  ad::Tensor output_W;  // [|L| x dim]
  ad::Tensor output_b;  // [|L|]

  /// Random initialisation. The speaker table is drawn last so that configurations
  /// differing only in the speaker indicator share every other initial value.
  static ModelParams init(const ModelConfig& cfg, std::size_t vocab_size, std::size_t label_count,
                          std::mt19937_64& rng, std::optional<ad::Tensor> embeddings = std::nullopt);

  /// Every tensor the configuration trains, each exactly once, in a fixed order.
  void visit(const ModelConfig& cfg, const std::function<void(const std::string&, ad::Tensor&)>& fn);
  std::vector<std::pair<std::string, ad::Tensor*>> named(const ModelConfig& cfg);
};

struct EncodedHistory {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> labels;  // known label ids only
  std::size_t distance = 1;
  Role role = Role::guide;
};

/// A context window mapped to ids.
struct Example {
  std::vector<std::size_t> tokens;
  Role role = Role::guide;
  std::vector<std::size_t> gold;       // sorted known label ids
  std::size_t unknown_gold = 0;        // gold labels missing from the label set
  std::vector<EncodedHistory> histories;  // most recent first
};

Example encode(const corpus::ContextWindow& w, const corpus::Vocabulary& vocab, const corpus::LabelSet& labels);
std::vector<Example> encode_all(std::span<const corpus::ContextWindow> windows, const corpus::Vocabulary& vocab,
                                const corpus::LabelSet& labels);

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probabilities;
  std::vector<std::size_t> decided;  // sorted label ids
};

/// The label set chosen from `probabilities`. Multi-label + threshold keeps every
/// p >= threshold; top1, and single-label mode, keep the arg max.
std::vector<std::size_t> decide(std::span<const double> probabilities, const ModelConfig& cfg);

struct Forward {
  ad::Var h_T;
  attn::HistorySummary history;  // s_hist invalid when history.dim == 0
  ad::Var logits;
};

class Model {
 public:
  Model(ModelConfig cfg, ModelParams params);

  const ModelConfig& config() const noexcept { return cfg_; }
  ModelParams& params() noexcept { return params_; }
  const ModelParams& params() const noexcept { return params_; }
  std::size_t label_count() const noexcept { return params_.output_b.size(); }
  std::size_t vocab_size() const noexcept { return params_.word_embeddings.cols(); }

  /// BiLSTM summary of the current utterance.
  ad::Var summarize_current(ad::Tape& tape, std::span<const std::size_t> tokens);
  /// u_t: mean of the intent columns of `labels`, zeros if there are none.
  ad::Var intent_vector(ad::Tape& tape, std::span<const std::size_t> labels);
  /// s_hist for the configured context model.
  attn::HistorySummary summarize_history(ad::Tape& tape, const Example& ex, ad::Var h_T);
  /// Prediction stage: w_t ⊕ s_hist through the prediction encoder, then the output layer.
  ad::Var predict_logits(ad::Tape& tape, std::span<const std::size_t> tokens, std::optional<ad::Var> s_hist);
  ad::Var loss(ad::Tape& tape, ad::Var logits, const Example& ex);

  Forward forward(ad::Tape& tape, const Example& ex);
  /// Probabilities and decided labels for one logit vector.
  Prediction from_logits(std::span<const double> z) const;
  Prediction predict(ad::Tape& tape, const Example& ex);
  Prediction predict(const Example& ex);

 private:
  ad::Var encode_words(ad::Tape& tape, enc::BiLstmParams& p, std::span<const std::size_t> tokens,
                       std::optional<ad::Var> suffix);
  std::vector<ad::Var> word_vectors(ad::Tape& tape, std::span<const std::size_t> tokens);

  ModelConfig cfg_;
  ModelParams params_;
};

}  // namespace ctxslu::model
