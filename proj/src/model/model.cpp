#include "ctxslu/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "ctxslu/error.hpp"

namespace ctxslu::model {

using nlohmann::json;

std::string_view to_string(ContextModel m) {
  switch (m) {
    case ContextModel::attention: return "attention";
    case ContextModel::no_context: return "no_context";
    case ContextModel::lstm_summary: return "lstm_summary";
    case ContextModel::lstm_attention: return "lstm_attention";
  }
  return "?";
}

std::string_view to_string(LabelMode m) { return m == LabelMode::multi_label ? "multi_label" : "single_label"; }
std::string_view to_string(DecisionRule r) { return r == DecisionRule::threshold ? "threshold" : "top1"; }

ContextModel parse_context_model(std::string_view s) {
  for (auto m : {ContextModel::attention, ContextModel::no_context, ContextModel::lstm_summary,
                 ContextModel::lstm_attention})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown context model '" + std::string(s) + "'");
}

LabelMode parse_label_mode(std::string_view s) {
  if (s == "multi_label") return LabelMode::multi_label;
  if (s == "single_label") return LabelMode::single_label;
  throw ConfigError("unknown label mode '" + std::string(s) + "'");
}

DecisionRule parse_decision_rule(std::string_view s) {
  if (s == "threshold") return DecisionRule::threshold;
  if (s == "top1") return DecisionRule::top1;
  throw ConfigError("unknown decision rule '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (word_dim == 0) throw ConfigError("word_dim must be positive");
  if (dim == 0 || dim % 2 != 0) throw ConfigError("dim must be a positive even number");
  if (context_length == 0) throw ConfigError("context_length must be at least 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (context == ContextModel::attention) attention.validate();
}

std::size_t ModelConfig::history_dim() const {
  switch (context) {
    case ContextModel::attention: return attention.summary_dim(dim);
    case ContextModel::no_context: return 0;
    case ContextModel::lstm_summary:
    case ContextModel::lstm_attention: return dim;
  }
  return 0;
}

bool ModelConfig::uses_speaker() const {
  return context == ContextModel::attention && attention.speaker_indicator != attn::SpeakerIndicator::off;
}

json ModelConfig::to_json() const {
  return json{{"word_dim", word_dim},
              {"dim", dim},
              {"context_length", context_length},
              {"context", std::string(to_string(context))},
              {"attention",
               {{"kind", std::string(to_string(attention.kind))},
                {"level", std::string(to_string(attention.level))},
                {"speaker_indicator", std::string(to_string(attention.speaker_indicator))},
                {"history_repr", std::string(to_string(attention.history_repr))}}},
              {"label_mode", std::string(to_string(label_mode))},
              {"decision", std::string(to_string(decision))},
              {"threshold", threshold}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  try {
    ModelConfig c;
    c.word_dim = j.at("word_dim").get<std::size_t>();
    c.dim = j.at("dim").get<std::size_t>();
    c.context_length = j.at("context_length").get<std::size_t>();
    c.context = parse_context_model(j.at("context").get<std::string>());
    const json& a = j.at("attention");
    c.attention.kind = attn::parse_kind(a.at("kind").get<std::string>());
    c.attention.level = attn::parse_level(a.at("level").get<std::string>());
    c.attention.speaker_indicator = attn::parse_speaker_indicator(a.at("speaker_indicator").get<std::string>());
    c.attention.history_repr = attn::parse_history_repr(a.at("history_repr").get<std::string>());
    c.label_mode = parse_label_mode(j.at("label_mode").get<std::string>());
    c.decision = parse_decision_rule(j.at("decision").get<std::string>());
    c.threshold = j.at("threshold").get<double>();
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::size_t vocab_size, std::size_t label_count,
                              std::mt19937_64& rng, std::optional<ad::Tensor> embeddings) {
  cfg.validate();
  if (vocab_size == 0 || label_count == 0) throw ConfigError("model needs a vocabulary and at least one label");
  ModelParams p;
  if (embeddings) {
    if (embeddings->rows() != cfg.word_dim || embeddings->cols() != vocab_size)
      throw DimensionError("word embeddings must be " + std::to_string(cfg.word_dim) + " x " +
                           std::to_string(vocab_size));
    p.word_embeddings = std::move(*embeddings);
    p.word_embeddings.set_requires_grad(true);
  } else {
    p.word_embeddings = corpus::random_embeddings(cfg.word_dim, vocab_size, rng);
  }
  p.summary_encoder = enc::BiLstmParams::init(cfg.word_dim, cfg.dim, rng);
  p.prediction_encoder = enc::BiLstmParams::init(cfg.word_dim + cfg.history_dim(), cfg.dim, rng);
  if (cfg.context == ContextModel::lstm_summary || cfg.context == ContextModel::lstm_attention)
    p.history_encoder = enc::BiLstmParams::init(cfg.word_dim, cfg.dim, rng);
  constexpr double r = 0.08;
  p.D = ad::Tensor({cfg.dim, cfg.context_length}, true);
  p.D.fill_uniform(rng, -r, r);
  p.intents = ad::Tensor({cfg.dim, label_count}, true);
  p.intents.fill_uniform(rng, -r, r);
  p.attention = attn::AttentionParams::init(cfg.dim, rng);
  p.output_W = ad::Tensor({label_count, cfg.dim}, true);
  p.output_W.fill_uniform(rng, -r, r);
  p.output_b = ad::Tensor({label_count}, true);
  p.S = ad::Tensor({cfg.dim, 2}, true);
  p.S.fill_uniform(rng, -r, r);
  return p;
}

void ModelParams::visit(const ModelConfig& cfg, const std::function<void(const std::string&, ad::Tensor&)>& fn) {
  fn("word_embeddings", word_embeddings);
  summary_encoder.visit("summary_encoder", fn);
  prediction_encoder.visit("prediction_encoder", fn);
  if (history_encoder) history_encoder->visit("history_encoder", fn);
  if (cfg.context == ContextModel::attention) {
    fn("D", D);
    fn("intents", intents);
  }
  if (cfg.context == ContextModel::attention || cfg.context == ContextModel::lstm_attention)
    attention.visit("attention", fn);
  if (cfg.uses_speaker()) fn("S", S);
  fn("output_W", output_W);
  fn("output_b", output_b);
}

std::vector<std::pair<std::string, ad::Tensor*>> ModelParams::named(const ModelConfig& cfg) {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  visit(cfg, [&](const std::string& n, ad::Tensor& t) { out.emplace_back(n, &t); });
  return out;
}

namespace {

std::pair<std::vector<std::size_t>, std::size_t> label_ids(std::span<const std::string> names,
                                                           const corpus::LabelSet& labels) {
  std::vector<std::size_t> ids;
  std::size_t unknown = 0;
  for (const auto& n : names) {
    if (auto id = labels.id(n))
      ids.push_back(*id);
    else
      ++unknown;
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return {ids, unknown};
}

}  // namespace

Example encode(const corpus::ContextWindow& w, const corpus::Vocabulary& vocab, const corpus::LabelSet& labels) {
  Example ex;
  ex.tokens = vocab.encode(w.current.tokens);
  ex.role = w.current.speaker;
  std::tie(ex.gold, ex.unknown_gold) = label_ids(w.current.labels, labels);
  for (const auto& h : w.histories)
    ex.histories.push_back({vocab.encode(h.turn.tokens), label_ids(h.turn.labels, labels).first, h.distance,
                            h.turn.speaker});
  return ex;
}

std::vector<Example> encode_all(std::span<const corpus::ContextWindow> windows, const corpus::Vocabulary& vocab,
                                const corpus::LabelSet& labels) {
  std::vector<Example> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(encode(w, vocab, labels));
  return out;
}

std::vector<std::size_t> decide(std::span<const double> probabilities, const ModelConfig& cfg) {
  std::vector<std::size_t> out;
  if (probabilities.empty()) return out;
  if (cfg.decision == DecisionRule::top1 || cfg.label_mode == LabelMode::single_label) {
    out.push_back(static_cast<std::size_t>(std::max_element(probabilities.begin(), probabilities.end()) -
                                           probabilities.begin()));
    return out;
  }
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    if (probabilities[i] >= cfg.threshold) out.push_back(i);
  return out;
}

Model::Model(ModelConfig cfg, ModelParams params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const std::size_t want = cfg_.word_dim + cfg_.history_dim();
  if (params_.prediction_encoder.input() != want)
    throw DimensionError("prediction encoder takes " + std::to_string(params_.prediction_encoder.input()) +
                         " inputs, configuration needs " + std::to_string(want));
  if (params_.summary_encoder.output_dim() != cfg_.dim || params_.prediction_encoder.output_dim() != cfg_.dim)
    throw DimensionError("encoder output size differs from dim");
  if (params_.word_embeddings.rows() != cfg_.word_dim)
    throw DimensionError("word embedding size differs from word_dim");
  if (params_.output_W.rows() != params_.output_b.size() || params_.output_W.cols() != cfg_.dim)
    throw DimensionError("output layer shape mismatch");
  const bool needs_history_encoder =
      cfg_.context == ContextModel::lstm_summary || cfg_.context == ContextModel::lstm_attention;
  if (needs_history_encoder != params_.history_encoder.has_value())
    throw DimensionError("history encoder presence does not match the context model");
}

std::vector<ad::Var> Model::word_vectors(ad::Tape& tape, std::span<const std::size_t> tokens) {
  std::vector<ad::Var> out;
  out.reserve(tokens.size());
  for (std::size_t id : tokens) out.push_back(tape.embedding(params_.word_embeddings, id));
  return out;
}

ad::Var Model::encode_words(ad::Tape& tape, enc::BiLstmParams& p, std::span<const std::size_t> tokens,
                            std::optional<ad::Var> suffix) {
  if (tokens.empty()) throw EmptyInputError("utterance has no tokens");
  const auto words = word_vectors(tape, tokens);
  return enc::bilstm_encode(tape, p, words, suffix).summary;
}

ad::Var Model::summarize_current(ad::Tape& tape, std::span<const std::size_t> tokens) {
  return encode_words(tape, params_.summary_encoder, tokens, std::nullopt);
}

ad::Var Model::intent_vector(ad::Tape& tape, std::span<const std::size_t> labels) {
  if (labels.empty()) return tape.zeros(cfg_.dim);
  std::vector<ad::Var> cols;
  cols.reserve(labels.size());
  for (std::size_t l : labels) cols.push_back(tape.embedding(params_.intents, l));
  if (cols.size() == 1) return cols[0];
  return tape.scale(tape.add(cols), 1.0 / static_cast<double>(cols.size()));
}

attn::HistorySummary Model::summarize_history(ad::Tape& tape, const Example& ex, ad::Var h_T) {
  attn::HistorySummary out;
  out.dim = cfg_.history_dim();
  switch (cfg_.context) {
    case ContextModel::no_context:
      return out;

    case ContextModel::attention: {
      std::vector<attn::HistoryEntry> entries;
      entries.reserve(ex.histories.size());
      for (const auto& h : ex.histories) entries.push_back({intent_vector(tape, h.labels), h.distance, h.role});
      return attn::summarize_history(tape, cfg_.attention, h_T, entries, params_.D, params_.S, ex.role,
                                     params_.attention);
    }

    case ContextModel::lstm_summary: {
      out.kind = attn::Kind::none;
      if (ex.histories.empty()) {
        out.s_hist = tape.zeros(out.dim);
        return out;
      }
      std::vector<std::size_t> seq;
      for (auto it = ex.histories.rbegin(); it != ex.histories.rend(); ++it) {
        seq.push_back(corpus::Vocabulary::speaker_tag(it->role));
        seq.insert(seq.end(), it->tokens.begin(), it->tokens.end());
      }
      out.s_hist = encode_words(tape, *params_.history_encoder, seq, std::nullopt);
      return out;
    }

    case ContextModel::lstm_attention: {
      out.kind = attn::Kind::content;
      if (ex.histories.empty()) {
        out.s_hist = tape.zeros(out.dim);
        return out;
      }
      std::vector<attn::HistoryEntry> entries;
      std::vector<ad::Var> encoded, scores;
      for (const auto& h : ex.histories) {
        const ad::Var e = encode_words(tape, *params_.history_encoder, h.tokens, std::nullopt);
        encoded.push_back(e);
        entries.push_back({e, h.distance, h.role});
        scores.push_back(attn::score_time(tape, h_T, e, std::nullopt, params_.attention));
      }
      auto pooled = attn::pool_sentence(tape, entries, encoded, tape.concat(scores), cfg_.dim, "history");
      out.s_hist = pooled.vector;
      out.weights = std::move(pooled.weights);
      return out;
    }
  }
  return out;
}

ad::Var Model::predict_logits(ad::Tape& tape, std::span<const std::size_t> tokens, std::optional<ad::Var> s_hist) {
  const std::size_t got = s_hist ? tape.dim(*s_hist) : 0;
  if (got != cfg_.history_dim())
    throw DimensionError("history summary has " + std::to_string(got) + " entries, model was built for " +
                         std::to_string(cfg_.history_dim()));
  const ad::Var summary = encode_words(tape, params_.prediction_encoder, tokens, s_hist);
  return tape.add(tape.matvec(tape.leaf(params_.output_W), summary), tape.leaf(params_.output_b));
}

ad::Var Model::loss(ad::Tape& tape, ad::Var logits, const Example& ex) {
  if (cfg_.label_mode == LabelMode::single_label) {
    if (ex.gold.size() != 1)
      throw DataError("single-label mode needs exactly one gold label, got " + std::to_string(ex.gold.size()));
    return tape.softmax_cross_entropy(logits, ex.gold[0]);
  }
  std::vector<double> target(label_count(), 0.0);
  for (std::size_t l : ex.gold) target.at(l) = 1.0;
  return tape.bce_with_logits(logits, target);
}

Forward Model::forward(ad::Tape& tape, const Example& ex) {
  Forward f;
  f.h_T = summarize_current(tape, ex.tokens);
  f.history = summarize_history(tape, ex, f.h_T);
  f.logits = predict_logits(tape, ex.tokens, f.history.dim ? std::optional(f.history.s_hist) : std::nullopt);
  return f;
}

Prediction Model::from_logits(std::span<const double> z) const {
  Prediction p;
  p.logits.assign(z.begin(), z.end());
  p.probabilities.resize(z.size());
  if (cfg_.label_mode == LabelMode::single_label) {
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (p.probabilities[i] = std::exp(z[i] - mx));
    for (double& v : p.probabilities) v /= s;
  } else {
    for (std::size_t i = 0; i < z.size(); ++i) p.probabilities[i] = 1.0 / (1.0 + std::exp(-z[i]));
  }
  p.decided = decide(p.probabilities, cfg_);
  return p;
}

Prediction Model::predict(ad::Tape& tape, const Example& ex) {
  const Forward f = forward(tape, ex);
  return from_logits(tape.value(f.logits));
}

Prediction Model::predict(const Example& ex) {
  ad::Tape tape;
  return predict(tape, ex);
}

}  // namespace ctxslu::model
