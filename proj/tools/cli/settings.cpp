#include "cli/settings.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>

#include "ctxslu/error.hpp"

namespace ctxslu::cli {

namespace {

constexpr std::array kKeys{
    // generator
    "n_dialogues", "turns_per_dialogue", "vocab_size", "label_count", "decay_profile", "role_bias", "noise_rate",
    "scheme", "min_tokens", "max_tokens",
    // data
    "corpus", "split", "split_seed", "train_corpus", "valid_corpus", "test_corpus", "embeddings",
    // model
    "word_dim", "dim", "context_length", "context", "attention", "level", "speaker_indicator", "history_repr",
    "label_mode", "decision", "threshold",
    // training
    "seed", "batch_size", "max_epochs", "patience", "lr", "beta1", "beta2", "eps", "clip_norm",
    // eval / inspection
    "checkpoint", "select",
    // ablation
    "grid", "grid_kinds", "grid_levels", "grid_speaker", "baselines", "n_runs"};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("key '" + std::string(key) + "': expected " + std::string(want) + ", got '" + std::string(value) +
                    "'");
}

template <class T>
T number(std::string_view key, std::string_view text, std::string_view want) {
  const auto v = trim(text);
  T out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || end != v.data() + v.size()) bad_value(key, text, want);
  return out;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.emplace_back(trim(text.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::string normalize_key(std::string_view key) {
  std::string k(trim(key));
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

bool is_known_key(std::string_view key) {
  return std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end();
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out(kKeys.begin(), kKeys.end());
  std::sort(out.begin(), out.end());
  return out;
}

void Settings::set(std::string_view key, std::string value) {
  const auto k = normalize_key(key);
  if (!is_known_key(k)) throw ConfigError("unknown setting '" + k + "'");
  values_[k] = std::string(trim(value));
}

void Settings::merge(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(n, "expected key = value");
    const auto k = normalize_key(t.substr(0, eq));
    if (k.empty()) throw ParseError(n, "empty key");
    if (!is_known_key(k)) throw ParseError(n, "unknown setting '" + k + "'");
    values_[k] = std::string(trim(t.substr(eq + 1)));
  }
}

void Settings::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  merge(in);
}

void Settings::merge_args(std::span<const std::string> args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string_view a = args[i];
    if (a.size() < 3 || a.substr(0, 2) != "--") throw UsageError("unexpected argument '" + args[i] + "'");
    a.remove_prefix(2);
    if (const auto eq = a.find('='); eq != std::string_view::npos) {
      set(a.substr(0, eq), std::string(a.substr(eq + 1)));
    } else {
      if (i + 1 == args.size()) throw UsageError("missing value for --" + std::string(a));
      set(a, args[++i]);
    }
  }
}

bool Settings::has(std::string_view key) const { return values_.find(key) != values_.end(); }

std::optional<std::string> Settings::raw(std::string_view key) const {
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  return std::nullopt;
}

std::string Settings::text(std::string_view key, std::string fallback) const {
  return raw(key).value_or(std::move(fallback));
}

std::size_t Settings::count(std::string_view key, std::size_t fallback) const {
  const auto v = raw(key);
  return v ? number<std::size_t>(key, *v, "a non-negative integer") : fallback;
}

std::uint64_t Settings::u64(std::string_view key, std::uint64_t fallback) const {
  const auto v = raw(key);
  return v ? number<std::uint64_t>(key, *v, "a non-negative integer") : fallback;
}

double Settings::real(std::string_view key, double fallback) const {
  const auto v = raw(key);
  return v ? number<double>(key, *v, "a number") : fallback;
}

std::vector<double> Settings::reals(std::string_view key, std::vector<double> fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) out.push_back(number<double>(key, item, "comma-separated numbers"));
  return out;
}

std::vector<std::string> Settings::words(std::string_view key, std::vector<std::string> fallback) const {
  const auto v = raw(key);
  return v ? split_list(*v) : fallback;
}

corpus::GeneratorSpec generator_spec(const Settings& s) {
  corpus::GeneratorSpec g;
  g.n_dialogues = s.count("n_dialogues", g.n_dialogues);
  g.turns_per_dialogue = s.count("turns_per_dialogue", g.turns_per_dialogue);
  g.vocab_size = s.count("vocab_size", g.vocab_size);
  g.label_count = s.count("label_count", g.label_count);
  g.decay_profile = s.reals("decay_profile", g.decay_profile);
  g.role_bias = s.real("role_bias", g.role_bias);
  g.noise_rate = s.real("noise_rate", g.noise_rate);
  g.seed = s.u64("seed", g.seed);
  if (auto v = s.raw("scheme")) g.scheme = corpus::parse_label_scheme(*v);
  g.min_tokens = s.count("min_tokens", g.min_tokens);
  g.max_tokens = s.count("max_tokens", g.max_tokens);
  return g;
}

void apply_model_keys(const Settings& s, model::ModelConfig& cfg) {
  cfg.word_dim = s.count("word_dim", cfg.word_dim);
  cfg.dim = s.count("dim", cfg.dim);
  cfg.context_length = s.count("context_length", cfg.context_length);
  if (auto v = s.raw("context")) cfg.context = model::parse_context_model(*v);
  if (auto v = s.raw("attention")) cfg.attention.kind = attn::parse_kind(*v);
  if (auto v = s.raw("level")) cfg.attention.level = attn::parse_level(*v);
  if (auto v = s.raw("speaker_indicator")) cfg.attention.speaker_indicator = attn::parse_speaker_indicator(*v);
  if (auto v = s.raw("history_repr")) cfg.attention.history_repr = attn::parse_history_repr(*v);
  if (auto v = s.raw("label_mode")) cfg.label_mode = model::parse_label_mode(*v);
  if (auto v = s.raw("decision")) cfg.decision = model::parse_decision_rule(*v);
  cfg.threshold = s.real("threshold", cfg.threshold);
}

train::TrainConfig train_config(const Settings& s) {
  train::TrainConfig c;
  apply_model_keys(s, c.model);
  c.seed = s.u64("seed", c.seed);
  c.batch_size = s.count("batch_size", c.batch_size);
  c.max_epochs = s.count("max_epochs", c.max_epochs);
  c.patience = s.count("patience", c.patience);
  c.adam.lr = s.real("lr", c.adam.lr);
  c.adam.beta1 = s.real("beta1", c.adam.beta1);
  c.adam.beta2 = s.real("beta2", c.adam.beta2);
  c.adam.eps = s.real("eps", c.adam.eps);
  c.clip_norm = s.real("clip_norm", c.clip_norm);
  if (auto v = s.raw("embeddings"); v && !v->empty()) c.embeddings = *v;
  c.validate();
  return c;
}

corpus::Splits load_splits(const Settings& s) {
  if (s.has("train_corpus")) {
    if (s.has("corpus")) throw ConfigError("give either corpus or train_corpus/valid_corpus, not both");
    if (!s.has("valid_corpus")) throw ConfigError("train_corpus needs valid_corpus");
    corpus::Splits out;
    out.train = corpus::load_corpus(*s.raw("train_corpus"));
    out.valid = corpus::load_corpus(*s.raw("valid_corpus"));
    if (auto t = s.raw("test_corpus")) out.test = corpus::load_corpus(*t);
    return out;
  }
  const auto path = s.raw("corpus");
  if (!path) throw ConfigError("no corpus given (set corpus or train_corpus/valid_corpus)");
  const auto f = s.reals("split", {0.6, 0.2, 0.2});
  if (f.size() != 3) throw ConfigError("key 'split': expected three fractions");
  return corpus::split(corpus::load_corpus(*path), {f[0], f[1], f[2]}, s.u64("split_seed", 1));
}

}  // namespace ctxslu::cli
