#include "ctxslu/corpus/generator.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "ctxslu/error.hpp"

namespace ctxslu::corpus {

std::string_view to_string(LabelScheme s) {
  return s == LabelScheme::copy ? "copy" : "act_reference";
}

LabelScheme parse_label_scheme(std::string_view s) {
  if (s == "copy") return LabelScheme::copy;
  if (s == "act_reference") return LabelScheme::act_reference;
  throw ConfigError("unknown label scheme '" + std::string(s) + "'");
}

void GeneratorSpec::validate() const {
  if (n_dialogues == 0) throw ConfigError("n_dialogues must be at least 1");
  if (turns_per_dialogue == 0) throw ConfigError("turns_per_dialogue must be at least 1");
  if (label_count == 0) throw ConfigError("label_count must be at least 1");
  if (vocab_size < label_count) throw ConfigError("vocab_size must be at least label_count");
  if (decay_profile.empty()) throw ConfigError("decay_profile must not be empty");
  double sum = 0.0;
  for (double p : decay_profile) {
    if (!(p >= 0.0)) throw ConfigError("decay_profile entries must be non-negative");
    sum += p;
  }
  if (sum > 1.0 + 1e-12) throw ConfigError("decay_profile sums to more than 1");
  if (!(role_bias >= 0.0 && role_bias <= 1.0)) throw ConfigError("role_bias must lie in [0, 1]");
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("noise_rate must lie in [0, 1]");
  if (min_tokens == 0 || max_tokens < min_tokens) throw ConfigError("need 1 <= min_tokens <= max_tokens");
}

namespace {

std::string numbered(const char* prefix, std::size_t n) { return prefix + std::to_string(n); }

class DialogueBuilder {
 public:
  DialogueBuilder(const GeneratorSpec& spec, std::mt19937_64& rng) : spec_(spec), rng_(rng) {}

  Dialogue build(std::size_t index) {
    char id[32];
    std::snprintf(id, sizeof id, "syn-%05zu", index);
    Dialogue d{id, {}};
    roles_.clear();
    acts_.clear();
    const Role first = coin(0.5) ? Role::guide : Role::tourist;
    for (std::size_t t = 0; t < spec_.turns_per_dialogue; ++t) {
      const Role role = (t % 2 == 0) ? first : (first == Role::guide ? Role::tourist : Role::guide);
      roles_.push_back(role);
      d.turns.push_back(turn(t, role));
    }
    return d;
  }

 private:
  bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  std::size_t uniform(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  /// Index of the turn whose act is copied, or -1 for a uniform draw.
  long source(std::size_t t) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    double acc = 0.0;
    std::size_t j = 0;
    for (std::size_t k = 0; k < spec_.decay_profile.size(); ++k) {
      acc += spec_.decay_profile[k];
      if (u < acc) {
        j = k + 1;
        break;
      }
    }
    if (j == 0 || j > t) return -1;
    const bool redirect = coin(spec_.role_bias);
    if (redirect) {
      for (std::size_t k = j; k <= std::min(t, spec_.decay_profile.size()); ++k)
        if (roles_[t - k] == Role::guide) return static_cast<long>(t - k);
    }
    return static_cast<long>(t - j);
  }

  std::vector<std::string> tokens_for(std::size_t label) {
    const std::size_t n = spec_.min_tokens + uniform(spec_.max_tokens - spec_.min_tokens + 1);
    // cue words are w_m with m ≡ label (mod label_count)
    const std::size_t cues = (spec_.vocab_size - 1 - label) / spec_.label_count + 1;
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (coin(spec_.noise_rate))
        out.push_back(numbered("w", uniform(spec_.vocab_size)));
      else
        out.push_back(numbered("w", label + spec_.label_count * uniform(cues)));
    }
    return out;
  }

  Turn turn(std::size_t t, Role role) {
    Turn out;
    out.speaker = role;
    const long src = source(t);
    if (spec_.scheme == LabelScheme::copy) {
      const std::size_t label = src < 0 ? uniform(spec_.label_count) : acts_[static_cast<std::size_t>(src)];
      acts_.push_back(label);
      out.tokens = tokens_for(label);
      out.labels = {numbered("L", label)};
    } else {
      const std::size_t ref = src < 0 ? uniform(spec_.label_count) : acts_[static_cast<std::size_t>(src)];
      const std::size_t act = uniform(spec_.label_count);
      acts_.push_back(act);
      out.tokens = tokens_for(act);
      out.labels = {numbered("act", act), numbered("ref", ref)};
    }
    return out;
  }

  const GeneratorSpec& spec_;
  std::mt19937_64& rng_;
  std::vector<Role> roles_;
  std::vector<std::size_t> acts_;
};

}  // namespace

std::vector<Dialogue> generate(const GeneratorSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  DialogueBuilder builder(spec, rng);
  std::vector<Dialogue> out;
  out.reserve(spec.n_dialogues);
  for (std::size_t i = 0; i < spec.n_dialogues; ++i) out.push_back(builder.build(i));
  return out;
}

}  // namespace ctxslu::corpus
