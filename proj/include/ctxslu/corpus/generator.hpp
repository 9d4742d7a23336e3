#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctxslu/corpus/corpus.hpp"

namespace ctxslu::corpus {

/// How turn labels are derived from the history.
///
/// copy: one label per turn. With probability decay_profile[j-1] it copies the
///   label of the turn j back (subject to role_bias), otherwise it is uniform.
/// act_reference: two labels per turn. "act<k>" is drawn uniformly and is what the
///   words express; "ref<k>" is chosen by the copy rule above but copies the act of
///   the source turn, so it can only be recovered from the history.
enum class LabelScheme : std::uint8_t { copy, act_reference };

std::string_view to_string(LabelScheme s);
LabelScheme parse_label_scheme(std::string_view s);

struct GeneratorSpec {
  std::size_t n_dialogues = 100;
  std::size_t turns_per_dialogue = 20;
  std::size_t vocab_size = 60;
  std::size_t label_count = 6;
  std::vector<double> decay_profile{0.5, 0.25, 0.1, 0.05, 0.0, 0.0, 0.0};
  double role_bias = 0.0;  // chance a copy is redirected to the nearest guide turn at or beyond j
  double noise_rate = 0.0; // per-token chance of a uniformly random word
  std::uint64_t seed = 1;
  LabelScheme scheme = LabelScheme::copy;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 6;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Speakers alternate, starting with a per-dialogue random role. Word `w<n>` cues
/// label n mod label_count. Output depends only on the spec.
std::vector<Dialogue> generate(const GeneratorSpec& spec);

}  // namespace ctxslu::corpus
