#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ctxslu {

enum class Role : std::uint8_t { guide = 0, tourist = 1 };

std::string_view to_string(Role r);
Role parse_role(std::string_view s);

}  // namespace ctxslu

namespace ctxslu::attn {

enum class Kind : std::uint8_t { none, content, time, content_plus_time, content_x_time };
enum class Level : std::uint8_t { sentence, role };
/// Which scores receive the current-speaker vector.
enum class SpeakerIndicator : std::uint8_t { off, time_only, content_only, both };
/// Per-entry pooled vector: u_t alone, or u_t ⊕ d_t.
enum class HistoryRepr : std::uint8_t { intent_only, intent_and_distance };

std::string_view to_string(Kind k);
std::string_view to_string(Level l);
std::string_view to_string(SpeakerIndicator s);
std::string_view to_string(HistoryRepr r);
Kind parse_kind(std::string_view s);
Level parse_level(std::string_view s);
SpeakerIndicator parse_speaker_indicator(std::string_view s);
HistoryRepr parse_history_repr(std::string_view s);

/// One point of the attention ablation grid.
struct AttentionConfig {
  Kind kind = Kind::time;
  Level level = Level::role;
  SpeakerIndicator speaker_indicator = SpeakerIndicator::off;
  HistoryRepr history_repr = HistoryRepr::intent_and_distance;

  /// Throws ConfigError for combinations outside the grid: none never takes an
  /// indicator; time_only/content_only only apply to content_plus_time.
  void validate() const;
  bool valid() const noexcept;

  bool time_uses_speaker() const noexcept;
  bool content_uses_speaker() const noexcept;

  /// Size of s_hist for a model dimension `dim`.
  std::size_t summary_dim(std::size_t dim) const noexcept;

  /// Row label in ablation tables, e.g. "Content + *Time*" (starred = speaker-involved part).
  std::string row_name() const;

  friend bool operator==(const AttentionConfig&, const AttentionConfig&) = default;
};

/// The valid kind/indicator combinations, in table order (11 rows), for one level and repr.
std::vector<AttentionConfig> grid_rows(Level level, HistoryRepr repr);

}  // namespace ctxslu::attn
