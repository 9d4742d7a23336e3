#include "ctxslu/attention/config.hpp"

#include "ctxslu/error.hpp"

namespace ctxslu {

std::string_view to_string(Role r) { return r == Role::guide ? "guide" : "tourist"; }

Role parse_role(std::string_view s) {
  if (s == "guide") return Role::guide;
  if (s == "tourist") return Role::tourist;
  throw DataError("unknown speaker '" + std::string(s) + "'");
}

}  // namespace ctxslu

namespace ctxslu::attn {

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::none: return "none";
    case Kind::content: return "content";
    case Kind::time: return "time";
    case Kind::content_plus_time: return "content_plus_time";
    case Kind::content_x_time: return "content_x_time";
  }
  return "?";
}

std::string_view to_string(Level l) { return l == Level::sentence ? "sentence" : "role"; }

std::string_view to_string(SpeakerIndicator s) {
  switch (s) {
    case SpeakerIndicator::off: return "off";
    case SpeakerIndicator::time_only: return "time_only";
    case SpeakerIndicator::content_only: return "content_only";
    case SpeakerIndicator::both: return "both";
  }
  return "?";
}

std::string_view to_string(HistoryRepr r) {
  return r == HistoryRepr::intent_only ? "intent_only" : "intent_and_distance";
}

Kind parse_kind(std::string_view s) {
  for (Kind k : {Kind::none, Kind::content, Kind::time, Kind::content_plus_time, Kind::content_x_time})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown attention kind '" + std::string(s) + "'");
}

Level parse_level(std::string_view s) {
  if (s == "sentence") return Level::sentence;
  if (s == "role") return Level::role;
  throw ConfigError("unknown attention level '" + std::string(s) + "'");
}

SpeakerIndicator parse_speaker_indicator(std::string_view s) {
  for (auto v : {SpeakerIndicator::off, SpeakerIndicator::time_only, SpeakerIndicator::content_only,
                 SpeakerIndicator::both})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown speaker indicator '" + std::string(s) + "'");
}

HistoryRepr parse_history_repr(std::string_view s) {
  if (s == "intent_only") return HistoryRepr::intent_only;
  if (s == "intent_and_distance") return HistoryRepr::intent_and_distance;
  throw ConfigError("unknown history representation '" + std::string(s) + "'");
}

bool AttentionConfig::valid() const noexcept {
  switch (speaker_indicator) {
    case SpeakerIndicator::off: return true;
    case SpeakerIndicator::both: return kind != Kind::none;
    case SpeakerIndicator::time_only:
    case SpeakerIndicator::content_only: return kind == Kind::content_plus_time;
  }
  return false;
}

void AttentionConfig::validate() const {
  if (!valid())
    throw ConfigError("speaker indicator '" + std::string(to_string(speaker_indicator)) +
                      "' is not valid with attention kind '" + std::string(to_string(kind)) + "'");
}

bool AttentionConfig::time_uses_speaker() const noexcept {
  return speaker_indicator == SpeakerIndicator::both || speaker_indicator == SpeakerIndicator::time_only;
}

bool AttentionConfig::content_uses_speaker() const noexcept {
  return speaker_indicator == SpeakerIndicator::both || speaker_indicator == SpeakerIndicator::content_only;
}

std::size_t AttentionConfig::summary_dim(std::size_t dim) const noexcept {
  std::size_t d = history_repr == HistoryRepr::intent_only ? dim : 2 * dim;
  if (level == Level::role) d *= 2;
  if (kind == Kind::content_plus_time) d *= 2;
  return d;
}

std::string AttentionConfig::row_name() const {
  const bool s = speaker_indicator != SpeakerIndicator::off;
  switch (kind) {
    case Kind::none: return "no attention";
    case Kind::content: return s ? "*Content*" : "Content";
    case Kind::time: return s ? "*Time*" : "Time";
    case Kind::content_x_time: return s ? "*Content x Time*" : "Content x Time";
    case Kind::content_plus_time: {
      std::string c = content_uses_speaker() ? "*Content*" : "Content";
      std::string t = time_uses_speaker() ? "*Time*" : "Time";
      return c + " + " + t;
    }
  }
  return "?";
}

std::vector<AttentionConfig> grid_rows(Level level, HistoryRepr repr) {
  using SI = SpeakerIndicator;
  const std::pair<Kind, SI> rows[] = {
      {Kind::none, SI::off},
      {Kind::content, SI::off},
      {Kind::content, SI::both},
      {Kind::time, SI::off},
      {Kind::time, SI::both},
      {Kind::content_plus_time, SI::off},
      {Kind::content_plus_time, SI::content_only},
      {Kind::content_plus_time, SI::time_only},
      {Kind::content_plus_time, SI::both},
      {Kind::content_x_time, SI::off},
      {Kind::content_x_time, SI::both},
  };
  std::vector<AttentionConfig> out;
  for (auto [k, s] : rows) out.push_back({k, level, s, repr});
  return out;
}

}  // namespace ctxslu::attn
