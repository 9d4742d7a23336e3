#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ctxslu/attention/config.hpp"

namespace ctxslu::corpus {

struct Turn {
  Role speaker = Role::guide;
  std::vector<std::string> tokens;  // non-empty, pre-split
  std::vector<std::string> labels;  // non-empty, no duplicates

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;  // at least one

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

/// Line-delimited JSON, one dialogue per line:
/// {"id": str, "turns": [{"speaker": "guide"|"tourist", "tokens": [...], "labels": [...]}, ...]}
/// Blank lines are skipped. Malformed lines raise ParseError carrying the line number.
std::vector<Dialogue> read_corpus(std::istream& in);
std::vector<Dialogue> load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, std::span<const Dialogue> dialogues);
void save_corpus(const std::filesystem::path& path, std::span<const Dialogue> dialogues);

struct History {
  Turn turn;
  std::size_t distance = 1;  // turns back from the current one
};

/// A turn together with the turns before it in the same dialogue. Histories are
/// ordered most recent first, so histories[j].distance == j + 1.
struct ContextWindow {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  Turn current;
  std::vector<History> histories;
};

/// One window per turn; window k sees min(k, context_length) histories.
std::vector<ContextWindow> build_windows(const Dialogue& d, std::size_t context_length);
std::vector<ContextWindow> build_windows(std::span<const Dialogue> dialogues, std::size_t context_length);

struct Splits {
  std::vector<Dialogue> train;
  std::vector<Dialogue> valid;
  std::vector<Dialogue> test;
};

/// Dialogue-level split. Part sizes use largest-remainder rounding of fraction·n; a
/// part with a nonzero fraction always receives at least one dialogue. Each part
/// keeps file order.
Splits split(std::span<const Dialogue> dialogues, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace ctxslu::corpus
