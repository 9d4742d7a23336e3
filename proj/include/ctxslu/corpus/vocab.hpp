#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxslu/autodiff/tensor.hpp"
#include "ctxslu/corpus/corpus.hpp"

namespace ctxslu::corpus {

/// Word vocabulary. Ids 0..3 are reserved: <unk>, <pad>, and the two speaker tags
/// used as separators when history utterances are concatenated.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kPad = 1;
  static constexpr std::size_t kGuideTag = 2;
  static constexpr std::size_t kTouristTag = 3;
  static constexpr std::size_t kReserved = 2;  // ids never filled from embedding files

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> words);

  /// Words in order of first appearance.
  static Vocabulary build(std::span<const Dialogue> dialogues);

  std::size_t add(const std::string& word);
  /// Unknown words map to kUnk.
  std::size_t id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;
  static std::size_t speaker_tag(Role r) { return r == Role::guide ? kGuideTag : kTouristTag; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Semantic label inventory, sorted for stable ids.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);
  static LabelSet build(std::span<const Dialogue> dialogues);

  std::optional<std::size_t> id(std::string_view name) const;
  const std::string& name(std::size_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// FNV-1a over the newline-joined strings; identifies a vocabulary in checkpoints.
std::uint64_t fingerprint(std::span<const std::string> items);

struct EmbeddingLoad {
  ad::Tensor table;  // [dim x |V|]
  std::size_t covered = 0;  // vocabulary words (excluding <unk>/<pad>) found in the file
  std::vector<std::string> warnings;
};

/// Random table, uniform in [-0.05, 0.05].
ad::Tensor random_embeddings(std::size_t dim, std::size_t vocab_size, std::mt19937_64& rng);

/// Reads `word v1 ... v_dim` lines. Matched words are copied in, everything else
/// stays randomly initialised. Repeated words: the last occurrence wins and a
/// warning is recorded. A line with the wrong number of values raises ParseError.
EmbeddingLoad load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                              std::mt19937_64& rng);

}  // namespace ctxslu::corpus
