#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxslu/corpus/generator.hpp"
#include "ctxslu/model/model.hpp"
#include "ctxslu/train/trainer.hpp"

namespace ctxslu::cli {

/// Maps '-' to '_' so `--speaker-indicator` and `speaker_indicator = ...` name the same key.
std::string normalize_key(std::string_view key);

bool is_known_key(std::string_view key);
/// Every accepted key, sorted.
std::vector<std::string> known_keys();

/// Flat key=value settings. Later assignments win, so loading the config file
/// before applying command-line overrides gives defaults < file < command line.
class Settings {
 public:
  /// Throws ConfigError for keys outside known_keys().
  void set(std::string_view key, std::string value);

  /// `key = value` lines; blank lines and lines starting with '#' are skipped.
  /// Throws ParseError with the line number for anything else.
  void merge(std::istream& in);
  void merge_file(const std::filesystem::path& path);

  /// `--key value` or `--key=value` pairs left over after the fixed flags.
  void merge_args(std::span<const std::string> args);

  bool has(std::string_view key) const;
  std::optional<std::string> raw(std::string_view key) const;

  std::string text(std::string_view key, std::string fallback) const;
  std::size_t count(std::string_view key, std::size_t fallback) const;
  std::uint64_t u64(std::string_view key, std::uint64_t fallback) const;
  double real(std::string_view key, double fallback) const;
  /// Comma-separated values; an empty value gives an empty list.
  std::vector<double> reals(std::string_view key, std::vector<double> fallback) const;
  std::vector<std::string> words(std::string_view key, std::vector<std::string> fallback) const;

  using Map = std::map<std::string, std::string, std::less<>>;
  const Map& values() const noexcept { return values_; }

 private:
  Map values_;
};

corpus::GeneratorSpec generator_spec(const Settings& s);

/// Overwrites the fields of `cfg` whose keys are present.
void apply_model_keys(const Settings& s, model::ModelConfig& cfg);
train::TrainConfig train_config(const Settings& s);

/// Either `corpus` split by `split` fractions with `split_seed`, or explicit
/// `train_corpus` / `valid_corpus` / optional `test_corpus` files.
corpus::Splits load_splits(const Settings& s);

}  // namespace ctxslu::cli
