#pragma once

#include <filesystem>
#include <optional>

#include "ctxslu/corpus/vocab.hpp"
#include "ctxslu/model/model.hpp"

namespace ctxslu::model {

/// File layout: the 8 bytes "CTXSLUCK", a little-endian u32 format version, a
/// little-endian u64 manifest length, the JSON manifest, then every tensor's values
/// as little-endian f64 in manifest order.
///
/// The manifest holds the model config, vocabulary and label list with their
/// fingerprints, and a table of (name, shape) for each tensor.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  corpus::Vocabulary vocab;
  corpus::LabelSet labels;
  Model model;
};

void save_checkpoint(const std::filesystem::path& path, Model& model, const corpus::Vocabulary& vocab,
                     const corpus::LabelSet& labels);

/// Throws DataError for a bad magic, unsupported version, truncated data, corrupt
/// manifest or tensor table that disagrees with the config. When `expected` is
/// given, a config that differs from it is also rejected.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<ModelConfig>& expected = std::nullopt);

}  // namespace ctxslu::model
