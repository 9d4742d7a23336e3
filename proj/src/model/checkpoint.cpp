#include "ctxslu/model/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ctxslu/error.hpp"

namespace ctxslu::model {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'T', 'X', 'S', 'L', 'U', 'C', 'K'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t& at) {
  if (buf.size() - at < sizeof(T)) throw DataError("checkpoint is truncated");
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  at += sizeof(T);
  return to_little(v);
}

std::string hex(std::uint64_t v) {
  char b[17];
  std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(v));
  return b;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model, const corpus::Vocabulary& vocab,
                     const corpus::LabelSet& labels) {
  if (vocab.size() != model.vocab_size() || labels.size() != model.label_count())
    throw DimensionError("checkpoint: vocabulary or label set does not match the model");
  const auto tensors = model.params().named(model.config());
  json table = json::array();
  for (const auto& [name, t] : tensors) table.push_back({{"name", name}, {"shape", t->shape()}});
  const json manifest{{"config", model.config().to_json()},
                      {"vocab", vocab.words()},
                      {"vocab_hash", hex(corpus::fingerprint(vocab.words()))},
                      {"labels", labels.names()},
                      {"labels_hash", hex(corpus::fingerprint(labels.names()))},
                      {"tensors", std::move(table)}};
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors)
    for (double v : t->values()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  std::size_t at = sizeof kMagic;
  const auto version = get<std::uint32_t>(buf, at);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get<std::uint64_t>(buf, at);
  if (buf.size() - at < len) throw DataError("checkpoint is truncated");

  json manifest;
  try {
    manifest = json::parse(buf.substr(at, len));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest is corrupt: ") + e.what());
  }
  at += len;

  ModelConfig cfg;
  std::vector<std::string> words, names;
  try {
    cfg = ModelConfig::from_json(manifest.at("config"));
    words = manifest.at("vocab").get<std::vector<std::string>>();
    names = manifest.at("labels").get<std::vector<std::string>>();
    if (manifest.at("vocab_hash").get<std::string>() != hex(corpus::fingerprint(words)) ||
        manifest.at("labels_hash").get<std::string>() != hex(corpus::fingerprint(names)))
      throw DataError("checkpoint vocabulary fingerprint mismatch");
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest is incomplete: ") + e.what());
  }
  if (expected && !(*expected == cfg))
    throw DataError("checkpoint config differs from the requested config: " + cfg.to_json().dump());

  corpus::Vocabulary vocab;
  for (std::size_t i = 4; i < words.size(); ++i) vocab.add(words[i]);
  if (vocab.words() != words) throw DataError("checkpoint vocabulary lacks the reserved entries");
  corpus::LabelSet labels(names);
  if (labels.names() != names) throw DataError("checkpoint label list is not sorted and unique");

  // Storage of the right shape; every value is overwritten from the file.
  std::mt19937_64 rng(0);
  ModelParams params = ModelParams::init(cfg, vocab.size(), labels.size(), rng);
  const auto tensors = params.named(cfg);
  const json table = manifest.value("tensors", json());
  if (!table.is_array() || table.size() != tensors.size())
    throw DataError("checkpoint tensor table does not match the config");
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto& [name, t] = tensors[k];
    bool same = false;
    try {
      same = table[k].at("name").get<std::string>() == name && table[k].at("shape").get<ad::Shape>() == t->shape();
    } catch (const json::exception&) {
    }
    if (!same) throw DataError("checkpoint tensor " + std::to_string(k) + " does not match '" + name + "'");
    for (double& v : t->values()) v = std::bit_cast<double>(get<std::uint64_t>(buf, at));
  }
  if (at != buf.size()) throw DataError("checkpoint has trailing bytes");
  return {std::move(vocab), std::move(labels), Model(cfg, std::move(params))};
}

}  // namespace ctxslu::model
