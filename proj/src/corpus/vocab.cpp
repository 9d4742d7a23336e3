#include "ctxslu/corpus/vocab.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "ctxslu/error.hpp"

namespace ctxslu::corpus {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  for (const char* w : {"<unk>", "<pad>", "<guide>", "<tourist>"}) add(w);
  for (auto& w : words) add(w);
}

Vocabulary Vocabulary::build(std::span<const Dialogue> dialogues) {
  Vocabulary v;
  for (const auto& d : dialogues)
    for (const auto& t : d.turns)
      for (const auto& w : t.tokens) v.add(w);
  return v;
}

std::size_t Vocabulary::add(const std::string& word) {
  auto [it, inserted] = index_.emplace(word, words_.size());
  if (inserted) words_.push_back(word);
  return it->second;
}

std::size_t Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  std::sort(names_.begin(), names_.end());
  names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
  for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], i);
}

LabelSet LabelSet::build(std::span<const Dialogue> dialogues) {
  std::set<std::string> all;
  for (const auto& d : dialogues)
    for (const auto& t : d.turns) all.insert(t.labels.begin(), t.labels.end());
  return LabelSet(std::vector<std::string>(all.begin(), all.end()));
}

std::optional<std::size_t> LabelSet::id(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t fingerprint(std::span<const std::string> items) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 1099511628211ull;
  };
  for (const auto& s : items) {
    for (unsigned char c : s) mix(c);
    mix('\n');
  }
  return h;
}

ad::Tensor random_embeddings(std::size_t dim, std::size_t vocab_size, std::mt19937_64& rng) {
  ad::Tensor t({dim, vocab_size}, true);
  t.fill_uniform(rng, -0.05, 0.05);
  return t;
}

EmbeddingLoad load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                              std::mt19937_64& rng) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path.string());
  EmbeddingLoad out{random_embeddings(dim, vocab.size(), rng), 0, {}};

  std::vector<bool> filled(vocab.size(), false);
  std::vector<double> vec(dim);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::size_t n = 0;
    std::string tok;
    while (ss >> tok) {
      if (n == dim) throw ParseError(line_no, "more than " + std::to_string(dim) + " values");
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), vec[n]);
      if (ec != std::errc{} || p != tok.data() + tok.size()) throw ParseError(line_no, "bad number '" + tok + "'");
      ++n;
    }
    if (n != dim)
      throw ParseError(line_no, "expected " + std::to_string(dim) + " values, got " + std::to_string(n));
    if (!vocab.contains(word)) continue;
    const std::size_t id = vocab.id(word);
    if (id < Vocabulary::kReserved) continue;
    if (filled[id]) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": duplicate word '" + word +
                             "', last occurrence wins");
    } else {
      filled[id] = true;
      ++out.covered;
    }
    out.table.set_column(id, vec);
  }
  return out;
}

}  // namespace ctxslu::corpus
