#include "ctxslu/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "ctxslu/error.hpp"

namespace ctxslu::corpus {

namespace {

using nlohmann::json;

Turn parse_turn(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "turn is not an object");
  Turn t;
  try {
    t.speaker = parse_role(j.at("speaker").get<std::string>());
    t.tokens = j.at("tokens").get<std::vector<std::string>>();
    t.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(line, e.what());
  } catch (const DataError& e) {
    throw DataError("line " + std::to_string(line) + ": " + e.what());
  }
  if (t.tokens.empty()) throw DataError("line " + std::to_string(line) + ": turn has no tokens");
  if (t.labels.empty()) throw DataError("line " + std::to_string(line) + ": turn has no labels");
  std::vector<std::string> seen;
  for (const auto& l : t.labels)
    if (std::find(seen.begin(), seen.end(), l) == seen.end()) seen.push_back(l);
  t.labels = std::move(seen);
  return t;
}

json turn_json(const Turn& t) {
  return json{{"speaker", std::string(to_string(t.speaker))}, {"tokens", t.tokens}, {"labels", t.labels}};
}

}  // namespace

std::vector<Dialogue> read_corpus(std::istream& in) {
  std::vector<Dialogue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("turns") || !j["turns"].is_array() ||
        !j["id"].is_string())
      throw ParseError(line_no, "expected {\"id\": str, \"turns\": [...]}");
    Dialogue d;
    d.id = j["id"].get<std::string>();
    for (const auto& tj : j["turns"]) d.turns.push_back(parse_turn(tj, line_no));
    if (d.turns.empty()) throw DataError("line " + std::to_string(line_no) + ": dialogue has no turns");
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Dialogue> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return read_corpus(in);
}

void write_corpus(std::ostream& out, std::span<const Dialogue> dialogues) {
  for (const auto& d : dialogues) {
    json turns = json::array();
    for (const auto& t : d.turns) turns.push_back(turn_json(t));
    out << json{{"id", d.id}, {"turns", std::move(turns)}}.dump() << '\n';
  }
}

void save_corpus(const std::filesystem::path& path, std::span<const Dialogue> dialogues) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  write_corpus(out, dialogues);
}

std::vector<ContextWindow> build_windows(const Dialogue& d, std::size_t context_length) {
  if (context_length == 0) throw ConfigError("context length must be at least 1");
  std::vector<ContextWindow> out;
  out.reserve(d.turns.size());
  for (std::size_t k = 0; k < d.turns.size(); ++k) {
    ContextWindow w{d.id, k, d.turns[k], {}};
    const std::size_t n = std::min(k, context_length);
    for (std::size_t j = 1; j <= n; ++j) w.histories.push_back({d.turns[k - j], j});
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<ContextWindow> build_windows(std::span<const Dialogue> dialogues, std::size_t context_length) {
  std::vector<ContextWindow> out;
  for (const auto& d : dialogues) {
    auto w = build_windows(d, context_length);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

Splits split(std::span<const Dialogue> dialogues, const std::array<double, 3>& fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  const std::size_t n = dialogues.size();
  const auto nonzero = static_cast<std::size_t>(std::count_if(fractions.begin(), fractions.end(),
                                                              [](double f) { return f > 0.0; }));
  if (n < nonzero)
    throw DataError("cannot split " + std::to_string(n) + " dialogues into " + std::to_string(nonzero) +
                    " non-empty parts");

  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = fractions[k] * static_cast<double>(n);
    // Snap values like 14.000000000000002 before flooring.
    const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : exact;
    sizes[k] = static_cast<std::size_t>(std::floor(snapped));
    remainder[k] = snapped - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3) {
    if (fractions[order[k]] > 0.0) {
      ++sizes[order[k]];
      ++assigned;
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    if (fractions[k] > 0.0 && sizes[k] == 0) {
      auto donor = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      --sizes[donor];
      ++sizes[k];
    }
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  Splits out;
  std::array<std::vector<Dialogue>*, 3> parts{&out.train, &out.valid, &out.test};
  std::size_t at = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<std::size_t> mine(idx.begin() + static_cast<std::ptrdiff_t>(at),
                                  idx.begin() + static_cast<std::ptrdiff_t>(at + sizes[k]));
    std::sort(mine.begin(), mine.end());
    for (auto i : mine) parts[k]->push_back(dialogues[i]);
    at += sizes[k];
  }
  return out;
}

}  // namespace ctxslu::corpus
