#include "ctxslu/attention/context_attention.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "ctxslu/error.hpp"

namespace ctxslu::attn {

namespace {

constexpr double kInitRange = 0.08;

ad::Var additive_score(ad::Tape& tape, std::vector<ad::Var> terms, AttentionParams& p) {
  const std::size_t dim = p.dim();
  for (ad::Var t : terms)
    if (tape.dim(t) != dim)
      throw DimensionError("attention score: operand has " + std::to_string(tape.dim(t)) +
                           " entries, expected " + std::to_string(dim));
  terms.push_back(tape.leaf(p.b));
  return tape.dot(tape.leaf(p.w), tape.tanh(tape.add(terms)));
}

std::vector<double> weights_of(const ad::Tape& tape, ad::Var w) {
  auto v = tape.value(w);
  return {v.begin(), v.end()};
}

}  // namespace

AttentionParams AttentionParams::init(std::size_t dim, std::mt19937_64& rng) {
  AttentionParams p{ad::Tensor({dim}, true), ad::Tensor({dim}, true)};
  p.w.fill_uniform(rng, -kInitRange, kInitRange);
  p.b.fill_uniform(rng, -kInitRange, kInitRange);
  return p;
}

void AttentionParams::visit(const std::string& prefix,
                            const std::function<void(const std::string&, ad::Tensor&)>& fn) {
  fn(prefix + ".w", w);
  fn(prefix + ".b", b);
}

// Operand order is fixed (h_T, u_t, d_t, s_cur) so that equal inputs give
// bit-identical sums across the three score forms.
ad::Var score_time(ad::Tape& tape, ad::Var h_T, ad::Var d_t, std::optional<ad::Var> s_cur,
                   AttentionParams& p) {
  std::vector<ad::Var> terms{h_T, d_t};
  if (s_cur) terms.push_back(*s_cur);
  return additive_score(tape, std::move(terms), p);
}

ad::Var score_content(ad::Tape& tape, ad::Var h_T, ad::Var u_t, std::optional<ad::Var> s_cur,
                      AttentionParams& p) {
  std::vector<ad::Var> terms{h_T, u_t};
  if (s_cur) terms.push_back(*s_cur);
  return additive_score(tape, std::move(terms), p);
}

ad::Var score_inseparate(ad::Tape& tape, ad::Var h_T, ad::Var u_t, ad::Var d_t,
                         std::optional<ad::Var> s_cur, AttentionParams& p) {
  std::vector<ad::Var> terms{h_T, u_t, d_t};
  if (s_cur) terms.push_back(*s_cur);
  return additive_score(tape, std::move(terms), p);
}

std::vector<ad::Var> entry_vectors(ad::Tape& tape, std::span<const HistoryEntry> entries,
                                   std::span<const ad::Var> distance_vectors, HistoryRepr repr) {
  if (distance_vectors.size() != entries.size())
    throw DimensionError("entry_vectors: one distance vector per entry required");
  std::vector<ad::Var> out;
  out.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    out.push_back(repr == HistoryRepr::intent_only ? entries[i].intent
                                                   : tape.concat(entries[i].intent, distance_vectors[i]));
  return out;
}

Pooled pool_sentence(ad::Tape& tape, std::span<const HistoryEntry> entries,
                     std::span<const ad::Var> vectors, std::optional<ad::Var> scores, std::size_t vec_dim,
                     const std::string& group) {
  if (vectors.size() != entries.size()) throw DimensionError("pool_sentence: vectors/entries mismatch");
  Pooled out;
  if (entries.empty()) {
    out.vector = tape.zeros(vec_dim);
    return out;
  }
  for (ad::Var v : vectors)
    if (tape.dim(v) != vec_dim) throw DimensionError("pool_sentence: entry vector size mismatch");
  if (!scores) {
    out.vector = tape.add(vectors);
    return out;
  }
  if (tape.dim(*scores) != entries.size()) throw DimensionError("pool_sentence: one score per entry required");
  const ad::Var w = tape.masked_softmax(*scores, std::vector<bool>(entries.size(), true));
  out.vector = tape.weighted_sum(w, vectors);
  const auto wv = weights_of(tape, w);
  for (std::size_t i = 0; i < entries.size(); ++i)
    out.weights.push_back({i, entries[i].distance, entries[i].role, group, wv[i]});
  return out;
}

Pooled pool_role(ad::Tape& tape, std::span<const HistoryEntry> entries, std::span<const ad::Var> vectors,
                 std::optional<ad::Var> scores, std::size_t vec_dim, const std::string& group) {
  if (vectors.size() != entries.size()) throw DimensionError("pool_role: vectors/entries mismatch");
  if (scores && tape.dim(*scores) != entries.size())
    throw DimensionError("pool_role: one score per entry required");
  for (ad::Var v : vectors)
    if (tape.dim(v) != vec_dim) throw DimensionError("pool_role: entry vector size mismatch");

  Pooled out;
  std::array<ad::Var, 2> halves;
  for (Role role : {Role::guide, Role::tourist}) {
    std::vector<bool> mask(entries.size());
    std::vector<ad::Var> members;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      mask[i] = entries[i].role == role;
      if (mask[i]) members.push_back(vectors[i]);
    }
    ad::Var& half = halves[static_cast<std::size_t>(role)];
    if (members.empty()) {
      half = tape.zeros(vec_dim);
      continue;
    }
    if (!scores) {
      half = tape.add(members);
      continue;
    }
    // Masked entries get weight exactly 0, so the full vector list can be pooled.
    const ad::Var w = tape.masked_softmax(*scores, mask);
    half = tape.weighted_sum(w, vectors);
    const auto wv = weights_of(tape, w);
    const std::string g = group + ":" + std::string(to_string(role));
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (mask[i]) out.weights.push_back({i, entries[i].distance, entries[i].role, g, wv[i]});
  }
  out.vector = tape.concat(halves[0], halves[1]);
  return out;
}

HistorySummary summarize_history(ad::Tape& tape, const AttentionConfig& cfg, ad::Var h_T,
                                 std::span<const HistoryEntry> entries, ad::Tensor& distance_table,
                                 ad::Tensor& speaker_table, Role current_role, AttentionParams& p) {
  cfg.validate();
  const std::size_t dim = p.dim();
  if (tape.dim(h_T) != dim) throw DimensionError("summarize_history: h_T size differs from attention dim");
  if (distance_table.rows() != dim || speaker_table.rows() != dim)
    throw DimensionError("summarize_history: embedding tables must have dim rows");

  HistorySummary out;
  out.kind = cfg.kind;
  out.dim = cfg.summary_dim(dim);
  const std::size_t vec_dim = cfg.history_repr == HistoryRepr::intent_only ? dim : 2 * dim;

  if (entries.empty()) {
    out.s_hist = tape.zeros(out.dim);
    return out;
  }

  std::vector<ad::Var> d(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const HistoryEntry& e = entries[i];
    if (tape.dim(e.intent) != dim) throw DimensionError("summarize_history: intent vector size mismatch");
    if (e.distance < 1 || e.distance > distance_table.cols())
      throw IndexError("summarize_history: distance " + std::to_string(e.distance) + " outside 1.." +
                       std::to_string(distance_table.cols()));
    d[i] = tape.embedding(distance_table, e.distance - 1);
  }
  const std::vector<ad::Var> vectors = entry_vectors(tape, entries, d, cfg.history_repr);

  std::optional<ad::Var> s_cur;
  if (cfg.speaker_indicator != SpeakerIndicator::off)
    s_cur = tape.embedding(speaker_table, static_cast<std::size_t>(current_role));

  auto collect = [&](auto&& score_one) {
    std::vector<ad::Var> s;
    s.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) s.push_back(score_one(i));
    return tape.concat(s);
  };
  auto pool = [&](std::optional<ad::Var> scores, const std::string& group) {
    return cfg.level == Level::sentence ? pool_sentence(tape, entries, vectors, scores, vec_dim, group)
                                        : pool_role(tape, entries, vectors, scores, vec_dim, group);
  };
  auto time_scores = [&] {
    const auto spk = cfg.time_uses_speaker() ? s_cur : std::nullopt;
    return collect([&](std::size_t i) { return score_time(tape, h_T, d[i], spk, p); });
  };
  auto content_scores = [&] {
    const auto spk = cfg.content_uses_speaker() ? s_cur : std::nullopt;
    return collect([&](std::size_t i) { return score_content(tape, h_T, entries[i].intent, spk, p); });
  };

  Pooled pooled;
  switch (cfg.kind) {
    case Kind::none:
      pooled = pool(std::nullopt, "none");
      break;
    case Kind::time:
      pooled = pool(time_scores(), "time");
      break;
    case Kind::content:
      pooled = pool(content_scores(), "content");
      break;
    case Kind::content_x_time:
      pooled = pool(collect([&](std::size_t i) {
                      return score_inseparate(tape, h_T, entries[i].intent, d[i], s_cur, p);
                    }),
                    "joint");
      break;
    case Kind::content_plus_time: {
      Pooled t = pool(time_scores(), "time");
      Pooled c = pool(content_scores(), "content");
      pooled.vector = tape.concat(t.vector, c.vector);
      pooled.weights = std::move(t.weights);
      pooled.weights.insert(pooled.weights.end(), c.weights.begin(), c.weights.end());
      break;
    }
  }
  out.s_hist = pooled.vector;
  out.weights = std::move(pooled.weights);
  return out;
}

std::vector<WeightRow> export_weights(const HistorySummary& summary) {
  if (summary.kind == Kind::none) throw UsageError("export_weights: attention kind 'none' has no weights");
  std::vector<WeightRow> rows;
  rows.reserve(summary.weights.size());
  for (const auto& w : summary.weights) rows.push_back({w.distance, w.role, w.group, w.weight});
  return rows;
}

void write_weights_csv(std::ostream& out, std::span<const WeightRow> rows, bool header) {
  if (header) out << "distance,role,group,weight\n";
  char buf[64];
  for (const auto& r : rows) {
    auto res = std::to_chars(buf, buf + sizeof buf, r.weight, std::chars_format::fixed, 12);
    out << r.distance << ',' << to_string(r.role) << ',' << r.group << ','
        << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  }
}

std::vector<WeightRow> read_weights_csv(std::istream& in) {
  std::vector<WeightRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line.rfind("distance,", 0) == 0)) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 4) throw ParseError(line_no, "expected 4 fields");
    WeightRow r;
    auto [p1, e1] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), r.distance);
    auto [p2, e2] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), r.weight);
    if (e1 != std::errc{} || e2 != std::errc{}) throw ParseError(line_no, "bad number");
    r.role = parse_role(f[1]);
    r.group = f[2];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ctxslu::attn
