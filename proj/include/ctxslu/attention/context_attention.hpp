#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ctxslu/attention/config.hpp"
#include "ctxslu/autodiff/tape.hpp"
#include "ctxslu/autodiff/tensor.hpp"

namespace ctxslu::attn {

/// w_att and b_att. A single copy is shared by the time, content and joint scores.
struct AttentionParams {
  ad::Tensor w;  // [dim]
  ad::Tensor b;  // [dim]

  static AttentionParams init(std::size_t dim, std::mt19937_64& rng);
  std::size_t dim() const noexcept { return w.size(); }
  void visit(const std::string& prefix, const std::function<void(const std::string&, ad::Tensor&)>& fn);
};

/// One previous utterance as seen by the attention: its intent vector u_t (already
/// on the tape), how many turns back it is (1 = immediately previous) and its speaker.
struct HistoryEntry {
  ad::Var intent;
  std::size_t distance = 1;
  Role role = Role::guide;
};

/// α_t = w_attᵀ tanh(h_T + d_t [+ s_cur] + b_att)
ad::Var score_time(ad::Tape& tape, ad::Var h_T, ad::Var d_t, std::optional<ad::Var> s_cur,
                   AttentionParams& p);
/// β_t = w_attᵀ tanh(h_T + u_t [+ s_cur] + b_att)
ad::Var score_content(ad::Tape& tape, ad::Var h_T, ad::Var u_t, std::optional<ad::Var> s_cur,
                      AttentionParams& p);
/// γ_t = w_attᵀ tanh(h_T + u_t + d_t [+ s_cur] + b_att), the single "Content x Time" score.
ad::Var score_inseparate(ad::Tape& tape, ad::Var h_T, ad::Var u_t, ad::Var d_t,
                         std::optional<ad::Var> s_cur, AttentionParams& p);

struct WeightRecord {
  std::size_t entry = 0;  // index into the entries passed to the pooling op
  std::size_t distance = 0;
  Role role = Role::guide;
  std::string group;  // softmax group, e.g. "time", "content:guide"
  double weight = 0.0;
};

struct Pooled {
  ad::Var vector;
  std::vector<WeightRecord> weights;
};

/// u_t, or u_t ⊕ d_t, for every entry. `distance_vectors[i]` must be d_t of entry i.
std::vector<ad::Var> entry_vectors(ad::Tape& tape, std::span<const HistoryEntry> entries,
                                   std::span<const ad::Var> distance_vectors, HistoryRepr repr);

/// One softmax over all entries; returns Σ weight·vector. `scores` has one value per entry.
/// With no entries the result is a zero vector of size `vec_dim`.
Pooled pool_sentence(ad::Tape& tape, std::span<const HistoryEntry> entries,
                     std::span<const ad::Var> vectors, std::optional<ad::Var> scores, std::size_t vec_dim,
                     const std::string& group);

/// Separate softmax per speaker; returns s^guide ⊕ s^tourist (guide first). A role
/// with no entries contributes zeros.
Pooled pool_role(ad::Tape& tape, std::span<const HistoryEntry> entries, std::span<const ad::Var> vectors,
                 std::optional<ad::Var> scores, std::size_t vec_dim, const std::string& group);

struct HistorySummary {
  ad::Var s_hist;
  std::size_t dim = 0;
  Kind kind = Kind::none;
  std::vector<WeightRecord> weights;
};

/// Scores, pools and concatenates the history for one configuration.
///
/// `distance_table` is D [dim x context_length] (column distance-1), `speaker_table`
/// is S [dim x 2] (column = role). Unweighted sums are used for Kind::none; for
/// content_plus_time the time and content summaries come from independent
/// softmaxes and are concatenated time first.
HistorySummary summarize_history(ad::Tape& tape, const AttentionConfig& cfg, ad::Var h_T,
                                 std::span<const HistoryEntry> entries, ad::Tensor& distance_table,
                                 ad::Tensor& speaker_table, Role current_role, AttentionParams& p);

struct WeightRow {
  std::size_t distance = 0;
  Role role = Role::guide;
  std::string group;
  double weight = 0.0;
};

/// One row per (entry, softmax group). Throws UsageError for Kind::none.
std::vector<WeightRow> export_weights(const HistorySummary& summary);

/// CSV with header `distance,role,group,weight`, weights in fixed notation with 12 decimals.
void write_weights_csv(std::ostream& out, std::span<const WeightRow> rows, bool header = true);
std::vector<WeightRow> read_weights_csv(std::istream& in);

}  // namespace ctxslu::attn
