#pragma once

#include <random>
#include <vector>

#include "ctxslu/attention/config.hpp"
#include "ctxslu/attention/context_attention.hpp"

namespace test_support {

using Vec = std::vector<double>;

struct OracleEntry {
  Vec intent;
  std::size_t distance;
  ctxslu::Role role;
};

/// Straight-line loops over plain arrays, written independently of the tape.
/// D and S are given as lists of columns.
Vec naive_history_summary(const ctxslu::attn::AttentionConfig& cfg, const Vec& h, const std::vector<OracleEntry>& entries,
                          const std::vector<Vec>& D, const std::vector<Vec>& S, ctxslu::Role current,
                          const Vec& w, const Vec& b);

/// A random attention problem with every tensor as a plain value, runnable
/// through the tape or through the oracle.
struct AttentionInstance {
  std::size_t dim = 0;
  ctxslu::ad::Tensor D, S, h;
  std::vector<ctxslu::ad::Tensor> intents;
  std::vector<std::size_t> distances;
  std::vector<ctxslu::Role> roles;
  ctxslu::attn::AttentionParams p;
  ctxslu::Role current = ctxslu::Role::guide;

  /// `n` entries at distances 1..n with random roles; D has 7 columns.
  static AttentionInstance draw(std::mt19937_64& rng, std::size_t dim, std::size_t n);

  ctxslu::attn::HistorySummary run(ctxslu::ad::Tape& t, const ctxslu::attn::AttentionConfig& cfg);
  Vec oracle(const ctxslu::attn::AttentionConfig& cfg) const;
};

/// Every grid row at both levels and both history representations.
std::vector<ctxslu::attn::AttentionConfig> all_attention_configs();

}  // namespace test_support
