#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ctxslu/autodiff/tape.hpp"
#include "ctxslu/autodiff/tensor.hpp"

namespace ctxslu::enc {

/// One LSTM direction. The four gate blocks are stacked row-wise in the order
/// input, forget, output, candidate: rows [0,h) are W_i, [h,2h) W_f, and so on.
struct LstmParams {
  ad::Tensor W;  // [4h x in]
  ad::Tensor U;  // [4h x h]
  ad::Tensor b;  // [4h]

  std::size_t hidden() const noexcept { return U.cols(); }
  std::size_t input() const noexcept { return W.cols(); }

  /// Weights uniform in [-0.08, 0.08], forget-gate bias 1.0.
  static LstmParams init(std::size_t input, std::size_t hidden, std::mt19937_64& rng);
  static LstmParams zeros(std::size_t input, std::size_t hidden);

  void visit(const std::string& prefix, const std::function<void(const std::string&, ad::Tensor&)>& fn);
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;

  /// Per-direction hidden size is output_dim / 2 so the summary has exactly output_dim entries.
  static BiLstmParams init(std::size_t input, std::size_t output_dim, std::mt19937_64& rng);
  static BiLstmParams zeros(std::size_t input, std::size_t output_dim);

  std::size_t output_dim() const noexcept { return 2 * forward.hidden(); }
  std::size_t input() const noexcept { return forward.input(); }

  void visit(const std::string& prefix, const std::function<void(const std::string&, ad::Tensor&)>& fn);
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

/// i=σ(W_i x+U_i h+b_i), f, o likewise, g=tanh(...); c=f⊙c_prev+i⊙g; h=o⊙tanh(c).
LstmState lstm_step(ad::Tape& tape, LstmParams& p, ad::Var x, ad::Var h_prev, ad::Var c_prev);

struct BiLstmOutput {
  std::vector<ad::Var> forward;   // forward h_t, t = 0..T-1
  std::vector<ad::Var> backward;  // backward state that has read tokens t..T-1, indexed by t
  ad::Var summary;                // forward h_{T-1} ⊕ backward h at t = 0

  std::size_t length() const noexcept { return forward.size(); }
  /// forward h_t ⊕ backward h_t, recorded on demand.
  ad::Var state(ad::Tape& tape, std::size_t t) const;
  std::vector<ad::Var> states(ad::Tape& tape) const;
};

/// Runs both directions over `seq`. When `suffix` is given, every step's input is
/// seq[t] ⊕ suffix; the suffix projection is computed once per direction.
BiLstmOutput bilstm_encode(ad::Tape& tape, BiLstmParams& p, std::span<const ad::Var> seq,
                           std::optional<ad::Var> suffix = std::nullopt);

}  // namespace ctxslu::enc
