#include "ctxslu/encoder/lstm.hpp"

#include "ctxslu/error.hpp"

namespace ctxslu::enc {

namespace {

constexpr double kInitRange = 0.08;

struct Leaves {
  ad::Var W, U, b;
};

Leaves leaves(ad::Tape& tape, LstmParams& p) {
  return {tape.leaf(p.W), tape.leaf(p.U), tape.leaf(p.b)};
}

// `zx` is the input projection W·x (plus any precomputed suffix term).
// h_prev/c_prev may be invalid for the first step of a sequence (zero state).
LstmState step_projected(ad::Tape& tape, const Leaves& l, std::size_t h, ad::Var zx, ad::Var h_prev,
                         ad::Var c_prev) {
  ad::Var z;
  if (h_prev.valid()) {
    const ad::Var terms[] = {zx, tape.matvec(l.U, h_prev), l.b};
    z = tape.add(terms);
  } else {
    z = tape.add(zx, l.b);
  }
  const ad::Var gates = tape.sigmoid(tape.slice(z, 0, 3 * h));
  const ad::Var i = tape.slice(gates, 0, h);
  const ad::Var f = tape.slice(gates, h, h);
  const ad::Var o = tape.slice(gates, 2 * h, h);
  const ad::Var g = tape.tanh(tape.slice(z, 3 * h, h));
  ad::Var c = tape.mul(i, g);
  if (c_prev.valid()) c = tape.add(tape.mul(f, c_prev), c);
  return {tape.mul(o, tape.tanh(c)), c};
}

void check_step_shapes(const LstmParams& p, const ad::Tape& tape, ad::Var x, ad::Var h, ad::Var c) {
  if (tape.dim(x) != p.input())
    throw DimensionError("lstm_step: input has " + std::to_string(tape.dim(x)) + " entries, expected " +
                         std::to_string(p.input()));
  if (tape.dim(h) != p.hidden() || tape.dim(c) != p.hidden())
    throw DimensionError("lstm_step: state size differs from hidden size");
}

}  // namespace

LstmParams LstmParams::init(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  LstmParams p = zeros(input, hidden);
  p.W.fill_uniform(rng, -kInitRange, kInitRange);
  p.U.fill_uniform(rng, -kInitRange, kInitRange);
  p.b.fill_uniform(rng, -kInitRange, kInitRange);
  for (std::size_t k = hidden; k < 2 * hidden; ++k) p.b[k] = 1.0;
  return p;
}

LstmParams LstmParams::zeros(std::size_t input, std::size_t hidden) {
  if (input == 0 || hidden == 0) throw DimensionError("lstm: sizes must be positive");
  return {ad::Tensor({4 * hidden, input}, true), ad::Tensor({4 * hidden, hidden}, true),
          ad::Tensor({4 * hidden}, true)};
}

void LstmParams::visit(const std::string& prefix,
                       const std::function<void(const std::string&, ad::Tensor&)>& fn) {
  fn(prefix + ".W", W);
  fn(prefix + ".U", U);
  fn(prefix + ".b", b);
}

BiLstmParams BiLstmParams::init(std::size_t input, std::size_t output_dim, std::mt19937_64& rng) {
  if (output_dim % 2 != 0) throw DimensionError("bilstm: output dimension must be even");
  BiLstmParams p;
  p.forward = LstmParams::init(input, output_dim / 2, rng);
  p.backward = LstmParams::init(input, output_dim / 2, rng);
  return p;
}

BiLstmParams BiLstmParams::zeros(std::size_t input, std::size_t output_dim) {
  if (output_dim % 2 != 0) throw DimensionError("bilstm: output dimension must be even");
  return {LstmParams::zeros(input, output_dim / 2), LstmParams::zeros(input, output_dim / 2)};
}

void BiLstmParams::visit(const std::string& prefix,
                         const std::function<void(const std::string&, ad::Tensor&)>& fn) {
  forward.visit(prefix + ".fwd", fn);
  backward.visit(prefix + ".bwd", fn);
}

LstmState lstm_step(ad::Tape& tape, LstmParams& p, ad::Var x, ad::Var h_prev, ad::Var c_prev) {
  check_step_shapes(p, tape, x, h_prev, c_prev);
  const Leaves l = leaves(tape, p);
  return step_projected(tape, l, p.hidden(), tape.matvec(l.W, x), h_prev, c_prev);
}

ad::Var BiLstmOutput::state(ad::Tape& tape, std::size_t t) const {
  return tape.concat(forward.at(t), backward.at(t));
}

std::vector<ad::Var> BiLstmOutput::states(ad::Tape& tape) const {
  std::vector<ad::Var> out;
  out.reserve(length());
  for (std::size_t t = 0; t < length(); ++t) out.push_back(state(tape, t));
  return out;
}

BiLstmOutput bilstm_encode(ad::Tape& tape, BiLstmParams& p, std::span<const ad::Var> seq,
                           std::optional<ad::Var> suffix) {
  if (seq.empty()) throw EmptyInputError("bilstm_encode: empty sequence");
  const std::size_t suffix_dim = suffix ? tape.dim(*suffix) : 0;
  for (ad::Var x : seq)
    if (tape.dim(x) + suffix_dim != p.input())
      throw DimensionError("bilstm_encode: step input has " + std::to_string(tape.dim(x) + suffix_dim) +
                           " entries, expected " + std::to_string(p.input()));

  const std::size_t T = seq.size();
  BiLstmOutput out;
  out.forward.resize(T);
  out.backward.resize(T);

  auto run = [&](LstmParams& dir, bool reverse, std::vector<ad::Var>& hs) {
    const Leaves l = leaves(tape, dir);
    ad::Var ctx;
    if (suffix) ctx = tape.matvec_cols(l.W, *suffix, p.input() - suffix_dim);
    ad::Var h, c;
    for (std::size_t k = 0; k < T; ++k) {
      const std::size_t t = reverse ? T - 1 - k : k;
      ad::Var zx = tape.matvec_cols(l.W, seq[t], 0);
      if (suffix) zx = tape.add(zx, ctx);
      const LstmState s = step_projected(tape, l, dir.hidden(), zx, h, c);
      h = s.h;
      c = s.c;
      hs[t] = h;
    }
  };
  run(p.forward, false, out.forward);
  run(p.backward, true, out.backward);
  out.summary = tape.concat(out.forward[T - 1], out.backward[0]);
  return out;
}

}  // namespace ctxslu::enc
