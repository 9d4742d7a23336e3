#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ctxslu/autodiff/tensor.hpp"

namespace ctxslu::ad {

/// Handle to a value recorded on a Tape. Only meaningful for the tape that produced it.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const noexcept { return id != UINT32_MAX; }
};

/// Backward rule for Tape::custom. `input_grads[k]` is empty when input k needs no gradient.
using CustomBackward =
    std::function<void(std::span<const double> out_grad, std::span<const std::span<double>> input_grads)>;

/// Define-by-run reverse-mode tape over dense vectors.
///
/// Every op appends one node whose inputs are earlier nodes, so the record is
/// topologically ordered by construction. Parameters enter through `leaf`; their
/// values are read in place and their gradients accumulate (+=) into the owning
/// Tensor during `backward`. Intermediate values live in an arena that `clear`
/// rewinds without releasing memory, so one tape can be reused per example.
///
/// All values are 1-D except parameter leaves, which keep their Tensor shape.
/// Every forward op checks its output for NaN/Inf and throws NumericError.
class Tape {
 public:
  Tape();

  void clear();
  std::size_t size() const noexcept { return nodes_.size(); }

  Var leaf(Tensor& param);
  Var constant(std::span<const double> values);
  Var zeros(std::size_t n);
  Var scalar(double v);

  Var matvec(Var m, Var x);
  /// M[:, offset : offset + |x|] · x. Lets a sequence model split a concatenated input.
  Var matvec_cols(Var m, Var x, std::size_t offset);
  Var add(Var a, Var b);
  Var add(std::span<const Var> terms);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var concat(std::span<const Var> parts);
  Var concat(Var a, Var b);
  Var slice(Var a, std::size_t offset, std::size_t length);
  Var dot(Var a, Var b);
  Var sum(Var a);
  Var masked_softmax(Var scores, const std::vector<bool>& mask);
  Var embedding(Tensor& table, std::size_t index);
  /// Σ_i weights[i] · vectors[i]
  Var weighted_sum(Var weights, std::span<const Var> vectors);
  /// Mean over entries of binary cross-entropy between sigmoid(logits) and targets.
  Var bce_with_logits(Var logits, std::span<const double> targets);
  /// −log softmax(logits)[target]
  Var softmax_cross_entropy(Var logits, std::size_t target);
  Var custom(std::span<const Var> inputs, std::span<const double> output, CustomBackward backward);

  std::span<const double> value(Var v) const;
  double item(Var v) const;
  std::size_t dim(Var v) const;
  /// Gradient of a non-leaf node after backward().
  std::span<const double> grad(Var v) const;

  /// Accumulates d(loss)/d(param) into every leaf parameter that requires grad.
  /// `seed` scales the upstream gradient (e.g. 1/batch for a mean loss).
  void backward(Var loss, double seed = 1.0);

 private:
  enum class Op : std::uint8_t {
    Leaf, Constant, MatVecCols, Add, Mul, Scale, Tanh, Sigmoid, Concat, Slice,
    Dot, Sum, MaskedSoftmax, Embedding, WeightedSum, Bce, SoftmaxXent, Custom
  };

  struct Node {
    Op op;
    bool needs_grad = false;
    std::uint32_t in_begin = 0;
    std::uint32_t in_count = 0;
    std::size_t offset = 0;  // into vals_ (unused for leaves)
    std::size_t size = 0;
    std::size_t aux = 0;     // op-specific index/offset
    std::size_t aux_begin = 0;  // into aux_ (masks, targets)
    double scalar = 0.0;
    Tensor* param = nullptr;
  };

  Var push(Node node, std::span<const Var> inputs);
  std::size_t alloc(std::size_t n);
  const Node& node(Var v) const;
  const double* vptr(const Node& n) const;
  double* gptr(std::uint32_t id);
  Var input(const Node& n, std::size_t k) const { return inputs_[n.in_begin + k]; }
  bool any_needs_grad(std::span<const Var> inputs) const;
  void check_finite(const Node& n, const char* op) const;
  std::size_t matrix_cols(const Node& n) const;

  std::vector<Node> nodes_;
  std::vector<Var> inputs_;
  std::vector<double> vals_;
  std::vector<double> grads_;
  std::vector<double> aux_;
  std::vector<CustomBackward> customs_;
};

}  // namespace ctxslu::ad
