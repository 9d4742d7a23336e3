#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ctxslu::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with an optional same-shape gradient buffer.
///
/// Tensors own trainable state (parameters) and standalone values. Values that
/// exist only for one forward/backward pass live on a Tape instead.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> grad() noexcept { return grad_; }
  std::span<const double> grad() const noexcept { return grad_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on);
  void zero_grad() noexcept;

  void fill(double value) noexcept;
  void fill_uniform(std::mt19937_64& rng, double lo, double hi);

  /// Column `c` of a 2-D tensor, copied out.
  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

}  // namespace ctxslu::ad
