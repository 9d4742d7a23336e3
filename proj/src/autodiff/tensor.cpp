#include "ctxslu/autodiff/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "ctxslu/error.hpp"

namespace ctxslu::ad {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : shape_(std::move(shape)), values_(shape_size(shape_), 0.0) {
  for (auto d : shape_)
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
  set_requires_grad(requires_grad);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_))
    throw DimensionError("value count " + std::to_string(values_.size()) +
                         " does not match shape " + shape_string(shape_));
  set_requires_grad(requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on)
    grad_.assign(values_.size(), 0.0);
  else
    grad_.clear();
}

void Tensor::zero_grad() noexcept { std::fill(grad_.begin(), grad_.end(), 0.0); }

void Tensor::fill(double value) noexcept { std::fill(values_.begin(), values_.end(), value); }

void Tensor::fill_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : values_) v = dist(rng);
}

std::vector<double> Tensor::column(std::size_t c) const {
  if (shape_.size() != 2 || c >= cols()) throw IndexError("column " + std::to_string(c) + " out of range");
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = (*this)(r, c);
  return out;
}

void Tensor::set_column(std::size_t c, std::span<const double> values) {
  if (shape_.size() != 2 || c >= cols()) throw IndexError("column " + std::to_string(c) + " out of range");
  if (values.size() != rows()) throw DimensionError("column length mismatch");
  for (std::size_t r = 0; r < rows(); ++r) (*this)(r, c) = values[r];
}

}  // namespace ctxslu::ad
