#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctxslu/autodiff/tensor.hpp"

namespace ctxslu::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;

  /// Zero moments shaped like `params`.
  static AdamState for_params(std::span<ad::Tensor* const> params, AdamConfig cfg = {});
};

/// One bias-corrected Adam update over all parameters, then zeroes their gradients.
/// Throws DimensionError if the state was built for differently shaped parameters.
void adam_step(AdamState& state, std::span<ad::Tensor* const> params);

/// Scales every gradient so the global L2 norm is at most `max_norm`. Returns the
/// norm before scaling.
double clip_grad_norm(std::span<ad::Tensor* const> params, double max_norm);

}  // namespace ctxslu::train
