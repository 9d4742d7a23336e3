#pragma once

#include <functional>

#include "ctxslu/autodiff/tape.hpp"
#include "ctxslu/autodiff/tensor.hpp"

namespace ctxslu::ad {

/// Builds a scalar loss on the given tape. Must be deterministic in the values of
/// the tensors it closes over.
using LossBuilder = std::function<Var(Tape&)>;

/// Largest per-coordinate error between the tape gradient of `f` w.r.t. `x` and a
/// central finite difference, scaled by max(1, |analytic|).
///
/// `x` must require grad. Its values are perturbed in place and restored; its
/// gradient buffer is overwritten with the analytic gradient.
double finite_diff_check(const LossBuilder& f, Tensor& x, double eps = 1e-5);

}  // namespace ctxslu::ad
