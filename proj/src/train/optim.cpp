#include "ctxslu/train/optim.hpp"

#include <cmath>

#include "ctxslu/error.hpp"

namespace ctxslu::train {

AdamState AdamState::for_params(std::span<ad::Tensor* const> params, AdamConfig cfg) {
  AdamState s;
  s.cfg = cfg;
  for (const ad::Tensor* p : params) {
    s.m.emplace_back(p->size(), 0.0);
    s.v.emplace_back(p->size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, std::span<ad::Tensor* const> params) {
  if (params.size() != state.m.size()) throw DimensionError("adam_step: parameter count changed");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (params[k]->size() != state.m[k].size() || params[k]->grad().size() != params[k]->size())
      throw DimensionError("adam_step: parameter " + std::to_string(k) + " changed shape");

  ++state.t;
  const auto& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k]->values();
    auto g = params[k]->grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      theta[i] -= c.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.eps);
    }
    params[k]->zero_grad();
  }
}

double clip_grad_norm(std::span<ad::Tensor* const> params, double max_norm) {
  double sq = 0.0;
  for (const ad::Tensor* p : params)
    for (double g : p->grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (ad::Tensor* p : params)
      for (double& g : p->grad()) g *= s;
  }
  return norm;
}

}  // namespace ctxslu::train
