#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ctxslu/autodiff/gradcheck.hpp"
#include "ctxslu/autodiff/tensor.hpp"

namespace test_support {

/// One randomized gradient check. `run` draws a fresh instance and returns the
/// largest relative error over every trainable tensor involved.
struct GradientCase {
  std::string name;
  std::function<double(std::mt19937_64&)> run;
};

ctxslu::ad::Tensor random_tensor(ctxslu::ad::Shape shape, std::mt19937_64& rng, double scale = 1.0);
std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double scale = 1.0);

/// Worst finite-difference error of `f` with respect to each tensor in turn.
double check_all(const ctxslu::ad::LossBuilder& f, const std::vector<ctxslu::ad::Tensor*>& params);

std::vector<GradientCase> op_gradient_cases();
std::vector<GradientCase> encoder_gradient_cases();
/// Every valid attention configuration at both levels and both history representations.
std::vector<GradientCase> attention_gradient_cases();
/// Full model forward + loss for every attention kind and the three baselines.
std::vector<GradientCase> model_gradient_cases();

}  // namespace test_support
