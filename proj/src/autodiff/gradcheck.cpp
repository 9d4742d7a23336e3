#include "ctxslu/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctxslu/error.hpp"

namespace ctxslu::ad {

double finite_diff_check(const LossBuilder& f, Tensor& x, double eps) {
  if (!x.requires_grad()) throw UsageError("finite_diff_check: tensor does not require grad");
  if (!(eps > 0.0)) throw UsageError("finite_diff_check: eps must be positive");

  Tape tape;
  x.zero_grad();
  tape.backward(f(tape));
  const std::vector<double> analytic(x.grad().begin(), x.grad().end());

  auto evaluate = [&]() {
    tape.clear();
    return tape.item(f(tape));
  };

  double worst = 0.0;
  auto values = x.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = evaluate();
    values[i] = saved - eps;
    const double down = evaluate();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  std::copy(analytic.begin(), analytic.end(), x.grad().begin());
  return worst;
}

}  // namespace ctxslu::ad
