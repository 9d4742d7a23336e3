#pragma once

#include <span>

namespace ctxslu::train {

struct WelchTest {
  double t = 0.0;
  double df = 0.0;
  double p = 0.5;  // one-tailed, H1: mean(a) > mean(b)
};

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
/// Needs at least two values per sample (UsageError otherwise). When both samples
/// have zero variance the p-value is 0.5 for equal means and 0 or 1 otherwise.
WelchTest welch_t_test(std::span<const double> a, std::span<const double> b);

/// One-tailed p-value for mean(a) > mean(b).
double t_test_one_tailed(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> x);
/// Sample variance (n - 1 denominator).
double variance(std::span<const double> x);

/// Spearman rank correlation, average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace ctxslu::train
