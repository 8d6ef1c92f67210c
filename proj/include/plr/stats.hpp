#pragma once

#include <span>
#include <vector>

namespace plr {

struct WelchResult {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  double p_a_less = 0.5;  // one-sided p-value for mean_a < mean_b
  bool significant = false;  // two-sided at alpha
};

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom. Zero sample variances are replaced by `variance_floor` so a pure
/// shift between constant samples stays well defined.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                         double variance_floor = 1e-12);

struct CorrelationResult {
  double rho = 0.0;
  double p_two_sided = 1.0;
  size_t n = 0;
};

/// Spearman rank correlation (average ranks for ties); p-value from the
/// t approximation with n - 2 degrees of freedom.
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

/// Fractional ranks starting at 1; ties share their average rank.
std::vector<double> average_ranks(std::span<const double> xs);

}  // namespace plr
