#pragma once

#include <cstddef>
#include <vector>

namespace kronquery {

/// Digamma function for x > 0, accurate to ~1e-13 (recurrence up to x >= 10,
/// then the asymptotic Bernoulli series).
double digamma(double x);

struct WilsonInterval {
  double center = 0.0;
  double halfwidth = 0.0;
  bool contains(double p) const {
    return p >= center - halfwidth && p <= center + halfwidth;
  }
};

/// Wilson score interval for `successes` out of `trials` at normal quantile z.
WilsonInterval wilson_interval(long successes, long trials, double z = 1.959964);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y ~ slope*x + intercept. Needs >= 2 points.
LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kronquery
