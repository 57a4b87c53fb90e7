#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "superstat/core.hpp"

namespace superstat::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw InputError("mean: empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Variance with divisor n - ddof.
inline double variance(std::span<const double> x, int ddof = 0) {
  if (x.size() <= static_cast<std::size_t>(ddof)) throw InputError("variance: too few points");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - static_cast<std::size_t>(ddof));
}

/// Linear-interpolated quantile of an unsorted sample (type 7).
inline double quantile(std::span<const double> x, double q) {
  if (x.empty()) throw InputError("quantile: empty sample");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline double median(std::span<const double> x) { return quantile(x, 0.5); }

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double intercept_se = 0.0;
  double slope_se = 0.0;
  double sse = 0.0;  // residual sum of squares
  std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope * x with classical errors.
inline LinearFit ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("ols: size mismatch");
  if (x.size() < 2) throw InputError("ols: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("ols: x has no spread");
  LinearFit f;
  f.n = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    f.sse += e * e;
  }
  if (x.size() > 2) {
    const double s2 = f.sse / (n - 2.0);
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return f;
}

/// Weighted least squares; `sse` is the weighted residual sum of squares
/// and the errors assume Var(e_i) = s^2 / w_i.
inline LinearFit wls(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  if (x.size() != y.size() || x.size() != w.size()) throw InputError("wls: size mismatch");
  if (x.size() < 2) throw InputError("wls: need at least 2 points");
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(w[i] >= 0.0)) throw InputError("wls: negative weight");
    sw += w[i];
    mx += w[i] * x[i];
    my += w[i] * y[i];
  }
  if (!(sw > 0.0)) throw InputError("wls: weights sum to zero");
  mx /= sw;
  my /= sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("wls: x has no spread");
  LinearFit f;
  f.n = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    f.sse += w[i] * e * e;
  }
  if (x.size() > 2) {
    const double s2 = f.sse / (static_cast<double>(x.size()) - 2.0);
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / sw + mx * mx / sxx));
  }
  return f;
}

/// Autocovariance at `lag` with divisor n (biased estimator).
inline double autocovariance(std::span<const double> x, std::size_t lag) {
  const double m = mean(x);
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < x.size(); ++i) acc += (x[i + lag] - m) * (x[i] - m);
  return acc / static_cast<double>(x.size());
}

}  // namespace superstat::stats
