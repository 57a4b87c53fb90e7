#pragma once

// Robust locally weighted linear regression.
//
// For each fitting location x0 the q = floor(fraction * n) nearest points in
// x define the bandwidth h (distance to the q-th nearest, x0 itself counted);
// points are weighted by tricube((x - x0)/h) and a weighted straight line
// gives the fitted value. Robustness passes multiply these weights by
// tricube(e_k / (6 s)), s being the median absolute residual, and refit
// until s stabilizes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "superstat/core.hpp"
#include "superstat/stats.hpp"

namespace superstat {

inline double tricube(double u) {
  const double a = std::abs(u);
  if (a >= 1.0) return 0.0;
  const double t = 1.0 - a * a * a;
  return t * t * t;
}

struct LoessConfig {
  double fraction = 0.3;
  int max_iterations = 10;  // robustness passes after the initial fit; 0 disables them
  double tolerance = 1e-8;  // stop once |s_new - s_old| < tolerance
  double delta = 0.0;       // anchor spacing in x; fits in between are interpolated
  bool exclude_self = false;

  void validate() const {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("loess: fraction must be in (0, 1]");
    if (max_iterations < 0) throw InputError("loess: max_iterations must be >= 0");
    if (!(delta >= 0.0)) throw InputError("loess: delta must be >= 0");
  }
};

/// Fitted points sorted by x (ties by y). `order[k]` is the input index of
/// sorted point k.
struct LoessCurve {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> fitted;
  std::vector<double> residuals;
  std::vector<double> robustness_weights;
  std::vector<std::size_t> order;
  std::vector<std::size_t> anchors;  // sorted indices with an explicit local fit
  std::vector<double> scale_history;  // s after each pass
  int iterations = 0;                 // robustness passes performed
  bool converged = true;

  [[nodiscard]] std::size_t size() const { return x.size(); }
};

namespace detail {

struct LoessWorkspace {
  std::span<const double> x;
  std::span<const double> y;
  std::size_t q = 2;
  bool exclude_self = false;
};

inline double local_fit(const LoessWorkspace& ws, std::span<const double> robust, std::size_t at,
                        std::size_t& lo) {
  const auto& x = ws.x;
  const auto& y = ws.y;
  const std::size_t n = x.size();
  const double x0 = x[at];
  while (lo + ws.q < n && x0 - x[lo] > x[lo + ws.q] - x0) ++lo;
  const double h = std::max(x0 - x[lo], x[lo + ws.q - 1] - x0);

  if (h <= 0.0) {
    // Every neighbor duplicates x0: equal weights over the exact duplicates.
    double sw = 0.0, swy = 0.0, sy = 0.0;
    std::size_t cnt = 0;
    for (std::size_t j = lo; j < n && x[j] == x0; ++j) {
      if (ws.exclude_self && j == at) continue;
      sw += robust[j];
      swy += robust[j] * y[j];
      sy += y[j];
      ++cnt;
    }
    for (std::size_t j = lo; j-- > 0 && x[j] == x0;) {
      sw += robust[j];
      swy += robust[j] * y[j];
      sy += y[j];
      ++cnt;
    }
    if (sw > 0.0) return swy / sw;
    return cnt ? sy / static_cast<double>(cnt) : y[at];
  }

  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (std::size_t j = lo; j < lo + ws.q; ++j) {
    if (ws.exclude_self && j == at) continue;
    const double w = tricube((x[j] - x0) / h) * robust[j];
    sw += w;
    swx += w * x[j];
    swy += w * y[j];
  }
  if (!(sw > 0.0)) return y[at];
  const double mx = swx / sw, my = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t j = lo; j < lo + ws.q; ++j) {
    if (ws.exclude_self && j == at) continue;
    const double w = tricube((x[j] - x0) / h) * robust[j];
    sxx += w * (x[j] - mx) * (x[j] - mx);
    sxy += w * (x[j] - mx) * (y[j] - my);
  }
  if (sxx / sw <= 1e-14 * h * h) return my;
  return my + sxy / sxx * (x0 - mx);
}

inline void fit_pass(const LoessWorkspace& ws, std::span<const double> robust,
                     std::span<const std::size_t> anchors, std::vector<double>& fitted) {
  std::size_t lo = 0;
  for (std::size_t a : anchors) fitted[a] = local_fit(ws, robust, a, lo);
  for (std::size_t k = 0; k + 1 < anchors.size(); ++k) {
    const std::size_t a = anchors[k], b = anchors[k + 1];
    const double dx = ws.x[b] - ws.x[a];
    for (std::size_t j = a + 1; j < b; ++j) {
      const double t = dx > 0.0 ? (ws.x[j] - ws.x[a]) / dx : 0.0;
      fitted[j] = fitted[a] + t * (fitted[b] - fitted[a]);
    }
  }
}

}  // namespace detail

inline LoessCurve loess_fit(std::span<const double> x, std::span<const double> y, const LoessConfig& cfg = {}) {
  cfg.validate();
  if (x.size() != y.size()) throw InputError("loess: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw InputError("loess: need at least 3 points");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InputError("loess: non-finite input");

  LoessCurve c;
  c.order.resize(n);
  std::iota(c.order.begin(), c.order.end(), std::size_t{0});
  std::sort(c.order.begin(), c.order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  c.x.resize(n);
  c.y.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    c.x[k] = x[c.order[k]];
    c.y[k] = y[c.order[k]];
  }
  if (c.x.front() == c.x.back()) throw InputError("loess: degenerate x (all values equal)");

  // Anchors: every point, or a subset spaced at least `delta` apart.
  if (cfg.delta <= 0.0) {
    c.anchors.resize(n);
    std::iota(c.anchors.begin(), c.anchors.end(), std::size_t{0});
  } else {
    std::size_t i = 0;
    c.anchors.push_back(0);
    while (i + 1 < n) {
      std::size_t j = i + 1;
      while (j + 1 < n && c.x[j + 1] <= c.x[i] + cfg.delta) ++j;
      c.anchors.push_back(j);
      i = j;
    }
  }

  detail::LoessWorkspace ws{c.x, c.y, 2, cfg.exclude_self};
  ws.q = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(cfg.fraction * static_cast<double>(n) + 1e-9)),
                                 2, n);

  c.fitted.assign(n, 0.0);
  c.residuals.assign(n, 0.0);
  c.robustness_weights.assign(n, 1.0);

  double y_scale = 0.0;
  for (double v : c.y) y_scale = std::max(y_scale, std::abs(v));
  const double negligible = 1e-10 * std::max(y_scale, 1e-300);

  auto refresh = [&] {
    detail::fit_pass(ws, c.robustness_weights, c.anchors, c.fitted);
    std::vector<double> abs_e(n);
    for (std::size_t k = 0; k < n; ++k) {
      c.residuals[k] = c.y[k] - c.fitted[k];
      abs_e[k] = std::abs(c.residuals[k]);
    }
    const double s = stats::median(abs_e);
    c.scale_history.push_back(s);
    return s;
  };

  double s = refresh();
  c.converged = true;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (s <= negligible) break;
    for (std::size_t k = 0; k < n; ++k) c.robustness_weights[k] = tricube(c.residuals[k] / (6.0 * s));
    const double next = refresh();
    ++c.iterations;
    const bool stable = std::abs(next - s) < cfg.tolerance;
    s = next;
    if (stable) break;
    if (it + 1 == cfg.max_iterations) c.converged = false;
  }
  return c;
}

/// Piecewise-linear interpolation between fitted points; constant beyond
/// the fitted range. Duplicate x share the fitted value.
inline double evaluate(const LoessCurve& c, double x) {
  if (c.x.empty()) throw InputError("loess evaluate: empty curve");
  if (x <= c.x.front()) return c.fitted.front();
  if (x >= c.x.back()) return c.fitted.back();
  const auto it = std::upper_bound(c.x.begin(), c.x.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - c.x.begin());
  const std::size_t lo = hi - 1;
  if (c.x[lo] == x) return c.fitted[lo];
  const double t = (x - c.x[lo]) / (c.x[hi] - c.x[lo]);
  return c.fitted[lo] + t * (c.fitted[hi] - c.fitted[lo]);
}

}  // namespace superstat
