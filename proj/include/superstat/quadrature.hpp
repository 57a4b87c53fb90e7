#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature with QUADPACK-style
// error estimation. The interval with the largest error estimate is
// bisected until the requested tolerance is met. Infinite limits are
// mapped onto (0, 1] before integration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "superstat/core.hpp"

namespace superstat {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  std::size_t max_intervals = 2000;
};

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t intervals = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a = 0.0;
  double b = 0.0;
  double value = 0.0;
  double error = 0.0;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel kronrod15(F& f, double a, double b) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr double tiny = std::numeric_limits<double>::min();
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double abs_half = std::abs(half);
  std::array<double, 7> lo{}, hi{};

  const double fc = f(center);
  double gauss = fc * kGaussWeights[3];
  double kronrod = fc * kKronrodWeights[7];
  double abs_sum = std::abs(kronrod);
  for (int j = 0; j < 3; ++j) {
    const int k = 2 * j + 1;
    const double dx = half * kKronrodNodes[k];
    const double f1 = f(center - dx), f2 = f(center + dx);
    lo[k] = f1;
    hi[k] = f2;
    gauss += kGaussWeights[j] * (f1 + f2);
    kronrod += kKronrodWeights[k] * (f1 + f2);
    abs_sum += kKronrodWeights[k] * (std::abs(f1) + std::abs(f2));
  }
  for (int j = 0; j < 4; ++j) {
    const int k = 2 * j;
    const double dx = half * kKronrodNodes[k];
    const double f1 = f(center - dx), f2 = f(center + dx);
    lo[k] = f1;
    hi[k] = f2;
    kronrod += kKronrodWeights[k] * (f1 + f2);
    abs_sum += kKronrodWeights[k] * (std::abs(f1) + std::abs(f2));
  }
  const double mean = 0.5 * kronrod;
  double asc = kKronrodWeights[7] * std::abs(fc - mean);
  for (int k = 0; k < 7; ++k) asc += kKronrodWeights[k] * (std::abs(lo[k] - mean) + std::abs(hi[k] - mean));

  Panel p{a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
  asc *= abs_half;
  abs_sum *= abs_half;
  if (asc != 0.0 && p.error != 0.0) p.error = asc * std::min(1.0, std::pow(200.0 * p.error / asc, 1.5));
  if (abs_sum > tiny / (50.0 * eps)) p.error = std::max(50.0 * eps * abs_sum, p.error);
  return p;
}

template <class F>
QuadratureResult adaptive_finite(F& f, double a, double b, const QuadratureOptions& opt) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  QuadratureResult res;
  if (a == b) {
    res.converged = true;
    return res;
  }
  std::priority_queue<Panel> heap;
  Panel first = kronrod15(f, a, b);
  heap.push(first);
  res.evaluations = 15;
  double total = first.value, error = first.error;
  auto tolerance = [&] { return std::max(opt.abs_tol, opt.rel_tol * std::abs(total)); };
  bool roundoff = false;
  while (error > tolerance() && heap.size() < opt.max_intervals) {
    Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (std::abs(worst.b - worst.a) <= 100.0 * eps * std::max(std::abs(worst.a), std::abs(worst.b))) {
      roundoff = true;
      break;
    }
    heap.pop();
    Panel left = kronrod15(f, worst.a, mid);
    Panel right = kronrod15(f, mid, worst.b);
    res.evaluations += 30;
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Resum to shed the drift of the running totals.
  res.intervals = heap.size();
  total = 0.0;
  error = 0.0;
  std::vector<Panel> panels;
  panels.reserve(heap.size());
  while (!heap.empty()) {
    panels.push_back(heap.top());
    heap.pop();
  }
  std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  for (const auto& p : panels) {
    total += p.value;
    error += p.error;
  }
  res.value = total;
  res.abs_error = error;
  res.converged = !roundoff && error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
  return res;
}

}  // namespace detail

/// Integrates f over [a, b]; either limit may be infinite.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opt = {}) {
  if (std::isnan(a) || std::isnan(b)) throw InputError("integrate: NaN limit");
  if (a > b) {
    auto r = integrate(f, b, a, opt);
    r.value = -r.value;
    return r;
  }
  const bool lo_inf = std::isinf(a), hi_inf = std::isinf(b);
  if (!lo_inf && !hi_inf) return detail::adaptive_finite(f, a, b, opt);
  if (lo_inf && hi_inf) {
    auto g = [&f](double t) {
      const double x = (1.0 - t) / t;
      return (f(x) + f(-x)) / (t * t);
    };
    return detail::adaptive_finite(g, 0.0, 1.0, opt);
  }
  if (hi_inf) {
    auto g = [&f, a](double t) { return f(a + (1.0 - t) / t) / (t * t); };
    return detail::adaptive_finite(g, 0.0, 1.0, opt);
  }
  auto g = [&f, b](double t) { return f(b - (1.0 - t) / t) / (t * t); };
  return detail::adaptive_finite(g, 0.0, 1.0, opt);
}

/// Integrates over [a, b] (finite) as a sum of `panels` equal pieces, each
/// adaptive with a share of the absolute tolerance. Keeps narrow peaks on a
/// wide range from slipping between the first Kronrod nodes.
template <class F>
QuadratureResult integrate_panels(F&& f, double a, double b, std::size_t panels, const QuadratureOptions& opt = {}) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw InputError("integrate_panels: limits must be finite");
  if (panels == 0) throw InputError("integrate_panels: need at least one panel");
  QuadratureOptions sub = opt;
  sub.abs_tol = opt.abs_tol / static_cast<double>(panels);
  QuadratureResult out;
  out.converged = true;
  const double w = (b - a) / static_cast<double>(panels);
  for (std::size_t k = 0; k < panels; ++k) {
    const double lo = a + w * static_cast<double>(k);
    const double hi = k + 1 == panels ? b : lo + w;
    const auto r = detail::adaptive_finite(f, lo, hi, sub);
    out.value += r.value;
    out.abs_error += r.abs_error;
    out.intervals += r.intervals;
    out.evaluations += r.evaluations;
  }
  out.converged = out.abs_error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(out.value));
  return out;
}

namespace detail {

inline void throw_quadrature(const QuadratureResult& r, const char* what) {
  std::ostringstream trace;
  trace << "value=" << r.value << " abs_error=" << r.abs_error << " intervals=" << r.intervals
        << " evaluations=" << r.evaluations;
  throw ConvergenceError(std::string(what) + ": quadrature did not converge (achieved abs error " +
                             std::to_string(r.abs_error) + ")",
                         trace.str());
}

}  // namespace detail

/// As `integrate`, but throws ConvergenceError reporting the achieved error.
template <class F>
double integrate_or_throw(F&& f, double a, double b, const QuadratureOptions& opt, const char* what) {
  const auto r = integrate(f, a, b, opt);
  if (!r.converged || !std::isfinite(r.value)) detail::throw_quadrature(r, what);
  return r.value;
}

}  // namespace superstat
