#pragma once

// Recursive two-sample Kolmogorov-Smirnov segmentation.
//
// A window is split at the position maximizing the size-weighted KS
// statistic D = D_KS * sqrt(nL*nR/(nL+nR)) whenever that maximum exceeds
// the critical curve a*(ln n - b)^c for the window length n. Both halves are
// then processed independently until no window can be split.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "superstat/core.hpp"

namespace superstat {

struct KssConfig {
  double significance = 0.95;  // P0; one of 0.90, 0.95, 0.99
  std::size_t min_segment_length = 30;
  std::size_t max_recursion_depth = 4096;
  bool parallel = false;  // split left/right recursions across threads

  void validate() const;
};

struct CriticalCurve {
  double a, b, c;
};

/// Coefficients of the critical curve for a tabulated significance level.
inline CriticalCurve critical_curve(double significance) {
  constexpr double tol = 1e-9;
  if (std::abs(significance - 0.90) < tol) return {1.41, 1.74, 0.15};
  if (std::abs(significance - 0.95) < tol) return {1.52, 1.80, 0.14};
  if (std::abs(significance - 0.99) < tol) return {1.72, 1.86, 0.13};
  throw InputError("significance level must be one of 0.90, 0.95, 0.99 (got " + std::to_string(significance) + ")");
}

inline void KssConfig::validate() const {
  (void)critical_curve(significance);
  if (min_segment_length < 2) throw InputError("min_segment_length must be >= 2");
  if (max_recursion_depth == 0) throw InputError("max_recursion_depth must be positive");
}

/// Critical value of the maximal weighted statistic for a window of n points.
/// Below n = e^b the curve is undefined; no split is significant there and
/// +infinity is returned.
inline double d_crit(std::size_t n, double significance) {
  const auto [a, b, c] = critical_curve(significance);
  if (n < 3) throw InputError("d_crit: n must be >= 3");
  const double base = std::log(static_cast<double>(n)) - b;
  if (base <= 0.0) return std::numeric_limits<double>::infinity();
  return a * std::pow(base, c);
}

/// sup_x |EDF_a(x) - EDF_b(x)| over the pooled sample points.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("ks_distance: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (i == sa.size()) x = sb[j];
    else if (j == sb.size()) x = sa[i];
    else x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Size-weighted KS statistic for splitting `series` before index `cut`.
inline double weighted_statistic(std::span<const double> series, std::size_t cut) {
  if (cut == 0 || cut >= series.size()) throw InputError("weighted_statistic: degenerate split");
  const double nl = static_cast<double>(cut);
  const double nr = static_cast<double>(series.size() - cut);
  return ks_distance(series.first(cut), series.subspan(cut)) / std::sqrt(1.0 / nl + 1.0 / nr);
}

namespace detail {

/// Visits every admissible cut i in [min_len, n - min_len] with its weighted
/// statistic. With left count cL(x) and pooled count C(x) below x,
/// D_KS = max_x |n cL(x) - i C(x)| / (i (n - i)), so the scan keeps the
/// integer f(x) = n cL(x) - i C(x) per distinct value and updates it in O(m)
/// per step. |f| <= i (n - i) <= n^2 / 4, so 32-bit counters suffice up to
/// n = 92681.
template <class Int, class Visit>
void scan_cuts_impl(std::span<const double> w, std::size_t min_len, Visit&& visit) {
  const std::size_t n = w.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return w[x] < w[y]; });
  std::vector<std::size_t> level(n);
  std::vector<Int> pooled;  // C at each distinct value
  pooled.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && w[order[k]] != w[order[k - 1]]) pooled.push_back(static_cast<Int>(k));
    level[order[k]] = pooled.size();
  }
  pooled.push_back(static_cast<Int>(n));
  const std::size_t m = pooled.size();

  std::vector<Int> f(m, 0);
  const auto nn = static_cast<Int>(n);
  Int* __restrict fp = f.data();
  const Int* __restrict cp = pooled.data();
  const double dn = static_cast<double>(n);
  for (std::size_t i = 1; i + min_len <= n; ++i) {
    const std::size_t r = level[i - 1];
    if (i < min_len) {
      for (std::size_t j = 0; j < r; ++j) fp[j] -= cp[j];
      for (std::size_t j = r; j < m; ++j) fp[j] += nn - cp[j];
      continue;
    }
    Int hi = 0, lo = 0;
    for (std::size_t j = 0; j < r; ++j) {
      const Int v = fp[j] - cp[j];
      fp[j] = v;
      hi = v > hi ? v : hi;
      lo = v < lo ? v : lo;
    }
    for (std::size_t j = r; j < m; ++j) {
      const Int v = fp[j] + nn - cp[j];
      fp[j] = v;
      hi = v > hi ? v : hi;
      lo = v < lo ? v : lo;
    }
    const double di = static_cast<double>(i);
    const double peak = static_cast<double>(std::max(hi, static_cast<Int>(-lo)));
    visit(i, peak / std::sqrt(dn * di * (dn - di)));
  }
}

template <class Visit>
void scan_cuts(std::span<const double> w, std::size_t min_len, Visit&& visit) {
  if (min_len == 0) min_len = 1;
  if (w.size() < 2 * min_len) return;
  if (w.size() <= 92681) scan_cuts_impl<std::int32_t>(w, min_len, visit);
  else scan_cuts_impl<std::int64_t>(w, min_len, visit);
}

}  // namespace detail

/// Weighted statistic for every admissible cut; element k is the cut at
/// index min_len + k. Empty when the window is shorter than 2*min_len.
inline std::vector<double> cut_profile(std::span<const double> window, std::size_t min_len) {
  std::vector<double> out;
  detail::scan_cuts(window, min_len, [&](std::size_t, double d) { out.push_back(d); });
  return out;
}

struct CutCandidate {
  std::size_t index = 0;  // left part is window[0, index)
  double statistic = 0.0;
};

/// Maximal weighted statistic over cuts leaving >= min_len points on each
/// side; ties go to the smallest index. nullopt when no cut is possible.
inline std::optional<CutCandidate> find_best_cut(std::span<const double> window, std::size_t min_len) {
  std::optional<CutCandidate> best;
  detail::scan_cuts(window, min_len, [&](std::size_t i, double d) {
    if (!best || d > best->statistic) best = CutCandidate{i, d};
  });
  return best;
}

struct Segment {
  std::size_t start = 0;  // first index
  std::size_t end = 0;    // one past the last index
  double mean = 0.0;
  double variance = 0.0;  // population variance, mean(v^2) - mean(v)^2

  [[nodiscard]] std::size_t length() const { return end - start; }
};

struct Segmentation {
  std::vector<std::size_t> cuts;  // strictly increasing interior indices
  std::vector<Segment> segments;

  [[nodiscard]] std::vector<double> lengths() const {
    std::vector<double> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(static_cast<double>(s.length()));
    return out;
  }
  [[nodiscard]] std::vector<double> means() const {
    std::vector<double> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(s.mean);
    return out;
  }
};

/// Builds the tiling and per-segment moments from a sorted cut list.
inline Segmentation segmentation_from_cuts(std::span<const double> series, std::vector<std::size_t> cuts) {
  Segmentation out;
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t k = 0; k < cuts.size(); ++k)
    if (cuts[k] == 0 || cuts[k] >= series.size() || (k > 0 && cuts[k] == cuts[k - 1]))
      throw InputError("segmentation: invalid cut position " + std::to_string(cuts[k]));
  out.cuts = std::move(cuts);
  std::size_t begin = 0;
  for (std::size_t k = 0; k <= out.cuts.size(); ++k) {
    const std::size_t end = k < out.cuts.size() ? out.cuts[k] : series.size();
    if (end == begin) break;
    Segment s{begin, end, 0.0, 0.0};
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += series[i];
    s.mean = sum / static_cast<double>(end - begin);
    double ss = 0.0;
    for (std::size_t i = begin; i < end; ++i) ss += (series[i] - s.mean) * (series[i] - s.mean);
    s.variance = ss / static_cast<double>(end - begin);
    out.segments.push_back(s);
    begin = end;
  }
  return out;
}

namespace detail {

inline void segment_window(std::span<const double> series, std::size_t lo, std::size_t hi,
                           const KssConfig& cfg, std::size_t depth, std::vector<std::size_t>& cuts) {
  if (depth > cfg.max_recursion_depth)
    throw InputError("segment: recursion depth exceeds max_recursion_depth (" +
                     std::to_string(cfg.max_recursion_depth) + ")");
  const std::size_t n = hi - lo;
  const std::size_t min_len = cfg.min_segment_length;
  if (n < 2 * min_len) return;
  const auto best = find_best_cut(series.subspan(lo, n), min_len);
  if (!best || !(best->statistic > d_crit(n, cfg.significance))) return;
  const std::size_t cut = lo + best->index;

  constexpr std::size_t kParallelWindow = 4096;
  constexpr std::size_t kParallelDepth = 3;
  if (cfg.parallel && depth < kParallelDepth && n >= kParallelWindow) {
    std::vector<std::size_t> left_cuts;
    auto left = std::async(std::launch::async, [&] { segment_window(series, lo, cut, cfg, depth + 1, left_cuts); });
    std::vector<std::size_t> right_cuts;
    segment_window(series, cut, hi, cfg, depth + 1, right_cuts);
    left.get();
    cuts.insert(cuts.end(), left_cuts.begin(), left_cuts.end());
    cuts.push_back(cut);
    cuts.insert(cuts.end(), right_cuts.begin(), right_cuts.end());
    return;
  }
  segment_window(series, lo, cut, cfg, depth + 1, cuts);
  cuts.push_back(cut);
  segment_window(series, cut, hi, cfg, depth + 1, cuts);
}

}  // namespace detail

/// Recursive KS segmentation of the whole series.
inline Segmentation segment(std::span<const double> series, const KssConfig& cfg = {}) {
  cfg.validate();
  if (series.size() < 2 * cfg.min_segment_length)
    throw InputError("segment: series shorter than 2 * min_segment_length");
  std::vector<std::size_t> cuts;
  detail::segment_window(series, 0, series.size(), cfg, 0, cuts);
  return segmentation_from_cuts(series, std::move(cuts));
}

}  // namespace superstat
