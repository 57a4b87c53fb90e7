#pragma once

// Segment dynamics: length fluctuations, correlation functions with a
// shuffle-based noise level, intraday start-time profiles, and the relation
// between segment length and segment mean.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "superstat/core.hpp"
#include "superstat/loess.hpp"
#include "superstat/segmentation.hpp"
#include "superstat/stats.hpp"
#include "superstat/timeseries.hpp"

namespace superstat {

/// d_j(i) = l_{i+j} - l_i.
inline std::vector<double> length_fluctuations(std::span<const double> lengths, std::size_t j) {
  if (j == 0) throw InputError("length_fluctuations: j must be >= 1");
  if (j >= lengths.size()) throw InputError("length_fluctuations: j must be smaller than the number of lengths");
  std::vector<double> out(lengths.size() - j);
  for (std::size_t i = 0; i + j < lengths.size(); ++i) out[i] = lengths[i + j] - lengths[i];
  return out;
}

struct CorrelationReport {
  std::vector<std::size_t> lags;   // 0 .. max_lag
  std::vector<double> covariance;  // C(l) = <x(i+l) x(i)> - <x>^2, divisor n
  std::vector<double> normalized;  // C(l) / C(0)
  double noise_level = 0.0;        // 3 x typical SD of shuffled C(l), l >= 1
  std::optional<std::size_t> first_lag_at_noise;  // first l >= 1 with |C(l)| <= noise_level
  std::optional<std::size_t> decay_lag;           // first l >= 1 with C(l)/C(0) <= 1/e
  std::size_t shuffles = 0;
  bool degenerate = false;  // constant input
};

struct AutocorrOptions {
  std::size_t shuffles = 100;
  std::uint64_t seed = 20240531;
};

namespace detail {

inline void covariances(std::span<const double> x, std::size_t max_lag, std::vector<double>& out) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  out.assign(max_lag + 1, 0.0);
  for (std::size_t l = 0; l <= max_lag; ++l) {
    double acc = 0.0;
    for (std::size_t i = 0; i + l < x.size(); ++i) acc += (x[i + l] - m) * (x[i] - m);
    out[l] = acc / n;
  }
}

}  // namespace detail

/// Biased covariance estimator per lag; the noise level is three times the
/// lag-averaged SD of the same estimator over random permutations.
inline CorrelationReport autocorr(std::span<const double> values, std::size_t max_lag, const AutocorrOptions& opt = {}) {
  if (max_lag < 1) throw InputError("autocorr: max_lag must be >= 1");
  if (values.size() <= max_lag) throw InputError("autocorr: need more values than max_lag");
  for (double v : values)
    if (!std::isfinite(v)) throw InputError("autocorr: non-finite value");
  CorrelationReport rep;
  rep.shuffles = opt.shuffles;
  rep.lags.resize(max_lag + 1);
  std::iota(rep.lags.begin(), rep.lags.end(), std::size_t{0});
  detail::covariances(values, max_lag, rep.covariance);
  rep.normalized.assign(max_lag + 1, 0.0);
  if (!(rep.covariance[0] > 0.0)) {
    rep.degenerate = true;
    std::fill(rep.covariance.begin(), rep.covariance.end(), 0.0);
    return rep;
  }
  for (std::size_t l = 0; l <= max_lag; ++l) rep.normalized[l] = rep.covariance[l] / rep.covariance[0];

  if (opt.shuffles >= 2) {
    std::mt19937_64 rng(opt.seed);
    std::vector<double> work(values.begin(), values.end());
    std::vector<double> sum(max_lag + 1, 0.0), sum2(max_lag + 1, 0.0), c;
    for (std::size_t s = 0; s < opt.shuffles; ++s) {
      std::shuffle(work.begin(), work.end(), rng);
      detail::covariances(work, max_lag, c);
      for (std::size_t l = 1; l <= max_lag; ++l) {
        sum[l] += c[l];
        sum2[l] += c[l] * c[l];
      }
    }
    const double k = static_cast<double>(opt.shuffles);
    double sd_mean = 0.0;
    for (std::size_t l = 1; l <= max_lag; ++l) {
      const double m = sum[l] / k;
      sd_mean += std::sqrt(std::max(0.0, (sum2[l] - k * m * m) / (k - 1.0)));
    }
    rep.noise_level = 3.0 * sd_mean / static_cast<double>(max_lag);
  }
  for (std::size_t l = 1; l <= max_lag; ++l) {
    if (!rep.first_lag_at_noise && std::abs(rep.covariance[l]) <= rep.noise_level) rep.first_lag_at_noise = l;
    if (!rep.decay_lag && rep.normalized[l] <= std::exp(-1.0)) rep.decay_lag = l;
  }
  return rep;
}

// ---------------------------------------------------------------- intraday

inline constexpr std::size_t kBands = 8;

struct LengthClassProfile {
  double lo = 0.0;  // lengths in [lo, hi)
  double hi = 0.0;
  std::size_t count = 0;
  std::vector<double> band_given_class;  // P(octile band | class)
  std::vector<double> class_given_band;  // P(class | octile band)
};

struct IntradayProfile {
  std::vector<double> band_edges;  // 9 minutes-of-session; band b spans [edges[b], edges[b+1])
  std::vector<std::size_t> band_counts;
  std::vector<double> band_probability;  // each 1/8 up to rounding
  std::vector<double> clock_edges;       // 8 equal-width session bands
  std::vector<std::size_t> clock_counts;
  std::vector<double> clock_probability;
  std::vector<LengthClassProfile> classes;
  std::size_t starts = 0;
};

inline const std::vector<double>& default_length_classes() {
  static const std::vector<double> edges = {30.0, 60.0, 120.0, 240.0, 480.0};
  return edges;
}

/// `start_minutes` are minutes since session open; `lengths` align with them.
/// Octile bands are assigned by rank of start time (ties by order), so the
/// unconditional occupancies are floor(n/8) or ceil(n/8).
inline IntradayProfile intraday_profile(std::span<const double> start_minutes, std::span<const double> lengths,
                                        double session_length,
                                        std::span<const double> class_edges = default_length_classes()) {
  const std::size_t n = start_minutes.size();
  if (n < kBands) throw InputError("intraday_profile: need at least 8 segment starts");
  if (lengths.size() != n) throw InputError("intraday_profile: starts and lengths differ in length");
  if (!(session_length > 0.0)) throw InputError("intraday_profile: session length must be positive");
  IntradayProfile p;
  p.starts = n;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return start_minutes[a] < start_minutes[b]; });
  std::vector<std::size_t> band(n);
  p.band_counts.assign(kBands, 0);
  p.band_edges.assign(kBands + 1, session_length);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t b = r * kBands / n;
    band[order[r]] = b;
    if (p.band_counts[b]++ == 0) p.band_edges[b] = start_minutes[order[r]];
  }
  p.band_edges[0] = 0.0;
  for (std::size_t b = 0; b < kBands; ++b)
    p.band_probability.push_back(static_cast<double>(p.band_counts[b]) / static_cast<double>(n));

  p.clock_counts.assign(kBands, 0);
  for (std::size_t b = 0; b <= kBands; ++b)
    p.clock_edges.push_back(session_length * static_cast<double>(b) / static_cast<double>(kBands));
  for (double t : start_minutes) {
    auto b = static_cast<std::size_t>(std::floor(t / session_length * static_cast<double>(kBands)));
    p.clock_counts[std::min(b, kBands - 1)]++;
  }
  for (std::size_t b = 0; b < kBands; ++b)
    p.clock_probability.push_back(static_cast<double>(p.clock_counts[b]) / static_cast<double>(n));

  for (std::size_t c = 0; c < class_edges.size(); ++c) {
    LengthClassProfile cls;
    cls.lo = class_edges[c];
    cls.hi = c + 1 < class_edges.size() ? class_edges[c + 1] : std::numeric_limits<double>::infinity();
    std::vector<std::size_t> counts(kBands, 0);
    for (std::size_t i = 0; i < n; ++i)
      if (lengths[i] >= cls.lo && lengths[i] < cls.hi) {
        counts[band[i]]++;
        cls.count++;
      }
    for (std::size_t b = 0; b < kBands; ++b) {
      cls.band_given_class.push_back(cls.count ? static_cast<double>(counts[b]) / static_cast<double>(cls.count) : 0.0);
      cls.class_given_band.push_back(p.band_counts[b] ? static_cast<double>(counts[b]) / static_cast<double>(p.band_counts[b])
                                                      : 0.0);
    }
    p.classes.push_back(std::move(cls));
  }
  return p;
}

/// Profile of segment starts of `seg` over the sessions of `series`.
inline IntradayProfile intraday_profile(const Series& series, const Segmentation& seg,
                                        std::span<const double> class_edges = default_length_classes()) {
  std::vector<double> starts, lengths;
  for (const auto& s : seg.segments) {
    if (s.start >= series.size()) throw InputError("intraday_profile: segmentation does not match the series");
    starts.push_back(static_cast<double>(series.calendar().minute_of_session(series.timestamps()[s.start])));
    lengths.push_back(static_cast<double>(s.length()));
  }
  return intraday_profile(starts, lengths, static_cast<double>(series.calendar().session_length()), class_edges);
}

// ---------------------------------------------------------------- length vs mean

struct LengthMeanReport {
  LoessCurve curve;            // length against segment mean
  double central_lo = 0.0;     // 10% quantile of segment means
  double central_hi = 0.0;     // 90% quantile
  double fitted_slope = 0.0;   // OLS slope of the loess values over the central range
  double raw_slope = 0.0;      // OLS slope of the raw lengths over the central range
  double raw_slope_se = 0.0;
  int monotonicity = 0;        // sign of fitted_slope
};

inline LengthMeanReport length_vs_mean(std::span<const double> means, std::span<const double> lengths,
                                       const LoessConfig& cfg = {}) {
  if (means.size() != lengths.size()) throw InputError("length_vs_mean: means and lengths differ in length");
  if (means.size() < 10) throw InputError("length_vs_mean: need at least 10 segments");
  LengthMeanReport rep;
  rep.curve = loess_fit(means, lengths, cfg);
  rep.central_lo = stats::quantile(means, 0.1);
  rep.central_hi = stats::quantile(means, 0.9);
  std::vector<double> cx, cy, cf;
  for (std::size_t k = 0; k < rep.curve.size(); ++k)
    if (rep.curve.x[k] >= rep.central_lo && rep.curve.x[k] <= rep.central_hi) {
      cx.push_back(rep.curve.x[k]);
      cy.push_back(rep.curve.y[k]);
      cf.push_back(rep.curve.fitted[k]);
    }
  if (cx.size() < 3 || cx.front() == cx.back()) throw InputError("length_vs_mean: degenerate spread of segment means");
  const auto fitted = stats::ols(cx, cf);
  const auto raw = stats::ols(cx, cy);
  rep.fitted_slope = fitted.slope;
  rep.raw_slope = raw.slope;
  rep.raw_slope_se = raw.slope_se;
  rep.monotonicity = fitted.slope > 0.0 ? 1 : (fitted.slope < 0.0 ? -1 : 0);
  return rep;
}

inline LengthMeanReport length_vs_mean(const Segmentation& seg, const LoessConfig& cfg = {}) {
  const auto m = seg.means();
  const auto l = seg.lengths();
  return length_vs_mean(m, l, cfg);
}

}  // namespace superstat
