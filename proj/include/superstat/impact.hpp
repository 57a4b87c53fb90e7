#pragma once

// Price fluctuations given trading volume.
//
//   g+(v), g-(v)   probability of a positive / negative price change,
//                  modelled as G tanh(w v^beta); g0 = 1 - g+ - g-
//   I(v)           trading impact, the expected |r| given v, in three forms
//                  i) I = a + b ln v   ii) ln I = a + b ln v   iii) ln I = a + b v
//   Pi(r = 0)      = int g0(v) P(v) dv
//   Pi(|r| > 0)    = int N+(|r|; a + b ln v, sigma) (1 - g0(v)) P(v) dv
//                  with N+ the normal truncated to |r| > 0

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "superstat/core.hpp"
#include "superstat/distributions.hpp"
#include "superstat/loess.hpp"
#include "superstat/mixture.hpp"
#include "superstat/quadrature.hpp"
#include "superstat/segmentation.hpp"
#include "superstat/stats.hpp"

namespace superstat {

// ---------------------------------------------------------------- signs

struct SignCurve {
  double G = 0.0;      // plateau
  double varpi = 1.0;  // scale
  double beta = 1.0;   // exponent
  double sse = 0.0;
  int iterations = 0;
  bool converged = true;

  [[nodiscard]] double operator()(double v) const {
    if (v <= 0.0) return 0.0;
    return G * std::tanh(varpi * std::pow(v, beta));
  }
};

struct SignProbModel {
  SignCurve plus;
  SignCurve minus;
  // Empirical frequencies per volume bin.
  std::vector<double> bin_volume;  // mean v in the bin
  std::vector<std::size_t> bin_count;
  std::vector<double> freq_plus, freq_minus, freq_zero;

  [[nodiscard]] double g_plus(double v) const { return plus(v); }
  [[nodiscard]] double g_minus(double v) const { return minus(v); }
  [[nodiscard]] double g_zero(double v) const { return 1.0 - plus(v) - minus(v); }
};

namespace detail {

// Levenberg-Marquardt on G tanh(w v^beta) over (G, ln w, ln beta).
inline SignCurve fit_sign_curve(std::span<const double> v, std::span<const double> f, std::span<const double> wts) {
  SignCurve c;
  const std::size_t m = v.size();
  double fmax = 0.0;
  for (double y : f) fmax = std::max(fmax, y);
  if (!(fmax > 0.0)) {
    c.G = 0.0;
    return c;
  }
  // Start: plateau from the upper bins, then a log-log line through atanh(f/G).
  const std::size_t tail = std::max<std::size_t>(1, m / 10);
  double G0 = 0.0;
  for (std::size_t k = m - tail; k < m; ++k) G0 += f[k];
  G0 = std::clamp(G0 / static_cast<double>(tail) * 1.02, 1e-6, 1.0);
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < m; ++k) {
    const double r = f[k] / G0;
    if (v[k] > 0.0 && r > 0.0 && r < 0.95) {
      lx.push_back(std::log(v[k]));
      ly.push_back(std::log(std::atanh(r)));
    }
  }
  std::array<double, 3> p = {G0, 0.0, 0.0};
  if (lx.size() >= 2 && lx.front() != lx.back()) {
    const auto line = stats::ols(lx, ly);
    p[1] = line.intercept;
    p[2] = std::log(std::clamp(line.slope, 0.02, 5.0));
  } else {
    p[1] = 0.0;
    p[2] = std::log(0.5);
  }

  auto model = [&](const std::array<double, 3>& q, double x) {
    if (x <= 0.0) return 0.0;
    return q[0] * std::tanh(std::exp(q[1]) * std::pow(x, std::exp(q[2])));
  };
  auto sse_of = [&](const std::array<double, 3>& q) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double e = f[k] - model(q, v[k]);
      s += wts[k] * e * e;
    }
    return s;
  };
  double sse = sse_of(p);
  double lambda = 1e-3;
  c.converged = false;
  int it = 0;
  for (; it < 200; ++it) {
    std::array<std::array<double, 3>, 3> A{};
    std::array<double, 3> g{};
    const double w = std::exp(p[1]), b = std::exp(p[2]);
    for (std::size_t k = 0; k < m; ++k) {
      if (v[k] <= 0.0) continue;
      const double lv = std::log(v[k]);
      const double z = w * std::pow(v[k], b);
      const double t = std::tanh(z);
      const double sech2 = 1.0 - t * t;
      const std::array<double, 3> J = {t, p[0] * sech2 * z, p[0] * sech2 * z * lv * b};
      const double e = f[k] - p[0] * t;
      for (int r = 0; r < 3; ++r) {
        g[r] += wts[k] * J[r] * e;
        for (int s = 0; s < 3; ++s) A[r][s] += wts[k] * J[r] * J[s];
      }
    }
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      auto M = A;
      for (int r = 0; r < 3; ++r) M[r][r] += lambda * (A[r][r] > 0.0 ? A[r][r] : 1.0);
      // Solve M d = g (3x3, Cramer).
      const double det = M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
                         M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
                         M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
      if (!(std::abs(det) > 0.0)) {
        lambda *= 10.0;
        continue;
      }
      std::array<double, 3> d{};
      for (int col = 0; col < 3; ++col) {
        auto Mc = M;
        for (int r = 0; r < 3; ++r) Mc[r][col] = g[r];
        d[col] = (Mc[0][0] * (Mc[1][1] * Mc[2][2] - Mc[1][2] * Mc[2][1]) -
                  Mc[0][1] * (Mc[1][0] * Mc[2][2] - Mc[1][2] * Mc[2][0]) +
                  Mc[0][2] * (Mc[1][0] * Mc[2][1] - Mc[1][1] * Mc[2][0])) /
                 det;
      }
      std::array<double, 3> q = {std::clamp(p[0] + d[0], 1e-9, 1.0), p[1] + d[1], std::clamp(p[2] + d[2], -8.0, 3.0)};
      const double s = sse_of(q);
      if (s < sse) {
        const double rel = (sse - s) / std::max(sse, 1e-300);
        p = q;
        sse = s;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (rel < 1e-12) c.converged = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) {
      c.converged = true;  // no descent direction left at this precision
      break;
    }
    if (c.converged) break;
  }
  c.G = p[0];
  c.varpi = std::exp(p[1]);
  c.beta = std::exp(p[2]);
  c.sse = sse;
  c.iterations = it;
  return c;
}

}  // namespace detail

/// Volume-binned sign frequencies (equal-occupancy bins) and least-squares
/// fits of G tanh(w v^beta) for each sign.
inline SignProbModel fit_sign_prob(std::span<const double> volumes, std::span<const double> returns,
                                   std::size_t bins = 50) {
  if (volumes.size() != returns.size()) throw InputError("fit_sign_prob: volumes and returns differ in length");
  if (bins < 20) throw InputError("fit_sign_prob: need at least 20 bins");
  const std::size_t n = volumes.size();
  if (n < bins) throw InputError("fit_sign_prob: fewer observations than bins");
  for (std::size_t i = 0; i < n; ++i)
    if (!(volumes[i] >= 0.0) || !std::isfinite(volumes[i]) || !std::isfinite(returns[i]))
      throw InputError("fit_sign_prob: invalid observation at index " + std::to_string(i));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return volumes[a] < volumes[b]; });
  SignProbModel model;
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
    if (hi <= lo) continue;  // collapsed
    double sv = 0.0;
    std::size_t np = 0, nm = 0;
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t i = order[k];
      sv += volumes[i];
      if (returns[i] > 0.0) ++np;
      else if (returns[i] < 0.0) ++nm;
    }
    const double cnt = static_cast<double>(hi - lo);
    model.bin_volume.push_back(sv / cnt);
    model.bin_count.push_back(hi - lo);
    model.freq_plus.push_back(static_cast<double>(np) / cnt);
    model.freq_minus.push_back(static_cast<double>(nm) / cnt);
    model.freq_zero.push_back(static_cast<double>(hi - lo - np - nm) / cnt);
  }
  std::vector<double> w(model.bin_count.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = static_cast<double>(model.bin_count[k]);
  model.plus = detail::fit_sign_curve(model.bin_volume, model.freq_plus, w);
  model.minus = detail::fit_sign_curve(model.bin_volume, model.freq_minus, w);
  return model;
}

/// Volume where the fitted g+ and g- cross, searched on [lo, hi]; nullopt if
/// they do not change order there.
inline std::optional<double> sign_crossing(const SignProbModel& m, double lo = 1e-3, double hi = 1e3) {
  auto d = [&](double lv) { return m.g_plus(std::exp(lv)) - m.g_minus(std::exp(lv)); };
  double a = std::log(lo), b = std::log(hi);
  double fa = d(a), fb = d(b);
  if (fa == 0.0) return lo;
  if (fa * fb > 0.0) return std::nullopt;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    const double fm = d(mid);
    if ((fm < 0.0) == (fa < 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return std::exp(0.5 * (a + b));
}

// ---------------------------------------------------------------- impact

enum class ImpactForm { Log, Power, Exp };

inline std::string_view impact_form_name(ImpactForm f) {
  switch (f) {
    case ImpactForm::Log: return "log";
    case ImpactForm::Power: return "power";
    case ImpactForm::Exp: return "exp";
  }
  return "unknown";
}

enum class SignSelect { Positive, Negative, Both };

inline std::string_view sign_name(SignSelect s) {
  switch (s) {
    case SignSelect::Positive: return "positive";
    case SignSelect::Negative: return "negative";
    case SignSelect::Both: return "both";
  }
  return "unknown";
}

struct ImpactFit {
  ImpactForm form = ImpactForm::Log;
  SignSelect sign = SignSelect::Both;
  double a = 0.0, b = 0.0;
  double a_se = 0.0, b_se = 0.0;  // from the same form fitted to the raw scatter
  double chi2_dof = 0.0;          // on the smoothed curve, in I units
  std::size_t points = 0;         // smoothed points entering the fit

  [[nodiscard]] double predict(double v) const {
    switch (form) {
      case ImpactForm::Log: return a + b * std::log(v);
      case ImpactForm::Power: return std::exp(a + b * std::log(v));
      case ImpactForm::Exp: return std::exp(a + b * v);
    }
    return 0.0;
  }
};

struct ImpactReport {
  std::array<ImpactFit, 3> fits;  // log, power, exp
  ImpactForm best = ImpactForm::Log;
  SignSelect sign = SignSelect::Both;
  LoessCurve smooth;              // |r| against ln v
  double sigma_eta = 0.0;         // SD of raw residuals around the log form
  std::size_t observations = 0;
  double raw_a = 0.0, raw_b = 0.0;  // log form fitted to the raw scatter

  [[nodiscard]] const ImpactFit& fit(ImpactForm f) const { return fits[static_cast<std::size_t>(f)]; }
};

struct ImpactOptions {
  LoessConfig loess{0.3, 10, 1e-8, 0.0, false};
  std::size_t smooth_points = 200;  // anchor count for the smoother along ln v
};

/// Smooths |r| against ln v by loess and fits the three impact forms to the
/// smoothed curve. Only nonzero returns of the selected sign enter.
inline ImpactReport fit_impact(std::span<const double> volumes, std::span<const double> returns, SignSelect sign,
                               const ImpactOptions& opt = {}) {
  if (volumes.size() != returns.size()) throw InputError("fit_impact: volumes and returns differ in length");
  std::vector<double> lv, ar, vv;
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    const double r = returns[i];
    const bool take = sign == SignSelect::Positive ? r > 0.0 : (sign == SignSelect::Negative ? r < 0.0 : r != 0.0);
    if (!take) continue;
    if (!(volumes[i] > 0.0)) throw InputError("fit_impact: price move at nonpositive volume, index " + std::to_string(i));
    lv.push_back(std::log(volumes[i]));
    vv.push_back(volumes[i]);
    ar.push_back(std::abs(r));
  }
  if (lv.size() < 10) throw InputError("fit_impact: fewer than 10 price moves");

  ImpactReport rep;
  rep.sign = sign;
  rep.observations = lv.size();
  LoessConfig cfg = opt.loess;
  const auto [mn, mx] = std::minmax_element(lv.begin(), lv.end());
  if (cfg.delta <= 0.0 && opt.smooth_points > 0 && lv.size() > opt.smooth_points)
    cfg.delta = (*mx - *mn) / static_cast<double>(opt.smooth_points);
  rep.smooth = loess_fit(lv, ar, cfg);

  std::vector<double> x, y;
  for (std::size_t a : rep.smooth.anchors) {
    if (!x.empty() && rep.smooth.x[a] == x.back()) continue;
    x.push_back(rep.smooth.x[a]);
    y.push_back(rep.smooth.fitted[a]);
  }
  if (x.size() < 10) throw InputError("fit_impact: fewer than 10 smoothed points");
  // Each smoothed point stands for the observations nearer to it than to its
  // neighbours; weights are those counts scaled to mean 1.
  std::vector<double> wt(x.size());
  {
    const auto& sx = rep.smooth.x;
    std::size_t prev = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const std::size_t next =
          k + 1 < x.size()
              ? static_cast<std::size_t>(std::lower_bound(sx.begin(), sx.end(), 0.5 * (x[k] + x[k + 1])) - sx.begin())
              : sx.size();
      wt[k] = static_cast<double>(next - prev);
      prev = next;
    }
    const double mean_w = static_cast<double>(sx.size()) / static_cast<double>(x.size());
    for (double& w : wt) w = std::max(w, 0.5) / mean_w;
  }
  std::vector<double> ev(x.size()), ly(x.size());
  bool positive = true;
  for (std::size_t k = 0; k < x.size(); ++k) {
    ev[k] = std::exp(x[k]);
    positive = positive && y[k] > 0.0;
    ly[k] = y[k] > 0.0 ? std::log(y[k]) : std::numeric_limits<double>::quiet_NaN();
  }

  std::vector<double> raw_ly(ar.size());
  for (std::size_t i = 0; i < ar.size(); ++i) raw_ly[i] = std::log(ar[i]);
  auto finish = [&](ImpactFit& f) {
    double ss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double e = y[k] - f.predict(ev[k]);
      ss += wt[k] * e * e;
    }
    f.points = x.size();
    f.chi2_dof = ss / static_cast<double>(x.size() - 2);
  };

  ImpactFit& lf = rep.fits[0];
  lf.form = ImpactForm::Log;
  lf.sign = sign;
  {
    const auto s = stats::wls(x, y, wt);
    lf.a = s.intercept;
    lf.b = s.slope;
    const auto raw = stats::ols(lv, ar);
    lf.a_se = raw.intercept_se;
    lf.b_se = raw.slope_se;
    rep.raw_a = raw.intercept;
    rep.raw_b = raw.slope;
    finish(lf);
    double ss = 0.0;
    for (std::size_t i = 0; i < ar.size(); ++i) {
      const double e = ar[i] - lf.a - lf.b * lv[i];
      ss += e * e;
    }
    rep.sigma_eta = std::sqrt(ss / static_cast<double>(ar.size() - 2));
  }
  for (ImpactForm form : {ImpactForm::Power, ImpactForm::Exp}) {
    ImpactFit& f = rep.fits[static_cast<std::size_t>(form)];
    f.form = form;
    f.sign = sign;
    if (!positive) {
      f.chi2_dof = std::numeric_limits<double>::infinity();
      f.points = x.size();
      continue;
    }
    std::vector<double> wl(x.size());  // delta method: Var(ln I) ~ Var(I) / I^2
    for (std::size_t k = 0; k < x.size(); ++k) wl[k] = wt[k] * y[k] * y[k];
    const auto s = stats::wls(form == ImpactForm::Power ? x : ev, ly, wl);
    f.a = s.intercept;
    f.b = s.slope;
    const auto raw = stats::ols(form == ImpactForm::Power ? std::span<const double>(lv) : std::span<const double>(vv),
                                raw_ly);
    f.a_se = raw.intercept_se;
    f.b_se = raw.slope_se;
    finish(f);
  }
  rep.best = ImpactForm::Log;
  for (const auto& f : rep.fits)
    if (f.chi2_dof < rep.fit(rep.best).chi2_dof) rep.best = f.form;
  return rep;
}

// ---------------------------------------------------------------- homogeneity

struct SegmentImpact {
  std::size_t segment = 0;
  double length = 0.0;
  double a = 0.0, b = 0.0;
  std::size_t moves = 0;
};

/// Log-form impact per segment, fitted to the raw (ln v, |r|) scatter of
/// the price moves inside it. Segments with too few moves or no volume
/// spread are skipped.
inline std::vector<SegmentImpact> fit_impact_segments(std::span<const double> volumes, std::span<const double> returns,
                                                      const Segmentation& seg, SignSelect sign = SignSelect::Both,
                                                      std::size_t min_moves = 10) {
  if (volumes.size() != returns.size()) throw InputError("fit_impact_segments: size mismatch");
  std::vector<SegmentImpact> out;
  for (std::size_t k = 0; k < seg.segments.size(); ++k) {
    const auto& s = seg.segments[k];
    if (s.end > volumes.size()) throw InputError("fit_impact_segments: segmentation does not match the series");
    std::vector<double> x, y;
    for (std::size_t i = s.start; i < s.end; ++i) {
      const double r = returns[i];
      const bool take = sign == SignSelect::Positive ? r > 0.0 : (sign == SignSelect::Negative ? r < 0.0 : r != 0.0);
      if (take && volumes[i] > 0.0) {
        x.push_back(std::log(volumes[i]));
        y.push_back(std::abs(r));
      }
    }
    if (x.size() < std::max<std::size_t>(min_moves, 3)) continue;
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    if (*mn == *mx) continue;
    const auto f = stats::ols(x, y);
    out.push_back({k, static_cast<double>(s.length()), f.intercept, f.slope, x.size()});
  }
  return out;
}

struct ParameterHomogeneity {
  std::string name;
  std::size_t n = 0;
  double slope = 0.0, slope_se = 0.0, intercept = 0.0;
  LoessCurve curve;              // parameter against segment length
  double loess_slope = 0.0;      // OLS slope of the loess values
  double edf_distance = 0.0;     // sup |EDF(z) - Phi(z)| of detrended, standardized values
  double ks_critical = 0.0;      // K_0.05 / sqrt(n)
  std::vector<double> z;         // detrended, standardized values (sorted)
};

struct HomogeneityReport {
  ParameterHomogeneity a;
  ParameterHomogeneity b;
};

inline ParameterHomogeneity parameter_homogeneity(std::string name, std::span<const double> lengths,
                                                  std::span<const double> values, const LoessConfig& cfg = {}) {
  if (lengths.size() != values.size()) throw InputError("homogeneity: size mismatch");
  if (lengths.size() < 20) throw InputError("homogeneity: need at least 20 fitted segments");
  ParameterHomogeneity h;
  h.name = std::move(name);
  h.n = lengths.size();
  const auto fit = stats::ols(lengths, values);
  h.slope = fit.slope;
  h.slope_se = fit.slope_se;
  h.intercept = fit.intercept;
  h.curve = loess_fit(lengths, values, cfg);
  h.loess_slope = stats::ols(h.curve.x, h.curve.fitted).slope;
  const double sd = std::sqrt(fit.sse / static_cast<double>(h.n - 2));
  h.z.resize(h.n);
  for (std::size_t i = 0; i < h.n; ++i)
    h.z[i] = sd > 0.0 ? (values[i] - fit.intercept - fit.slope * lengths[i]) / sd : 0.0;
  std::sort(h.z.begin(), h.z.end());
  h.edf_distance = ks_distance_to_edf(h.z, [](double z) { return detail::normal_cdf(z); });
  h.ks_critical = kolmogorov_quantile(0.05) / std::sqrt(static_cast<double>(h.n));
  return h;
}

inline HomogeneityReport homogeneity(std::span<const SegmentImpact> fits, const LoessConfig& cfg = {}) {
  std::vector<double> l, a, b;
  for (const auto& f : fits) {
    l.push_back(f.length);
    a.push_back(f.a);
    b.push_back(f.b);
  }
  return {parameter_homogeneity("a", l, a, cfg), parameter_homogeneity("b", l, b, cfg)};
}

// ---------------------------------------------------------------- Pi(r)

struct ReturnFromVolume {
  double atom = 0.0;                // Pi(r = 0)
  std::vector<double> r;            // |r| grid
  std::vector<double> density;      // Pi(|r|)
  double continuous_mass = 0.0;     // int_0^inf Pi(|r|) d|r|
  double total_mass = 0.0;          // atom + continuous_mass
};

namespace detail {

inline double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(normal_cdf(z));
  // Mills-ratio expansion for the far lower tail.
  const double z2 = z * z;
  return -0.5 * z2 - kLogSqrt2Pi - std::log(-z) + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

// Normal density of x with mean m and SD s, renormalized to x > 0.
inline double truncated_normal_pdf(double x, double m, double s) {
  if (x <= 0.0) return 0.0;
  const double z = (x - m) / s;
  return std::exp(-0.5 * z * z - kLogSqrt2Pi - std::log(s) - log_normal_cdf(m / s));
}

}  // namespace detail

struct VolumeDensity {
  std::function<double(double)> pdf;  // P(v)
  double lo = 1e-6;                   // v range carrying the mass
  double hi = 1e3;
};

/// Volume density of the weighted mixture with its effective support.
inline VolumeDensity volume_density(const MixtureModel& m) {
  if (m.local_family != Family::LogNormal) throw InputError("volume_density: lognormal local family expected");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : m.segments) {
    lo = std::min(lo, s.params.p1 - 9.0 * s.params.p2);
    hi = std::max(hi, s.params.p1 + 9.0 * s.params.p2);
  }
  return {[&m](double v) { return long_term_pdf_weighted(m, v); }, std::exp(lo), std::exp(hi)};
}

struct ReturnFromVolumeOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double panel_width = 0.5;  // in ln v
  bool total_mass = true;    // integrate Pi(|r|) over |r| as well
};

/// Zero atom and Pi(|r|) on `r_grid` from the volume density, sign model and
/// log-form impact with residual SD sigma_eta.
inline ReturnFromVolume return_pdf_from_volume(const VolumeDensity& P, const SignProbModel& signs,
                                               const ImpactFit& impact, double sigma_eta,
                                               std::span<const double> r_grid,
                                               const ReturnFromVolumeOptions& opt = {}) {
  if (impact.form != ImpactForm::Log) throw InputError("return_pdf_from_volume: log-form impact required");
  if (!(sigma_eta > 0.0)) throw InputError("return_pdf_from_volume: sigma_eta must be positive");
  if (!(P.lo > 0.0) || !(P.hi > P.lo)) throw InputError("return_pdf_from_volume: invalid volume range");
  const double u_lo = std::log(P.lo), u_hi = std::log(P.hi);
  const auto panels = std::max<std::size_t>(4, static_cast<std::size_t>(std::ceil((u_hi - u_lo) / opt.panel_width)));
  const QuadratureOptions q{opt.abs_tol, opt.rel_tol, 2000};

  ReturnFromVolume out;
  auto atom_f = [&](double u) {
    const double v = std::exp(u);
    return signs.g_zero(v) * P.pdf(v) * v;
  };
  const auto atom = integrate_panels(atom_f, u_lo, u_hi, panels, q);
  if (!atom.converged) detail::throw_quadrature(atom, "return_pdf_from_volume (atom)");
  out.atom = atom.value;

  auto density = [&](double r) {
    if (r <= 0.0) return 0.0;
    auto f = [&](double u) {
      const double v = std::exp(u);
      const double move = signs.g_plus(v) + signs.g_minus(v);
      if (move <= 0.0) return 0.0;
      return detail::truncated_normal_pdf(r, impact.a + impact.b * u, sigma_eta) * move * P.pdf(v) * v;
    };
    const auto res = integrate_panels(f, u_lo, u_hi, panels, q);
    if (!res.converged) detail::throw_quadrature(res, "return_pdf_from_volume");
    return res.value;
  };
  out.r.assign(r_grid.begin(), r_grid.end());
  for (double r : out.r) out.density.push_back(density(std::abs(r)));

  if (opt.total_mass) {
    // |r| concentrates on [0, max_v (a + b ln v) + 12 sigma].
    const double top = std::max(impact.a + impact.b * u_hi, impact.a + impact.b * u_lo);
    const double r_hi = std::max(top, 0.0) + 12.0 * sigma_eta;
    const auto mass = integrate_panels(density, 0.0, r_hi, 24, {1e-7, 1e-7, 2000});
    out.continuous_mass = mass.value;
  }
  out.total_mass = out.atom + out.continuous_mass;
  return out;
}

}  // namespace superstat
