#pragma once

// Two-parameter families used for local and prior fits, their maximum
// likelihood estimators, and EDF-based goodness of fit.
//
// Parameter conventions (p1, p2):
//   Gamma           shape, scale
//   InverseGamma    shape, scale       p = s^k / G(k) x^{-k-1} e^{-s/x}
//   LogNormal       mean of ln x, SD of ln x
//   Weibull         shape, scale
//   InverseWeibull  shape, scale of the underlying Weibull (law of 1/X)
//   Laplace         location, scale    variance = 2 scale^2
//   Gaussian        mean, SD

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "superstat/core.hpp"
#include "superstat/stats.hpp"

namespace superstat {

enum class Family { Gamma, InverseGamma, LogNormal, Weibull, InverseWeibull, Laplace, Gaussian };

inline constexpr std::array<Family, 5> kPositiveFamilies = {
    Family::Gamma, Family::InverseGamma, Family::LogNormal, Family::Weibull, Family::InverseWeibull};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::Gamma: return "gamma";
    case Family::InverseGamma: return "inverse_gamma";
    case Family::LogNormal: return "lognormal";
    case Family::Weibull: return "weibull";
    case Family::InverseWeibull: return "inverse_weibull";
    case Family::Laplace: return "laplace";
    case Family::Gaussian: return "gaussian";
  }
  return "unknown";
}

inline Family family_from_name(std::string_view s) {
  for (Family f : {Family::Gamma, Family::InverseGamma, Family::LogNormal, Family::Weibull,
                   Family::InverseWeibull, Family::Laplace, Family::Gaussian})
    if (family_name(f) == s) return f;
  throw InputError("unknown distribution family: " + std::string(s));
}

inline bool positive_support(Family f) { return f != Family::Laplace && f != Family::Gaussian; }

struct Params {
  double p1 = 0.0;
  double p2 = 1.0;
  friend bool operator==(const Params&, const Params&) = default;
};

inline void validate(Family f, Params p) {
  if (!std::isfinite(p.p1) || !std::isfinite(p.p2) || !(p.p2 > 0.0))
    throw InputError(std::string(family_name(f)) + ": invalid parameters");
  if (positive_support(f) && f != Family::LogNormal && !(p.p1 > 0.0))
    throw InputError(std::string(family_name(f)) + ": shape must be positive");
}

/// Log density; -inf outside the support.
inline double log_pdf(Family f, Params p, double x) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  const double a = p.p1, s = p.p2;
  switch (f) {
    case Family::Gamma:
      if (x < 0.0) return ninf;
      if (x == 0.0) return a == 1.0 ? -std::log(s) : (a > 1.0 ? ninf : std::numeric_limits<double>::infinity());
      return (a - 1.0) * std::log(x) - x / s - a * std::log(s) - std::lgamma(a);
    case Family::InverseGamma:
      if (x <= 0.0) return ninf;
      return a * std::log(s) - std::lgamma(a) - (a + 1.0) * std::log(x) - s / x;
    case Family::LogNormal: {
      if (x <= 0.0) return ninf;
      const double z = (std::log(x) - a) / s;
      return -0.5 * z * z - std::log(s) - std::log(x) - detail::kLogSqrt2Pi;
    }
    case Family::Weibull:
      if (x < 0.0) return ninf;
      if (x == 0.0) return a == 1.0 ? -std::log(s) : (a > 1.0 ? ninf : std::numeric_limits<double>::infinity());
      return std::log(a) - a * std::log(s) + (a - 1.0) * std::log(x) - std::pow(x / s, a);
    case Family::InverseWeibull:
      if (x <= 0.0) return ninf;
      return std::log(a) - a * std::log(s) - (a + 1.0) * std::log(x) - std::pow(s * x, -a);
    case Family::Laplace: return -std::log(2.0 * s) - std::abs(x - a) / s;
    case Family::Gaussian: {
      const double z = (x - a) / s;
      return -0.5 * z * z - std::log(s) - detail::kLogSqrt2Pi;
    }
  }
  return ninf;
}

inline double pdf(Family f, Params p, double x) {
  validate(f, p);
  return std::exp(log_pdf(f, p, x));
}

inline double cdf(Family f, Params p, double x) {
  const double a = p.p1, s = p.p2;
  switch (f) {
    case Family::Gamma: return x <= 0.0 ? 0.0 : boost::math::gamma_p(a, x / s);
    case Family::InverseGamma: return x <= 0.0 ? 0.0 : boost::math::gamma_q(a, s / x);
    case Family::LogNormal: return x <= 0.0 ? 0.0 : detail::normal_cdf((std::log(x) - a) / s);
    case Family::Weibull: return x <= 0.0 ? 0.0 : -std::expm1(-std::pow(x / s, a));
    case Family::InverseWeibull: return x <= 0.0 ? 0.0 : std::exp(-std::pow(s * x, -a));
    case Family::Laplace:
      return x < a ? 0.5 * std::exp((x - a) / s) : 1.0 - 0.5 * std::exp(-(x - a) / s);
    case Family::Gaussian: return detail::normal_cdf((x - a) / s);
  }
  return 0.0;
}

inline double quantile(Family f, Params p, double q) {
  validate(f, p);
  if (!(q > 0.0 && q < 1.0)) throw InputError("quantile: probability must be in (0,1)");
  const double a = p.p1, s = p.p2;
  const double z = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
  switch (f) {
    case Family::Gamma: return s * boost::math::gamma_p_inv(a, q);
    case Family::InverseGamma: return s / boost::math::gamma_q_inv(a, q);
    case Family::LogNormal: return std::exp(a + s * z);
    case Family::Weibull: return s * std::pow(-std::log1p(-q), 1.0 / a);
    case Family::InverseWeibull: return 1.0 / (s * std::pow(-std::log(q), 1.0 / a));
    case Family::Laplace: return q < 0.5 ? a + s * std::log(2.0 * q) : a - s * std::log(2.0 * (1.0 - q));
    case Family::Gaussian: return a + s * z;
  }
  return 0.0;
}

inline double log_likelihood(Family f, Params p, std::span<const double> data) {
  double ll = 0.0;
  for (double x : data) ll += log_pdf(f, p, x);
  return ll;
}

struct FitResult {
  Family family = Family::LogNormal;
  Params params;
  double log_likelihood = 0.0;
  std::size_t n = 0;
  double gof = 0.0;  // sqrt(n) * d_max against the fitted CDF
  bool ks_pass = false;
};

/// Survival function of the asymptotic Kolmogorov distribution.
inline double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.0) {
    // Small-x form: CDF = sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2)).
    double sum = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double t = (2.0 * k - 1.0) * std::numbers::pi / x;
      sum += std::exp(-t * t / 8.0);
    }
    return 1.0 - detail::kSqrt2Pi / x * sum;
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// K_alpha with P(K > K_alpha) = alpha; 1.3581 for alpha = 0.05.
inline double kolmogorov_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("kolmogorov_quantile: alpha must be in (0,1)");
  double lo = 0.1, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_survival(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// sqrt(n) * sup |EDF - F| with the EDF evaluated on both sides of each jump.
inline double gof_lilliefors(const FitResult& fit, std::span<const double> data) {
  if (data.empty()) throw InputError("gof_lilliefors: empty data");
  std::vector<double> s(data.begin(), data.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = cdf(fit.family, fit.params, s[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return std::sqrt(n) * d;
}

inline bool ks_significance(const FitResult& fit, std::span<const double> data, double alpha = 0.05) {
  return gof_lilliefors(fit, data) < kolmogorov_quantile(alpha);
}

namespace detail {

struct ShapeScale {
  double shape;
  double scale;
};

inline std::string fmt_trace(const std::vector<double>& iterates) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < iterates.size(); ++i) os << (i ? " " : "") << iterates[i];
  return os.str();
}

/// Gamma MLE: solves ln k - digamma(k) = ln(mean) - mean(ln x) by Newton.
inline ShapeScale fit_gamma_shape_scale(std::span<const double> x, const char* family) {
  double m = 0.0, ml = 0.0;
  for (double v : x) {
    m += v;
    ml += std::log(v);
  }
  m /= static_cast<double>(x.size());
  ml /= static_cast<double>(x.size());
  const double s = std::log(m) - ml;
  if (!(s > 1e-14)) throw InputError(std::string(family) + ": degenerate data (all values equal)");
  double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  std::vector<double> trace{k};
  for (int it = 0; it < 100; ++it) {
    const double g = std::log(k) - boost::math::digamma(k) - s;
    const double dg = 1.0 / k - boost::math::trigamma(k);
    double next = k - g / dg;
    if (!(next > 0.0)) next = 0.5 * k;
    trace.push_back(next);
    // ln k - digamma(k) ~ 1/(2k) loses digits to cancellation for large k,
    // so the iterate jitters near 1e-14 relative.
    if (std::abs(next - k) <= 1e-12 * k) return {next, m / next};
    k = next;
  }
  throw ConvergenceError(std::string(family) + ": shape iteration did not converge", fmt_trace(trace));
}

/// Weibull MLE: root of sum(w y)/sum(w) - 1/k - mean(y) with y = ln x and
/// w = x^k, by safeguarded Newton inside an expanding bracket.
inline ShapeScale fit_weibull_shape_scale(std::span<const double> x, const char* family) {
  const std::size_t n = x.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::log(x[i]);
  const double ymax = *std::max_element(y.begin(), y.end());
  const double ybar = stats::mean(y);
  const double sd = std::sqrt(stats::variance(y));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(ybar))))
    throw InputError(std::string(family) + ": degenerate data (all values equal)");

  auto eval = [&](double k, double& g, double& dg) {
    double sw = 0.0, swy = 0.0, swyy = 0.0;
    for (double v : y) {
      const double d = v - ymax;
      const double w = std::exp(k * d);
      sw += w;
      swy += w * d;
      swyy += w * d * d;
    }
    const double my = swy / sw;
    g = my + ymax - 1.0 / k - ybar;
    dg = std::max(swyy / sw - my * my, 0.0) + 1.0 / (k * k);
  };

  double k = std::numbers::pi / (std::sqrt(6.0) * sd);
  double lo = k, hi = k, g = 0.0, dg = 0.0;
  eval(k, g, dg);
  if (g > 0.0) {
    do {
      lo *= 0.5;
      eval(lo, g, dg);
    } while (g > 0.0 && lo > 1e-12);
  } else {
    do {
      hi *= 2.0;
      eval(hi, g, dg);
    } while (g < 0.0 && hi < 1e12);
  }
  std::vector<double> trace{k};
  for (int it = 0; it < 200; ++it) {
    eval(k, g, dg);
    if (g > 0.0) hi = k;
    else lo = k;
    double next = k - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    trace.push_back(next);
    if (std::abs(next - k) <= 1e-12 * k || hi - lo <= 1e-12 * k) {
      double sw = 0.0;
      for (double v : y) sw += std::exp(next * (v - ymax));
      const double scale = std::exp(ymax + std::log(sw / static_cast<double>(n)) / next);
      return {next, scale};
    }
    k = next;
  }
  throw ConvergenceError(std::string(family) + ": shape iteration did not converge", fmt_trace(trace));
}

}  // namespace detail

/// Maximum likelihood fit, with goodness of fit against the fitted CDF.
/// Gamma and Weibull (and their inverses, fitted on 1/x) reduce to a 1-D
/// profile equation in the shape; the other families have closed forms.
inline FitResult fit_mle(Family f, std::span<const double> data, double alpha = 0.05) {
  const std::string name(family_name(f));
  if (data.size() < 2) throw InputError(name + ": need at least 2 observations");
  for (double v : data) {
    if (!std::isfinite(v)) throw InputError(name + ": non-finite observation");
    if (positive_support(f) && !(v > 0.0)) throw InputError(name + ": observation outside support (x <= 0)");
  }
  FitResult r;
  r.family = f;
  r.n = data.size();
  switch (f) {
    case Family::Gamma: {
      const auto ss = detail::fit_gamma_shape_scale(data, name.c_str());
      r.params = {ss.shape, ss.scale};
      break;
    }
    case Family::InverseGamma: {
      std::vector<double> inv(data.size());
      std::transform(data.begin(), data.end(), inv.begin(), [](double v) { return 1.0 / v; });
      const auto ss = detail::fit_gamma_shape_scale(inv, name.c_str());
      r.params = {ss.shape, 1.0 / ss.scale};
      break;
    }
    case Family::LogNormal: {
      std::vector<double> lx(data.size());
      std::transform(data.begin(), data.end(), lx.begin(), [](double v) { return std::log(v); });
      const double m = stats::mean(lx);
      const double sd = std::sqrt(stats::variance(lx));
      if (!(sd > 0.0)) throw InputError(name + ": degenerate data (all values equal)");
      r.params = {m, sd};
      break;
    }
    case Family::Weibull: {
      const auto ss = detail::fit_weibull_shape_scale(data, name.c_str());
      r.params = {ss.shape, ss.scale};
      break;
    }
    case Family::InverseWeibull: {
      std::vector<double> inv(data.size());
      std::transform(data.begin(), data.end(), inv.begin(), [](double v) { return 1.0 / v; });
      const auto ss = detail::fit_weibull_shape_scale(inv, name.c_str());
      r.params = {ss.shape, ss.scale};
      break;
    }
    case Family::Laplace: {
      const double med = stats::median(data);
      double mad = 0.0;
      for (double v : data) mad += std::abs(v - med);
      mad /= static_cast<double>(data.size());
      if (!(mad > 0.0)) throw InputError(name + ": degenerate data (all values equal)");
      r.params = {med, mad};
      break;
    }
    case Family::Gaussian: {
      const double m = stats::mean(data);
      const double sd = std::sqrt(stats::variance(data));
      if (!(sd > 0.0)) throw InputError(name + ": degenerate data (all values equal)");
      r.params = {m, sd};
      break;
    }
  }
  r.log_likelihood = log_likelihood(f, r.params, data);
  r.gof = gof_lilliefors(r, data);
  r.ks_pass = r.gof < kolmogorov_quantile(alpha);
  return r;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of a lognormal with log-mean `location` and log-SD `scale`.
inline Moments lognormal_moments(double location, double scale) {
  if (!(scale > 0.0)) throw InputError("lognormal_moments: scale must be positive");
  const double s2 = scale * scale;
  return {std::exp(location + 0.5 * s2), std::expm1(s2) * std::exp(2.0 * location + s2)};
}

struct NormalityReport {
  std::size_t n = 0;
  double t_statistic = 0.0;
  double t_test_p = 1.0;  // two-sided, H0: mean zero
  double skewness = 0.0;
  double kurtosis = 0.0;  // non-excess
  double jarque_bera = 0.0;
  double jarque_bera_p = 1.0;
};

/// One-sample t-test against zero mean and the Jarque-Bera test.
inline NormalityReport normality_tests(std::span<const double> x) {
  if (x.size() < 8) throw InputError("normality_tests: need at least 8 values");
  NormalityReport r;
  r.n = x.size();
  const double n = static_cast<double>(x.size());
  const double m = stats::mean(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw InputError("normality_tests: degenerate data (zero variance)");
  const double sd = std::sqrt(m2 * n / (n - 1.0));
  r.t_statistic = m / (sd / std::sqrt(n));
  boost::math::students_t_distribution<double> t(n - 1.0);
  r.t_test_p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(t, std::abs(r.t_statistic))));
  r.skewness = m3 / std::pow(m2, 1.5);
  r.kurtosis = m4 / (m2 * m2);
  r.jarque_bera = n / 6.0 * (r.skewness * r.skewness + 0.25 * (r.kurtosis - 3.0) * (r.kurtosis - 3.0));
  r.jarque_bera_p = std::exp(-0.5 * r.jarque_bera);  // chi-square, 2 dof
  return r;
}

}  // namespace superstat
