#pragma once

// Superstatistical reconstruction: per-segment parameters are treated as
// slowly fluctuating variables and the long-term law is their mixture.
//
//   length law      p(l) = exp(-(l - l_min)/lambda) / lambda,  l >= l_min
//   mu-omega        ln mu = alpha ln omega + beta (+ a second branch above
//                   the crossover Omega in the dual form)
//   phi(theta)      lognormal location eliminated through the mean/variance
//                   identities and the single mu-omega line
//   weighted form   P(v) = (1/L) sum_i l_i p(v | params_i)
//   integral form   P(v) = int p(v | phi(theta), theta) g(theta) dtheta

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "superstat/core.hpp"
#include "superstat/distributions.hpp"
#include "superstat/loess.hpp"
#include "superstat/quadrature.hpp"
#include "superstat/segmentation.hpp"
#include "superstat/stats.hpp"

namespace superstat {

// ---------------------------------------------------------------- lengths

struct LengthLaw {
  double lambda = 0.0;        // minutes
  double min_length = 0.0;    // minutes
  double lambda_se = 0.0;
  double tail_break = 330.0;  // descriptive only
  double tail_fraction = 0.0; // share of lengths above tail_break
  std::size_t n = 0;          // lengths supplied
  std::size_t n_fit = 0;      // lengths entering the estimate
  bool truncated = false;     // fit restricted to lengths below tail_break
  std::vector<std::string> warnings;

  [[nodiscard]] double pdf(double l) const {
    if (l < min_length || !(lambda > 0.0)) return 0.0;
    return std::exp(-(l - min_length) / lambda) / lambda;
  }
  [[nodiscard]] double cdf(double l) const {
    if (l < min_length) return 0.0;
    if (!(lambda > 0.0)) return 1.0;
    return -std::expm1(-(l - min_length) / lambda);
  }
};

struct LengthLawOptions {
  double tail_break = 330.0;
  bool truncate_at_tail_break = false;
};

namespace detail {

// Mean of an exponential(lambda) truncated to [0, c).
inline double truncated_exponential_mean(double lambda, double c) {
  const double r = c / lambda;
  if (r > 700.0) return lambda;
  if (r < 1e-6) return 0.5 * c - c * r / 12.0;
  return lambda - c / std::expm1(r);
}

}  // namespace detail

inline LengthLaw fit_length_law(std::span<const double> lengths, double min_length, const LengthLawOptions& opt = {}) {
  if (!(min_length >= 0.0)) throw InputError("fit_length_law: min_length must be >= 0");
  if (lengths.empty()) throw InputError("fit_length_law: no lengths");
  LengthLaw law;
  law.min_length = min_length;
  law.tail_break = opt.tail_break;
  law.n = lengths.size();
  std::size_t beyond = 0;
  for (double l : lengths) {
    if (!std::isfinite(l) || l < min_length)
      throw InputError("fit_length_law: length " + std::to_string(l) + " below min_length");
    if (l > opt.tail_break) ++beyond;
  }
  law.tail_fraction = static_cast<double>(beyond) / static_cast<double>(lengths.size());
  if (lengths.size() < 10)
    law.warnings.push_back("only " + std::to_string(lengths.size()) + " segments; length law poorly determined");

  std::vector<double> excess;
  for (double l : lengths)
    if (!opt.truncate_at_tail_break || l < opt.tail_break) excess.push_back(l - min_length);
  law.n_fit = excess.size();
  if (excess.empty()) throw InputError("fit_length_law: no lengths below the tail break");
  const double ybar = stats::mean(excess);

  if (!opt.truncate_at_tail_break) {
    law.lambda = ybar;
  } else {
    law.truncated = true;
    const double c = opt.tail_break - min_length;
    if (ybar >= 0.5 * c) {
      law.warnings.push_back("truncated fit has no finite solution; using untruncated mean");
      law.lambda = ybar;
    } else if (ybar > 0.0) {
      double lo = std::log(ybar * 1e-3), hi = std::log(c * 1e6);
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (detail::truncated_exponential_mean(std::exp(mid), c) < ybar ? lo : hi) = mid;
      }
      law.lambda = std::exp(0.5 * (lo + hi));
    }
  }
  if (!(law.lambda > 0.0)) {
    law.lambda = 0.0;
    law.warnings.push_back("degenerate length law: every length equals min_length");
  }
  law.lambda_se = law.lambda / std::sqrt(static_cast<double>(law.n_fit));
  return law;
}

// ---------------------------------------------------------------- mu-omega

enum class RelationMode { Single, Dual };

/// ln mu against ln omega. The `lo` branch holds below the crossover, `hi`
/// above it; in single mode both branches carry the single line.
struct MuOmegaRelation {
  RelationMode mode = RelationMode::Single;
  double alpha_lo = 0.0, beta_lo = 0.0;
  double alpha_hi = 0.0, beta_hi = 0.0;
  double crossover = std::numeric_limits<double>::quiet_NaN();  // Omega, in ln omega
  double sigma_lo = 0.0, sigma_hi = 0.0;                        // residual SD per branch
  double alpha_single = 0.0, beta_single = 0.0, sigma_single = 0.0;
  double sse_single = 0.0, sse_dual = 0.0;
  double mu_at_crossover = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0, n_lo = 0, n_hi = 0;

  [[nodiscard]] double ln_mu(double ln_omega) const {
    if (mode == RelationMode::Dual && ln_omega > crossover) return alpha_hi * ln_omega + beta_hi;
    return alpha_lo * ln_omega + beta_lo;
  }

  /// The single-line fit as a single-mode relation.
  [[nodiscard]] MuOmegaRelation as_single() const {
    MuOmegaRelation r = *this;
    r.mode = RelationMode::Single;
    r.alpha_lo = r.alpha_hi = alpha_single;
    r.beta_lo = r.beta_hi = beta_single;
    r.sigma_lo = r.sigma_hi = sigma_single;
    r.crossover = std::numeric_limits<double>::quiet_NaN();
    r.mu_at_crossover = std::numeric_limits<double>::quiet_NaN();
    r.n_lo = n;
    r.n_hi = 0;
    return r;
  }
};

namespace detail {

struct HingeFit {
  double a = 0.0, b = 0.0, c = 0.0;  // y = a + b x + c (x - knot)+
  double sse = std::numeric_limits<double>::infinity();
};

inline HingeFit fit_hinge(std::span<const double> x, std::span<const double> y, double knot) {
  // Normal equations for the basis (1, x, (x - knot)+).
  std::array<std::array<double, 4>, 3> m{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = x[i] > knot ? x[i] - knot : 0.0;
    const std::array<double, 3> phi = {1.0, x[i], h};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += phi[r] * phi[c];
      m[r][3] += phi[r] * y[i];
    }
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-300) return {};
    std::swap(m[col], m[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  HingeFit fit;
  fit.a = m[0][3] / m[0][0];
  fit.b = m[1][3] / m[1][1];
  fit.c = m[2][3] / m[2][2];
  fit.sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = x[i] > knot ? x[i] - knot : 0.0;
    const double e = y[i] - fit.a - fit.b * x[i] - fit.c * h;
    fit.sse += e * e;
  }
  return fit;
}

}  // namespace detail

/// Fits single and continuous two-piece lines to (ln omega, ln mu). The
/// crossover is scanned over interior sample quantiles, then refined by
/// golden-section search. Dual mode is kept only if it lowers the total
/// squared error by at least 2%.
inline MuOmegaRelation fit_mu_omega(std::span<const double> mu, std::span<const double> omega) {
  if (mu.size() != omega.size()) throw InputError("fit_mu_omega: mu and omega differ in length");
  if (mu.size() < 20) throw InputError("fit_mu_omega: need at least 20 segments");
  const std::size_t n = mu.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(omega[i] > 0.0)) throw InputError("fit_mu_omega: nonpositive omega at segment " + std::to_string(i));
    if (!(mu[i] > 0.0)) throw InputError("fit_mu_omega: nonpositive mu at segment " + std::to_string(i));
    x[i] = std::log(omega[i]);
    y[i] = std::log(mu[i]);
  }

  MuOmegaRelation rel;
  rel.n = n;
  const auto line = stats::ols(x, y);
  rel.alpha_single = line.slope;
  rel.beta_single = line.intercept;
  rel.sse_single = line.sse;
  rel.sigma_single = std::sqrt(line.sse / static_cast<double>(n));

  std::vector<double> sx = x;
  std::sort(sx.begin(), sx.end());
  const std::size_t k_lo = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n))));
  const std::size_t k_hi = std::min<std::size_t>(n - 3, static_cast<std::size_t>(std::floor(0.9 * static_cast<double>(n))));
  detail::HingeFit best;
  double best_knot = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_k = 0;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    if (k > k_lo && sx[k] == sx[k - 1]) continue;
    const auto f = detail::fit_hinge(x, y, sx[k]);
    if (f.sse < best.sse) {
      best = f;
      best_knot = sx[k];
      best_k = k;
    }
  }
  if (std::isfinite(best.sse)) {
    double lo = sx[best_k > k_lo ? best_k - 1 : best_k];
    double hi = sx[best_k < k_hi ? best_k + 1 : best_k];
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = hi - g * (hi - lo), c2 = lo + g * (hi - lo);
    double f1 = detail::fit_hinge(x, y, c1).sse, f2 = detail::fit_hinge(x, y, c2).sse;
    for (int it = 0; it < 60 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
      if (f1 < f2) {
        hi = c2;
        c2 = c1;
        f2 = f1;
        c1 = hi - g * (hi - lo);
        f1 = detail::fit_hinge(x, y, c1).sse;
      } else {
        lo = c1;
        c1 = c2;
        f1 = f2;
        c2 = lo + g * (hi - lo);
        f2 = detail::fit_hinge(x, y, c2).sse;
      }
    }
    const double knot = f1 < f2 ? c1 : c2;
    const auto refined = detail::fit_hinge(x, y, knot);
    if (refined.sse < best.sse) {
      best = refined;
      best_knot = knot;
    }
  }
  rel.sse_dual = std::isfinite(best.sse) ? best.sse : rel.sse_single;

  const bool dual = std::isfinite(best.sse) && best.c != 0.0 && rel.sse_single - rel.sse_dual > 0.02 * rel.sse_single;
  if (!dual) return rel.as_single();

  rel.mode = RelationMode::Dual;
  rel.alpha_lo = best.b;
  rel.beta_lo = best.a;
  rel.alpha_hi = best.b + best.c;
  rel.beta_hi = best.a - best.c * best_knot;
  // Intersection of the two branches.
  rel.crossover = (rel.beta_hi - rel.beta_lo) / (rel.alpha_lo - rel.alpha_hi);
  rel.mu_at_crossover = std::exp(rel.alpha_lo * rel.crossover + rel.beta_lo);
  double ss_lo = 0.0, ss_hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - rel.ln_mu(x[i]);
    if (x[i] > rel.crossover) {
      ss_hi += e * e;
      ++rel.n_hi;
    } else {
      ss_lo += e * e;
      ++rel.n_lo;
    }
  }
  rel.sigma_lo = rel.n_lo ? std::sqrt(ss_lo / static_cast<double>(rel.n_lo)) : 0.0;
  rel.sigma_hi = rel.n_hi ? std::sqrt(ss_hi / static_cast<double>(rel.n_hi)) : 0.0;
  return rel;
}

/// Lognormal location phi given scale theta on the line ln mu = alpha ln omega + beta.
inline double phi_of_theta(double theta, double alpha, double beta) {
  if (!(theta > 0.0)) throw InputError("phi_of_theta: theta must be positive");
  const double d = 1.0 - 2.0 * alpha;
  if (std::abs(d) < 1e-12) throw InputError("phi_of_theta: alpha = 1/2 is singular");
  const double t2 = theta * theta;
  return beta / d - 0.5 * t2 + alpha * std::log(std::expm1(t2)) / d;
}

// ---------------------------------------------------------------- priors

struct ThetaPrior {
  Family family = Family::Gamma;
  Params params{32.8, 0.028};
  std::vector<FitResult> candidates;  // every positive family that could be fitted

  [[nodiscard]] double pdf(double theta) const { return superstat::pdf(family, params, theta); }
};

/// MLE of every positive family; the winner is the smallest sqrt(n) d_max
/// among `selectable`.
inline ThetaPrior fit_theta_prior(std::span<const double> theta,
                                  std::span<const Family> selectable = std::array{Family::Gamma, Family::Weibull}) {
  if (theta.size() < 20) throw InputError("fit_theta_prior: need at least 20 values");
  ThetaPrior prior;
  const FitResult* best = nullptr;
  for (Family f : kPositiveFamilies) {
    const bool needed = std::find(selectable.begin(), selectable.end(), f) != selectable.end();
    try {
      prior.candidates.push_back(fit_mle(f, theta));
    } catch (const InputError&) {
      if (needed) throw;
    } catch (const ConvergenceError&) {
      if (needed) throw;
    }
  }
  for (const auto& c : prior.candidates)
    if (std::find(selectable.begin(), selectable.end(), c.family) != selectable.end() && (!best || c.gof < best->gof))
      best = &c;
  if (!best) throw InputError("fit_theta_prior: no selectable family could be fitted");
  prior.family = best->family;
  prior.params = best->params;
  return prior;
}

/// Inverse-gamma law of the squared local volatility Sigma = 2 sigma^2.
struct VolatilityPrior {
  double shape = 2.5;    // phi
  double scale = 4e-3;   // theta
  void validate() const {
    if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale))
      throw InputError("volatility prior: shape and scale must be positive");
  }
};

/// Inverse-gamma MLE on Sigma_i = 2 * variance_i.
inline VolatilityPrior fit_volatility_prior(std::span<const double> local_variances) {
  std::vector<double> sigma;
  sigma.reserve(local_variances.size());
  for (double w : local_variances) sigma.push_back(2.0 * w);
  const auto fit = fit_mle(Family::InverseGamma, sigma);
  return {fit.params.p1, fit.params.p2};
}

// ---------------------------------------------------------------- model

struct SegmentParams {
  double length = 0.0;
  Params params;  // local-family parameters
};

struct MixtureModel {
  Family local_family = Family::LogNormal;
  std::vector<SegmentParams> segments;
  LengthLaw length_law;
  ThetaPrior theta_prior;
  MuOmegaRelation relation;
  std::optional<LoessCurve> mu_length;  // expected length against segment mean

  [[nodiscard]] double total_length() const {
    double s = 0.0;
    for (const auto& seg : segments) s += seg.length;
    return s;
  }
};

inline double long_term_pdf_weighted(const MixtureModel& m, double v) {
  if (m.segments.empty()) throw InputError("long_term_pdf_weighted: model has no segments");
  double acc = 0.0, total = 0.0;
  for (const auto& s : m.segments) {
    acc += s.length * std::exp(log_pdf(m.local_family, s.params, v));
    total += s.length;
  }
  return acc / total;
}

inline double long_term_cdf_weighted(const MixtureModel& m, double v) {
  if (m.segments.empty()) throw InputError("long_term_cdf_weighted: model has no segments");
  double acc = 0.0, total = 0.0;
  for (const auto& s : m.segments) {
    acc += s.length * cdf(m.local_family, s.params, v);
    total += s.length;
  }
  return acc / total;
}

struct IntegralOptions {
  double abs_tol = 1e-8;
  double rel_tol = 1e-10;
  double prior_tail = 1e-10;  // theta range cut where the prior mass beyond is below this
  bool include_eta = true;    // fold the Gaussian residual on ln mu into the local scale
  std::size_t panels = 8;
};

namespace detail {

struct IntegralSetup {
  double alpha, beta, eta2, lo, hi;
};

inline IntegralSetup integral_setup(const MixtureModel& m, const IntegralOptions& opt) {
  if (m.local_family != Family::LogNormal) throw InputError("integral form requires a lognormal local family");
  if (m.relation.mode != RelationMode::Single)
    throw InputError("integral form requires a single-mode mu-omega relation");
  IntegralSetup s{m.relation.alpha_lo, m.relation.beta_lo,
                  opt.include_eta ? m.relation.sigma_lo * m.relation.sigma_lo : 0.0,
                  quantile(m.theta_prior.family, m.theta_prior.params, opt.prior_tail),
                  quantile(m.theta_prior.family, m.theta_prior.params, 1.0 - opt.prior_tail)};
  return s;
}

}  // namespace detail

/// Integral form. A Gaussian residual eta of SD sigma on ln mu shifts phi,
/// so integrating it out widens the lognormal scale to sqrt(theta^2 + sigma^2).
inline double long_term_pdf_integral(const MixtureModel& m, double v, const IntegralOptions& opt = {}) {
  if (v <= 0.0) return 0.0;
  const auto s = detail::integral_setup(m, opt);
  const double lv = std::log(v);
  auto f = [&](double theta) {
    const double phi = phi_of_theta(theta, s.alpha, s.beta);
    const double sd = std::sqrt(theta * theta + s.eta2);
    const double z = (lv - phi) / sd;
    return std::exp(-0.5 * z * z - detail::kLogSqrt2Pi - lv) / sd * m.theta_prior.pdf(theta);
  };
  const auto r = integrate_panels(f, s.lo, s.hi, opt.panels, {opt.abs_tol, opt.rel_tol, 2000});
  if (!r.converged) detail::throw_quadrature(r, "long_term_pdf_integral");
  return r.value;
}

inline double long_term_cdf_integral(const MixtureModel& m, double v, const IntegralOptions& opt = {}) {
  if (v <= 0.0) return 0.0;
  const auto s = detail::integral_setup(m, opt);
  const double lv = std::log(v);
  auto f = [&](double theta) {
    const double phi = phi_of_theta(theta, s.alpha, s.beta);
    const double sd = std::sqrt(theta * theta + s.eta2);
    return detail::normal_cdf((lv - phi) / sd) * m.theta_prior.pdf(theta);
  };
  const auto r = integrate_panels(f, s.lo, s.hi, opt.panels, {opt.abs_tol, opt.rel_tol, 2000});
  if (!r.converged) detail::throw_quadrature(r, "long_term_cdf_integral");
  return r.value;
}

// ---------------------------------------------------------------- returns

enum class ReturnKernel { Laplace, Gaussian };

/// P(r) = int k(r | Sigma) IG(Sigma; phi, theta) dSigma, with a zero-mean
/// Laplace kernel of scale sigma or a Gaussian of SD sigma, Sigma = 2 sigma^2.
/// Integrated over ln Sigma in unit panels.
inline double return_mixture_pdf(const VolatilityPrior& prior, double r, ReturnKernel kernel = ReturnKernel::Laplace,
                                 const QuadratureOptions& opt = {0.0, 1e-10, 2000}) {
  prior.validate();
  if (!std::isfinite(r)) throw InputError("return_mixture_pdf: non-finite r");
  const double k = prior.shape, sc = prior.scale;
  const double ar = std::abs(r);
  const double log_norm = k * std::log(sc) - std::lgamma(k);
  auto f = [&](double u) {
    const double sigma = std::exp(0.5 * u) / std::numbers::sqrt2;
    // IG(Sigma) * Sigma in log form, Sigma = e^u.
    const double lp = log_norm - k * u - sc * std::exp(-u);
    double lk;
    if (kernel == ReturnKernel::Laplace) lk = -std::log(2.0 * sigma) - ar / sigma;
    else lk = -std::log(sigma) - detail::kLogSqrt2Pi - 0.5 * (ar / sigma) * (ar / sigma);
    return std::exp(lp + lk);
  };
  const double u_lo = std::log(sc / 800.0);
  const double centre = std::max(std::log(sc), ar > 0.0 ? 2.0 * std::log(ar) : -1e300);
  const double u_hi = centre + 45.0 / (k + 0.5) + 2.0;
  const auto panels = static_cast<std::size_t>(std::ceil((u_hi - u_lo) / 1.5));
  const auto res = integrate_panels(f, u_lo, u_hi, panels, opt);
  if (!res.converged) detail::throw_quadrature(res, "return_mixture_pdf");
  return res.value;
}

// ---------------------------------------------------------------- assembly

/// Largest |F1 - F2| over a grid.
template <class F1, class F2>
double ks_distance_on_grid(F1&& a, F2&& b, std::span<const double> grid) {
  double d = 0.0;
  for (double v : grid) d = std::max(d, std::abs(a(v) - b(v)));
  return d;
}

/// n points spaced evenly in ln v over [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw InputError("log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return g;
}

/// Largest distance between the EDF of `data` and a CDF, both sides of each jump.
template <class Cdf>
double ks_distance_to_edf(std::span<const double> data, Cdf&& cdf_fn) {
  std::vector<double> s(data.begin(), data.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const double F = cdf_fn(s[i]);
    d = std::max({d, std::abs(static_cast<double>(j) / n - F), std::abs(F - static_cast<double>(i) / n)});
    i = j;
  }
  return d;
}

struct MixtureBuildOptions {
  Family local_family = Family::LogNormal;
  double min_length = 30.0;
  LengthLawOptions length_law;
  LoessConfig loess;
  double alpha = 0.05;
  bool model_moments = true;  // lognormal: mu, omega from fitted parameters rather than sample moments
};

struct MixtureBuild {
  MixtureModel model;
  std::vector<FitResult> local_fits;  // aligned with `fitted_segments`
  std::vector<std::size_t> fitted_segments;
  std::vector<double> mu, omega;      // per fitted segment
  std::vector<std::string> warnings;
};

/// Fits the local family per segment and every relation of the model.
/// Segments whose local fit fails are left out with a warning.
inline MixtureBuild build_mixture(std::span<const double> values, const Segmentation& seg,
                                  const MixtureBuildOptions& opt = {}) {
  MixtureBuild out;
  out.model.local_family = opt.local_family;
  std::vector<double> thetas, lengths, mu_ok, len_ok;
  for (std::size_t k = 0; k < seg.segments.size(); ++k) {
    const auto& s = seg.segments[k];
    const auto window = values.subspan(s.start, s.length());
    lengths.push_back(static_cast<double>(s.length()));
    try {
      auto fit = fit_mle(opt.local_family, window, opt.alpha);
      out.model.segments.push_back({static_cast<double>(s.length()), fit.params});
      out.local_fits.push_back(fit);
      out.fitted_segments.push_back(k);
      thetas.push_back(fit.params.p2);
      // Lognormal patches use the moments implied by the fitted parameters,
      // the same identities that eliminate phi in favour of theta.
      Moments mom{s.mean, s.variance};
      if (opt.local_family == Family::LogNormal && opt.model_moments)
        mom = lognormal_moments(fit.params.p1, fit.params.p2);
      if (mom.variance > 0.0 && mom.mean > 0.0) {
        out.mu.push_back(mom.mean);
        out.omega.push_back(mom.variance);
      }
      mu_ok.push_back(s.mean);
      len_ok.push_back(static_cast<double>(s.length()));
    } catch (const std::exception& e) {
      out.warnings.push_back("segment " + std::to_string(k) + " [" + std::to_string(s.start) + "," +
                             std::to_string(s.end) + "): " + e.what());
    }
  }
  if (out.model.segments.empty()) throw InputError("build_mixture: no segment could be fitted");

  double lmin = opt.min_length;
  for (double l : lengths) lmin = std::min(lmin, l);
  out.model.length_law = fit_length_law(lengths, lmin, opt.length_law);
  for (const auto& w : out.model.length_law.warnings) out.warnings.push_back(w);

  if (thetas.size() >= 20) out.model.theta_prior = fit_theta_prior(thetas);
  else out.warnings.push_back("fewer than 20 fitted segments; theta prior left at defaults");
  if (out.mu.size() >= 20) out.model.relation = fit_mu_omega(out.mu, out.omega);
  else out.warnings.push_back("fewer than 20 segments with positive variance; mu-omega relation not fitted");

  if (mu_ok.size() >= 10) {
    try {
      out.model.mu_length = loess_fit(mu_ok, len_ok, opt.loess);
    } catch (const InputError& e) {
      out.warnings.push_back(std::string("length-vs-mean loess: ") + e.what());
    }
  }
  return out;
}

}  // namespace superstat
