#pragma once

// Ground-truth generator for the superstatistical model.
//
// Patch boundaries follow a discrete-time hazard: after l_min minutes a new
// patch starts with probability h(t) each minute. A constant hazard
// 1 - exp(-1/lambda) gives the shifted exponential length law (geometric in
// whole minutes); the U-shape mode modulates h by the time of session.
// Each patch draws its parameters from the priors and its values from the
// local family with a generator seeded from (seed, stream, patch index).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "superstat/core.hpp"
#include "superstat/distributions.hpp"
#include "superstat/impact.hpp"
#include "superstat/mixture.hpp"
#include "superstat/timeseries.hpp"

namespace superstat {

struct SynthSpec {
  std::uint64_t seed = 1;
  std::size_t length = 50000;  // minutes

  double lambda = 116.0;  // volume patches
  double min_length = 30.0;

  Family theta_family = Family::Gamma;
  Params theta_params{32.8, 0.028};
  std::optional<double> fixed_theta;

  // ln mu = alpha ln omega + beta + eta; dual mode adds the branch above
  // the intersection of the two lines.
  RelationMode relation = RelationMode::Single;
  double alpha = 0.45, beta = 0.03, sigma_eta = 0.28;
  double alpha_hi = 0.24, beta_hi = 0.22, sigma_eta_hi = 0.39;
  bool normalize = true;  // divide volume by its mean

  // Returns: patches of their own length scale, inverse-gamma Sigma = 2 sigma^2,
  // zero-mean Laplace draws with scale sigma.
  double return_lambda = 77.0;
  VolatilityPrior volatility{2.5, 4e-3};
  std::optional<double> fixed_sigma2;  // fixed Sigma for every patch

  // Coupled mode: sign probabilities and log-form impact.
  SignCurve g_plus{0.47, 1.22, 0.25};
  SignCurve g_minus{0.40, 2.56, 0.30};
  double impact_a = 0.056, impact_b = 0.0062, impact_sigma = 0.01;
  double start_price = 100.0;

  Calendar calendar{};
  std::int64_t start_day = 12418;  // 2004-01-01
  bool u_shape = false;
  double u_shape_amplitude = 0.6;  // start intensity 1 + A (12 (x - 1/2)^2 - 1), x in [0,1)

  void validate() const {
    calendar.validate();
    if (length < 2) throw InputError("synth: length must be >= 2");
    if (!(lambda > 0.0) || !(return_lambda > 0.0)) throw InputError("synth: lambda must be positive");
    if (!(min_length >= 1.0)) throw InputError("synth: min_length must be >= 1");
    superstat::validate(theta_family, theta_params);
    if (fixed_theta && !(*fixed_theta > 0.0)) throw InputError("synth: fixed theta must be positive");
    if (!(sigma_eta >= 0.0) || !(sigma_eta_hi >= 0.0) || !(impact_sigma >= 0.0))
      throw InputError("synth: noise SDs must be >= 0");
    if (!(alpha < 0.5) || (relation == RelationMode::Dual && !(alpha_hi < 0.5)))
      throw InputError("synth: slopes must be below 1/2 for a unique lognormal location");
    if (relation == RelationMode::Dual && alpha == alpha_hi) throw InputError("synth: dual slopes must differ");
    volatility.validate();
    if (fixed_sigma2 && !(*fixed_sigma2 > 0.0)) throw InputError("synth: fixed Sigma must be positive");
    for (const SignCurve* g : {&g_plus, &g_minus})
      if (!(g->G >= 0.0 && g->G <= 1.0) || !(g->varpi > 0.0) || !(g->beta > 0.0))
        throw InputError("synth: invalid sign-probability parameters");
    if (g_plus.G + g_minus.G > 1.0) throw InputError("synth: G+ + G- must not exceed 1");
    if (!(u_shape_amplitude >= 0.0 && u_shape_amplitude <= 1.0)) throw InputError("synth: U-shape amplitude in [0,1]");
  }

  /// ln omega at which the two lines cross.
  [[nodiscard]] double crossover() const { return (beta_hi - beta) / (alpha - alpha_hi); }
};

struct TruthSegment {
  std::size_t start = 0;
  std::size_t length = 0;
  double phi = 0.0;     // lognormal location after normalization
  double theta = 0.0;   // lognormal scale
  double eta = 0.0;     // residual on ln mu
  double sigma2 = 0.0;  // Sigma of a return patch
};

struct SynthTruth {
  std::vector<std::size_t> cuts;
  std::vector<TruthSegment> segments;
  double mean_volume = 1.0;                  // divisor applied by normalization
  std::vector<double> start_band_probability;  // expected share of starts per clock band

  [[nodiscard]] std::vector<double> lengths() const {
    std::vector<double> out;
    for (const auto& s : segments) out.push_back(static_cast<double>(s.length));
    return out;
  }
};

struct SynthVolume {
  NormalizedVolumeSeries volume;
  SynthTruth truth;
};

struct SynthReturns {
  ReturnSeries returns;
  SynthTruth truth;
};

struct SynthCoupled {
  NormalizedVolumeSeries volume;
  ReturnSeries returns;  // one per minute, zero when the price did not move
  std::vector<double> prices;
  SynthTruth truth;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL)) + index);
}

enum Stream : std::uint64_t { kLengths = 1, kVolumePatch = 2, kReturnPatch = 3, kMoves = 4 };

inline std::vector<std::int64_t> session_timestamps(const SynthSpec& s, std::size_t n) {
  const auto len = static_cast<std::size_t>(s.calendar.session_length());
  std::vector<std::int64_t> ts(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto day = s.start_day + static_cast<std::int64_t>(k / len);
    ts[k] = day * kMinutesPerDay + s.calendar.session_open + static_cast<std::int64_t>(k % len);
  }
  return ts;
}

inline double start_intensity(const SynthSpec& s, std::size_t minute) {
  if (!s.u_shape) return 1.0;
  const auto len = static_cast<double>(s.calendar.session_length());
  const double x = (static_cast<double>(minute % static_cast<std::size_t>(s.calendar.session_length())) + 0.5) / len;
  return 1.0 + s.u_shape_amplitude * (12.0 * (x - 0.5) * (x - 0.5) - 1.0);
}

inline double start_hazard(const SynthSpec& s, double lambda, std::size_t minute) {
  return std::min(1.0, -std::expm1(-1.0 / lambda) * start_intensity(s, minute));
}

/// Patch start positions for a series of n minutes.
inline std::vector<std::size_t> draw_starts(const SynthSpec& s, double lambda, std::size_t n, std::uint64_t stream) {
  std::mt19937_64 rng(derive_seed(s.seed, kLengths, stream));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto lmin = static_cast<std::size_t>(s.min_length);
  std::vector<std::size_t> starts{0};
  std::size_t last = 0;
  for (std::size_t t = lmin; t < n; ++t) {
    if (t - last < lmin) continue;
    if (U(rng) < start_hazard(s, lambda, t)) {
      starts.push_back(t);
      last = t;
    }
  }
  return starts;
}

/// Expected share of patch starts per clock band in the periodic regime:
/// s_t = h(t) (1 - sum of s over the previous l_min - 1 minutes).
inline std::vector<double> expected_start_bands(const SynthSpec& s, double lambda) {
  const auto len = static_cast<std::size_t>(s.calendar.session_length());
  const auto lmin = static_cast<std::size_t>(s.min_length);
  const std::size_t sessions = 400, keep = 200;
  std::vector<double> st(len * sessions, 0.0);
  std::vector<double> bands(8, 0.0);
  double window = 0.0;  // sum of s over (t - lmin, t)
  st[0] = 1.0;
  for (std::size_t t = 1; t < st.size(); ++t) {
    window += st[t - 1];
    if (t >= lmin) window -= st[t - lmin];
    st[t] = start_hazard(s, lambda, t) * std::max(0.0, 1.0 - window);
  }
  double total = 0.0;
  for (std::size_t t = len * (sessions - keep); t < st.size(); ++t) {
    bands[(t % len) * 8 / len] += st[t];
    total += st[t];
  }
  for (double& b : bands) b /= total;
  return bands;
}

inline double draw_from(Family f, Params p, std::mt19937_64& rng) {
  switch (f) {
    case Family::Gamma: return std::gamma_distribution<double>(p.p1, p.p2)(rng);
    case Family::Weibull: return std::weibull_distribution<double>(p.p1, p.p2)(rng);
    case Family::LogNormal: return std::lognormal_distribution<double>(p.p1, p.p2)(rng);
    default: {
      std::uniform_real_distribution<double> U(0.0, 1.0);
      double u = U(rng);
      while (u <= 0.0) u = U(rng);
      return quantile(f, p, u);
    }
  }
}

inline double laplace_draw(double scale, std::mt19937_64& rng) {
  std::exponential_distribution<double> E(1.0);
  const double a = E(rng), b = E(rng);
  return scale * (a - b);
}

// Normal(m, s) conditioned on being positive, by inversion of the upper tail.
inline double positive_normal_draw(double m, double s, std::mt19937_64& rng) {
  if (s <= 0.0) return std::max(m, std::numeric_limits<double>::min());
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double mass = normal_cdf(m / s);  // P(X > 0)
  double u = U(rng);
  while (u <= 0.0) u = U(rng);
  // Upper-tail probability of the draw, measured from the truncation point.
  const double p = u * mass;
  const double z = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
  return std::max(m + s * z, std::numeric_limits<double>::min());
}

}  // namespace detail

/// ln mu for lognormal scale theta on the generating relation (without eta).
inline double generating_ln_mu(const SynthSpec& s, double theta) {
  const double L = std::log(std::expm1(theta * theta));  // ln omega = L + 2 ln mu
  const double lo = (s.alpha * L + s.beta) / (1.0 - 2.0 * s.alpha);
  if (s.relation == RelationMode::Single) return lo;
  const double hi = (s.alpha_hi * L + s.beta_hi) / (1.0 - 2.0 * s.alpha_hi);
  return L + 2.0 * lo <= s.crossover() ? lo : hi;
}

inline SynthVolume generate_volume(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.length;
  auto starts = detail::draw_starts(spec, spec.lambda, n, 0);
  SynthTruth truth;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::size_t a = starts[i], b = i + 1 < starts.size() ? starts[i + 1] : n;
    std::mt19937_64 rng(detail::derive_seed(spec.seed, detail::kVolumePatch, i));
    TruthSegment seg;
    seg.start = a;
    seg.length = b - a;
    seg.theta = spec.fixed_theta ? *spec.fixed_theta : detail::draw_from(spec.theta_family, spec.theta_params, rng);
    const double ln_mu0 = generating_ln_mu(spec, seg.theta);
    const bool upper = spec.relation == RelationMode::Dual &&
                       std::log(std::expm1(seg.theta * seg.theta)) + 2.0 * ln_mu0 > spec.crossover();
    const double sd = upper ? spec.sigma_eta_hi : spec.sigma_eta;
    seg.eta = sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng) : 0.0;
    seg.phi = ln_mu0 + seg.eta - 0.5 * seg.theta * seg.theta;
    std::lognormal_distribution<double> LN(seg.phi, seg.theta);
    for (std::size_t t = a; t < b; ++t) v[t] = LN(rng);
    truth.segments.push_back(seg);
    if (i > 0) truth.cuts.push_back(a);
  }
  double mean = 1.0;
  if (spec.normalize) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(n);
    for (double& x : v) x /= mean;
    for (auto& s : truth.segments) s.phi -= std::log(mean);
  }
  truth.mean_volume = mean;
  truth.start_band_probability =
      spec.u_shape ? detail::expected_start_bands(spec, spec.lambda) : std::vector<double>(8, 0.125);
  Series series(detail::session_timestamps(spec, n), std::move(v), spec.calendar);
  return {NormalizedVolumeSeries(std::move(series), mean), std::move(truth)};
}

inline SynthReturns generate_returns(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.length;
  auto starts = detail::draw_starts(spec, spec.return_lambda, n, 1);
  SynthTruth truth;
  std::vector<double> r(n);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::size_t a = starts[i], b = i + 1 < starts.size() ? starts[i + 1] : n;
    std::mt19937_64 rng(detail::derive_seed(spec.seed, detail::kReturnPatch, i));
    TruthSegment seg;
    seg.start = a;
    seg.length = b - a;
    seg.sigma2 = spec.fixed_sigma2 ? *spec.fixed_sigma2
                                   : spec.volatility.scale /
                                         std::gamma_distribution<double>(spec.volatility.shape, 1.0)(rng);
    const double scale = std::sqrt(seg.sigma2 / 2.0);
    for (std::size_t t = a; t < b; ++t) r[t] = detail::laplace_draw(scale, rng);
    truth.segments.push_back(seg);
    if (i > 0) truth.cuts.push_back(a);
  }
  truth.start_band_probability =
      spec.u_shape ? detail::expected_start_bands(spec, spec.return_lambda) : std::vector<double>(8, 0.125);
  Series series(detail::session_timestamps(spec, n), std::move(r), spec.calendar);
  return {ReturnSeries(std::move(series)), std::move(truth)};
}

/// Volume as in generate_volume; per minute a move with probability
/// g+(v) + g-(v), its sign by their ratio, and magnitude a + b ln v plus
/// Gaussian noise, conditioned positive.
inline SynthCoupled generate_coupled(const SynthSpec& spec) {
  auto vol = generate_volume(spec);
  const auto v = vol.volume.values();
  const std::size_t n = v.size();
  std::vector<double> r(n, 0.0), prices(n);
  const std::size_t block = 4096;
  for (std::size_t k0 = 0; k0 < n; k0 += block) {
    std::mt19937_64 rng(detail::derive_seed(spec.seed, detail::kMoves, k0 / block));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (std::size_t t = k0; t < std::min(n, k0 + block); ++t) {
      const double gp = spec.g_plus(v[t]), gm = spec.g_minus(v[t]);
      const double u = U(rng);
      if (u >= gp + gm || v[t] <= 0.0) continue;
      const double mag = detail::positive_normal_draw(spec.impact_a + spec.impact_b * std::log(v[t]), spec.impact_sigma, rng);
      r[t] = u < gp ? mag : -mag;
    }
  }
  // Prices accumulate within sessions; the first minute of a session carries
  // no move of its own so that price differences reproduce r exactly.
  const auto len = static_cast<std::size_t>(spec.calendar.session_length());
  double p = spec.start_price;
  for (std::size_t t = 0; t < n; ++t) {
    if (t % len == 0) r[t] = 0.0;
    p += r[t];
    prices[t] = p;
  }
  ReturnSeries returns(vol.volume.series().with_values(r));
  return {std::move(vol.volume), std::move(returns), std::move(prices), std::move(vol.truth)};
}

}  // namespace superstat
