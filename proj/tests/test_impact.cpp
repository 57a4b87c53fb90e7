#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "superstat/impact.hpp"
#include "superstat/synth.hpp"

using namespace superstat;
using Catch::Approx;

namespace {

struct Scatter {
  std::vector<double> v, r;
};

// Log-form impact with Gaussian noise, conditioned positive, random signs.
Scatter log_impact_scatter(std::size_t n, double a, double b, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> V(0.0, 0.8);
  std::normal_distribution<double> N(0.0, sigma);
  std::bernoulli_distribution up(0.5);
  Scatter s;
  while (s.v.size() < n) {
    const double v = V(rng);
    const double m = a + b * std::log(v) + N(rng);
    if (m <= 0.0) continue;
    s.v.push_back(v);
    s.r.push_back(up(rng) ? m : -m);
  }
  return s;
}

const SynthCoupled& coupled() {
  static const SynthCoupled data = [] {
    SynthSpec spec;
    spec.seed = 3;
    return generate_coupled(spec);
  }();
  return data;
}

}  // namespace

TEST_CASE("sign curves: boundary values and the unit sum") {
  SignProbModel m;
  m.plus = {0.47, 1.22, 0.25};
  m.minus = {0.40, 2.56, 0.30};
  CHECK(m.g_plus(0.0) == 0.0);
  CHECK(m.g_minus(0.0) == 0.0);
  CHECK(m.g_zero(0.0) == 1.0);
  CHECK(m.g_plus(1e12) == Approx(0.47).margin(1e-12));
  CHECK(m.g_minus(1e12) == Approx(0.40).margin(1e-12));
  for (double v : {0.01, 0.3, 1.0, 7.0}) CHECK(m.g_plus(v) + m.g_minus(v) + m.g_zero(v) == Approx(1.0).margin(1e-15));
  const auto c = sign_crossing(m);
  REQUIRE(c);
  CHECK(m.g_plus(*c) == Approx(m.g_minus(*c)).margin(1e-12));
}

TEST_CASE("no price moves give an all-zero fit") {
  std::vector<double> v(5000), r(5000, 0.0);
  std::mt19937_64 rng(1);
  for (auto& x : v) x = std::lognormal_distribution<double>(0, 1)(rng);
  const auto m = fit_sign_prob(v, r);
  CHECK(m.plus.G == 0.0);
  CHECK(m.minus.G == 0.0);
  for (double f : m.freq_zero) CHECK(f == 1.0);
  CHECK(m.g_zero(2.0) == 1.0);
  CHECK_THROWS_AS(fit_sign_prob(v, r, 10), InputError);
}

TEST_CASE("sign probabilities are recovered from coupled synthetic data") {
  const auto& d = coupled();
  const auto m = fit_sign_prob(d.volume.values(), d.returns.values());
  SynthSpec spec;
  CHECK(m.plus.G == Approx(spec.g_plus.G).margin(0.05));
  CHECK(m.minus.G == Approx(spec.g_minus.G).margin(0.05));
  CHECK(m.plus.varpi == Approx(spec.g_plus.varpi).epsilon(0.3));
  CHECK(m.minus.varpi == Approx(spec.g_minus.varpi).epsilon(0.3));
  CHECK(m.plus.beta == Approx(spec.g_plus.beta).epsilon(0.3));
  CHECK(m.minus.beta == Approx(spec.g_minus.beta).epsilon(0.3));
  CHECK(m.bin_volume.size() == 50);
  for (std::size_t k = 0; k < m.bin_volume.size(); ++k)
    CHECK(m.freq_plus[k] + m.freq_minus[k] + m.freq_zero[k] == Approx(1.0).margin(1e-12));
  const auto c = sign_crossing(m);
  REQUIRE(c);
  CHECK(*c > 0.5);
  CHECK(*c < 2.0);
}

TEST_CASE("log-form impact is recovered and preferred") {
  const double a = 0.056, b = 0.0062;
  int log_best = 0, within = 0;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto s = log_impact_scatter(20000, a, b, 0.01, seed);
    const auto rep = fit_impact(s.v, s.r, SignSelect::Both);
    log_best += rep.best == ImpactForm::Log;
    const auto& f = rep.fit(ImpactForm::Log);
    within += std::abs(f.a - a) <= 3 * f.a_se && std::abs(f.b - b) <= 3 * f.b_se;
    CHECK(rep.sigma_eta == Approx(0.01).epsilon(0.1));
    for (const auto& fit : rep.fits) CHECK(fit.chi2_dof >= 0.0);
  }
  CHECK(log_best == seeds);
  CHECK(within >= seeds - 1);
}

TEST_CASE("noiseless power law prefers the power form") {
  std::vector<double> v, r;
  for (int i = 1; i <= 400; ++i) {
    v.push_back(0.01 * i);
    r.push_back((i % 2 ? 1 : -1) * 0.01 * std::pow(v.back(), 0.3));
  }
  const auto rep = fit_impact(v, r, SignSelect::Both);
  CHECK(rep.best == ImpactForm::Power);
  CHECK(rep.fit(ImpactForm::Power).chi2_dof < rep.fit(ImpactForm::Log).chi2_dof);
  CHECK(rep.fit(ImpactForm::Power).chi2_dof < rep.fit(ImpactForm::Exp).chi2_dof);
  CHECK(rep.fit(ImpactForm::Power).b == Approx(0.3).margin(0.05));
}

TEST_CASE("log form is covariant under volume rescaling") {
  std::vector<double> v, r, cv;
  const double c = 7.5;
  for (int i = 1; i <= 300; ++i) {
    v.push_back(0.02 * i);
    cv.push_back(c * v.back());
    r.push_back(0.056 + 0.0062 * std::log(v.back()) + 0.05);
  }
  const auto f1 = fit_impact(v, r, SignSelect::Positive).fit(ImpactForm::Log);
  const auto f2 = fit_impact(cv, r, SignSelect::Positive).fit(ImpactForm::Log);
  CHECK(f2.b == Approx(f1.b).margin(1e-8));
  CHECK(f2.a == Approx(f1.a - f1.b * std::log(c)).margin(1e-8));
}

TEST_CASE("impact on coupled synthetic data: chi-square ordering") {
  const auto& d = coupled();
  const auto rep = fit_impact(d.volume.values(), d.returns.values(), SignSelect::Both);
  CHECK(rep.best == ImpactForm::Log);
  CHECK(rep.fit(ImpactForm::Log).chi2_dof < rep.fit(ImpactForm::Power).chi2_dof);
  CHECK(rep.fit(ImpactForm::Power).chi2_dof < rep.fit(ImpactForm::Exp).chi2_dof);
  CHECK(fit_impact(d.volume.values(), d.returns.values(), SignSelect::Positive).best == ImpactForm::Log);
  CHECK(fit_impact(d.volume.values(), d.returns.values(), SignSelect::Negative).best == ImpactForm::Log);
  CHECK_THROWS_AS(fit_impact(std::vector<double>{1, 2}, std::vector<double>{0.1, 0.1}, SignSelect::Both), InputError);
}

TEST_CASE("homogeneity of segment parameters") {
  int flat_a = 0, flat_b = 0, gauss = 0;
  const int seeds = 40;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<SegmentImpact> fits;
    for (int k = 0; k < 200; ++k) {
      const double len = 30 + std::exponential_distribution<double>(1.0 / 116)(rng);
      fits.push_back({static_cast<std::size_t>(k), len, 0.056 + std::normal_distribution<double>(0, 0.02)(rng),
                      0.0062 + std::normal_distribution<double>(0, 0.004)(rng), 50});
    }
    const auto h = homogeneity(fits);
    flat_a += std::abs(h.a.slope) < 2 * h.a.slope_se;
    flat_b += std::abs(h.b.slope) < 2 * h.b.slope_se;
    gauss += h.a.edf_distance < h.a.ks_critical;
  }
  CHECK(flat_a >= 0.85 * seeds);
  CHECK(flat_b >= 0.85 * seeds);
  CHECK(gauss >= 0.9 * seeds);

  std::vector<double> l, p;
  for (int k = 0; k < 50; ++k) {
    l.push_back(30 + 7 * k);
    p.push_back(0.003 * l.back());
  }
  const auto lin = parameter_homogeneity("a", l, p);
  CHECK(lin.slope == Approx(0.003).margin(1e-12));
  CHECK(lin.slope_se < 1e-10);
  CHECK_THROWS_AS(parameter_homogeneity("a", std::vector<double>(5, 1.0), std::vector<double>(5, 1.0)), InputError);
}

TEST_CASE("segment impact fits") {
  const auto& d = coupled();
  const auto v = d.volume.values();
  const auto r = d.returns.values();
  Segmentation seg = segmentation_from_cuts(v, d.truth.cuts);
  const auto fits = fit_impact_segments(v, r, seg);
  CHECK(fits.size() > 0.8 * seg.segments.size());
  double sa = 0.0;
  for (const auto& f : fits) {
    CHECK(f.moves >= 10);
    sa += f.a;
  }
  CHECK(sa / fits.size() == Approx(0.056).margin(0.01));
}

TEST_CASE("return density from volume") {
  MixtureModel m;
  m.segments = {{100, {-0.2, 0.6}}, {300, {0.1, 0.9}}};
  const auto P = volume_density(m);
  ImpactFit logf;
  logf.a = 0.056;
  logf.b = 0.0062;
  const auto grid = std::vector<double>{0.0, 0.02, 0.05, 0.08};

  SignProbModel still;  // G = 0: no moves
  still.plus.G = still.minus.G = 0.0;
  const auto none = return_pdf_from_volume(P, still, logf, 0.01, grid);
  CHECK(none.atom == Approx(1.0).margin(1e-6));
  for (double x : none.density) CHECK(x == 0.0);

  SignProbModel signs;
  signs.plus = {0.47, 1.22, 0.25};
  signs.minus = {0.40, 2.56, 0.30};
  const auto full = return_pdf_from_volume(P, signs, logf, 0.01, grid);
  CHECK(full.total_mass == Approx(1.0).margin(1e-4));
  double g0 = integrate([&](double v) { return signs.g_zero(v) * P.pdf(v); }, 0.0, INFINITY, {1e-10, 1e-10, 4000}).value;
  CHECK(full.atom == Approx(g0).margin(1e-7));
  CHECK(full.density[0] == 0.0);

  // Near-delta volume: the density peaks at a + b ln v0.
  MixtureModel spike;
  spike.segments = {{100, {std::log(2.0), 1e-3}}};
  const auto Ps = volume_density(spike);
  const double centre = logf.a + logf.b * std::log(2.0);
  const std::vector<double> around{centre - 0.003, centre, centre + 0.003};
  const auto pk = return_pdf_from_volume(Ps, signs, logf, 1e-3, around);
  CHECK(pk.density[1] > 3.0 * pk.density[0]);
  CHECK(pk.density[1] > 3.0 * pk.density[2]);
  const double move = signs.g_plus(2.0) + signs.g_minus(2.0);
  CHECK(pk.density[1] == Approx(move / (1e-3 * std::sqrt(2 * std::numbers::pi))).epsilon(0.01));

  CHECK_THROWS_AS(return_pdf_from_volume(P, signs, logf, 0.0, grid), InputError);
  ImpactFit pw = logf;
  pw.form = ImpactForm::Power;
  CHECK_THROWS_AS(return_pdf_from_volume(P, signs, pw, 0.01, grid), InputError);
}

TEST_CASE("impact-kernel density is light-tailed against heavy-tailed returns") {
  SynthSpec spec;
  spec.seed = 5;
  const auto heavy = generate_returns(spec);
  std::vector<double> ar;
  for (double r : heavy.returns.values())
    if (r != 0.0) ar.push_back(std::abs(r));
  std::sort(ar.begin(), ar.end());
  const double q = ar[static_cast<std::size_t>(0.999 * ar.size())];
  // Empirical density of |r| around its 99.9th percentile.
  const double w = 0.1 * q;
  const auto lo = std::lower_bound(ar.begin(), ar.end(), q - w), hi = std::upper_bound(ar.begin(), ar.end(), q + w);
  const double emp = static_cast<double>(hi - lo) / (ar.size() * 2 * w);

  MixtureModel m;
  m.segments = {{100, {-0.2, 0.6}}, {300, {0.1, 0.9}}};
  SignProbModel signs;
  signs.plus = spec.g_plus;
  signs.minus = spec.g_minus;
  ImpactFit logf;
  logf.a = spec.impact_a;
  logf.b = spec.impact_b;
  const auto res = return_pdf_from_volume(volume_density(m), signs, logf, spec.impact_sigma, std::vector<double>{q},
                                          {.total_mass = false});
  const double model = res.density[0] / (1.0 - res.atom);
  CHECK(emp >= 10.0 * model);
}
