#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <random>

#include "superstat/mixture.hpp"
#include "superstat/segmentation.hpp"
#include "superstat/synth.hpp"

using namespace superstat;
using Catch::Approx;

namespace {

double uniform(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

std::vector<double> draws(Family f, Params p, std::size_t n, std::mt19937_64& rng) {
  std::vector<double> out(n);
  for (auto& x : out) x = quantile(f, p, uniform(rng, 1e-12, 1.0 - 1e-12));
  return out;
}

MixtureModel toy_model() {
  MixtureModel m;
  m.segments = {{40, {-0.3, 0.7}}, {120, {0.1, 0.9}}, {75, {0.4, 1.2}}, {300, {-0.1, 0.5}}};
  return m;
}

}  // namespace

TEST_CASE("length law examples") {
  const std::vector<double> flat(50, 30.0);
  const auto deg = fit_length_law(flat, 30.0);
  CHECK(deg.lambda == 0.0);
  CHECK_FALSE(deg.warnings.empty());

  std::mt19937_64 rng(116);
  std::exponential_distribution<double> E(1.0 / 116.0);
  std::vector<double> l(10000);
  for (auto& x : l) x = 30.0 + E(rng);
  const auto law = fit_length_law(l, 30.0);
  CHECK(law.lambda == Approx(116.0).margin(3.5));
  CHECK(law.lambda_se == Approx(1.16).margin(0.1));
  CHECK(law.tail_fraction == Approx(std::exp(-300.0 / 116.0)).margin(0.01));

  // 5% of lengths from a heavy second regime beyond the break.
  std::exponential_distribution<double> heavy(1.0 / 600.0);
  for (std::size_t i = 0; i < l.size(); i += 20) l[i] = 330.0 + heavy(rng);
  const auto core = fit_length_law(l, 30.0, {.truncate_at_tail_break = true});
  CHECK(core.truncated);
  CHECK(core.lambda == Approx(116.0).epsilon(0.05));
  CHECK(fit_length_law(l, 30.0).lambda > 1.2 * 116.0);

  const auto few = fit_length_law(std::vector<double>{31, 40, 80, 35}, 30.0);
  CHECK(few.lambda == Approx(16.5));
  CHECK_FALSE(few.warnings.empty());
  CHECK_THROWS_AS(fit_length_law(std::vector<double>{10, 40}, 30.0), InputError);
}

TEST_CASE("noiseless single line is recovered exactly") {
  std::mt19937_64 rng(2);
  std::vector<double> mu, om;
  for (int i = 0; i < 200; ++i) {
    const double x = uniform(rng, -3.0, 3.0);
    om.push_back(std::exp(x));
    mu.push_back(std::exp(0.45 * x + 0.03));
  }
  const auto r = fit_mu_omega(mu, om);
  CHECK(r.mode == RelationMode::Single);
  CHECK(r.alpha_lo == Approx(0.45).margin(1e-8));
  CHECK(r.beta_lo == Approx(0.03).margin(1e-8));
  CHECK(r.alpha_single == r.alpha_lo);
  CHECK(std::isnan(r.crossover));
}

TEST_CASE("dual-linear relation is recovered") {
  const double a_lo = 0.45, b_lo = 0.03, a_hi = 0.24, b_hi = 0.22;
  const double cross = (b_hi - b_lo) / (a_lo - a_hi);
  int ok = 0;
  const int seeds = 30;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> X(cross, 1.5);
    std::vector<double> mu, om;
    for (int i = 0; i < 2000; ++i) {
      const double x = X(rng);
      const bool hi = x > cross;
      const double y = (hi ? a_hi * x + b_hi : a_lo * x + b_lo) + std::normal_distribution<double>(0.0, hi ? 0.39 : 0.28)(rng);
      om.push_back(std::exp(x));
      mu.push_back(std::exp(y));
    }
    const auto r = fit_mu_omega(mu, om);
    if (r.mode != RelationMode::Dual) continue;
    CHECK(r.mu_at_crossover == Approx(std::exp(r.alpha_lo * r.crossover + r.beta_lo)).epsilon(1e-12));
    CHECK(r.ln_mu(r.crossover) == Approx(r.alpha_hi * r.crossover + r.beta_hi).margin(1e-12));
    CHECK(r.n_lo + r.n_hi == 2000);
    if (std::abs(r.alpha_lo - a_lo) <= 0.05 && std::abs(r.alpha_hi - a_hi) <= 0.05 && std::abs(r.crossover - cross) <= 0.3)
      ++ok;
  }
  CHECK(ok >= 0.9 * seeds);
}

TEST_CASE("fit_mu_omega input errors") {
  std::vector<double> mu(30, 1.0), om(30, 2.0);
  om[7] = 0.0;
  CHECK_THROWS_AS(fit_mu_omega(mu, om), InputError);
  CHECK_THROWS_AS(fit_mu_omega(std::vector<double>(10, 1.0), std::vector<double>(10, 1.0)), InputError);
}

TEST_CASE("phi_of_theta examples and round trip") {
  for (double t : {0.1, 0.7, 2.0}) CHECK(phi_of_theta(t, 0.0, 0.0) == Approx(-0.5 * t * t).margin(1e-15));
  CHECK(phi_of_theta(1.0, 0.25, 0.0) == Approx(-0.22933).margin(1e-5));
  CHECK_THROWS_AS(phi_of_theta(1.0, 0.5, 0.0), InputError);
  CHECK_THROWS_AS(phi_of_theta(0.0, 0.3, 0.0), InputError);

  std::mt19937_64 rng(100);
  for (int k = 0; k < 100; ++k) {
    const double alpha = k % 2 ? uniform(rng, -1.0, 0.45) : uniform(rng, 0.55, 1.5);
    const double beta = uniform(rng, -1.0, 1.0);
    const double theta = uniform(rng, 0.05, 2.5);
    const auto m = lognormal_moments(phi_of_theta(theta, alpha, beta), theta);
    CHECK(std::log(m.mean) == Approx(alpha * std::log(m.variance) + beta).margin(1e-10));
  }
}

TEST_CASE("theta prior selection") {
  std::mt19937_64 rng(32);
  const std::size_t n = 10000;
  const auto g = fit_theta_prior(draws(Family::Gamma, {32.8, 0.028}, n, rng));
  REQUIRE(g.family == Family::Gamma);
  CHECK(g.candidates.size() == 5);
  // Standard errors from the inverse Fisher information of the Gamma MLE.
  const double k = 32.8, s = 0.028;
  const double i11 = boost::math::trigamma(k), i12 = 1.0 / s, i22 = k / (s * s);
  const double det = n * (i11 * i22 - i12 * i12);
  CHECK(std::abs(g.params.p1 - k) < 3.0 * std::sqrt(i22 / det));
  CHECK(std::abs(g.params.p2 - s) < 3.0 * std::sqrt(i11 / det));

  const auto w = fit_theta_prior(draws(Family::Weibull, {3.25, 1.26}, n, rng));
  CHECK(w.family == Family::Weibull);
  CHECK_THROWS_AS(fit_theta_prior(std::vector<double>(10, 1.0)), InputError);
}

TEST_CASE("weighted mixture identities") {
  const Params p{0.2, 0.8};
  MixtureModel one;
  one.segments = {{100, p}};
  MixtureModel two;
  two.segments = {{50, p}, {50, p}};
  for (double v : {0.05, 0.3, 1.0, 4.0}) {
    CHECK(long_term_pdf_weighted(one, v) == Approx(pdf(Family::LogNormal, p, v)).epsilon(1e-14));
    CHECK(long_term_pdf_weighted(two, v) == Approx(long_term_pdf_weighted(one, v)).epsilon(1e-14));
  }
  auto m = toy_model();
  auto r = m;
  std::reverse(r.segments.begin(), r.segments.end());
  auto split = m;
  split.segments[1].length = 70;
  split.segments.push_back({50, split.segments[1].params});
  for (double v : {0.05, 0.3, 1.0, 4.0}) {
    CHECK(long_term_pdf_weighted(r, v) == Approx(long_term_pdf_weighted(m, v)).epsilon(1e-13));
    CHECK(long_term_pdf_weighted(split, v) == Approx(long_term_pdf_weighted(m, v)).epsilon(1e-13));
  }
  const auto total = integrate([&](double v) { return long_term_pdf_weighted(m, v); }, 0.0, INFINITY, {1e-10, 1e-10, 4000});
  CHECK(total.value == Approx(1.0).margin(1e-6));
  CHECK(long_term_cdf_weighted(m, 1e9) == Approx(1.0).margin(1e-12));
  CHECK_THROWS_AS(long_term_pdf_weighted(MixtureModel{}, 1.0), InputError);
}

TEST_CASE("integral form limits and normalization") {
  MixtureModel m;
  m.relation.alpha_lo = 0.45;
  m.relation.beta_lo = 0.03;
  m.theta_prior.params = {1e6, 0.5 / 1e6};  // nearly a point mass at 0.5
  const double phi = phi_of_theta(0.5, 0.45, 0.03);
  for (double v : {0.3, 1.0, 2.5}) CHECK(long_term_pdf_integral(m, v) == Approx(pdf(Family::LogNormal, {phi, 0.5}, v)).margin(1e-4));

  MixtureModel ref;
  ref.relation.alpha_lo = 0.45;
  ref.relation.beta_lo = 0.03;
  ref.relation.sigma_lo = 0.28;
  const auto total = integrate([&](double v) { return long_term_pdf_integral(ref, v); }, 0.0, INFINITY, {1e-7, 1e-7, 2000});
  CHECK(total.value == Approx(1.0).margin(1e-5));
  CHECK(long_term_cdf_integral(ref, 1e30) == Approx(1.0).margin(1e-6));
  CHECK(long_term_pdf_integral(ref, -1.0) == 0.0);

  ref.relation.mode = RelationMode::Dual;
  CHECK_THROWS_AS(long_term_pdf_integral(ref, 1.0), InputError);
}

TEST_CASE("return mixture symmetry, normalization and tails") {
  for (double phi : {2.0, 2.5, 3.0, 4.0}) {
    const VolatilityPrior p{phi, 4e-3};
    for (auto kern : {ReturnKernel::Laplace, ReturnKernel::Gaussian}) {
      for (double r : {0.0, 0.01, 0.05, 0.3}) CHECK(return_mixture_pdf(p, r, kern) == Approx(return_mixture_pdf(p, -r, kern)).epsilon(1e-12));
      const auto total = integrate([&](double r) { return 2.0 * return_mixture_pdf(p, r, kern); }, 0.0, INFINITY, {1e-9, 1e-9, 2000});
      CHECK(total.value == Approx(1.0).margin(1e-5));
    }
    const double s = std::sqrt(p.scale), r1 = 100.0 * s, r2 = 1000.0 * s;
    const double slope = (std::log(return_mixture_pdf(p, r2, ReturnKernel::Gaussian)) -
                          std::log(return_mixture_pdf(p, r1, ReturnKernel::Gaussian))) / std::log(10.0);
    CHECK(slope == Approx(-1.0 - 2.0 * phi).margin(0.2));
  }
  CHECK_THROWS_AS(return_mixture_pdf({-1.0, 1.0}, 0.1), InputError);
}

TEST_CASE("grid and EDF distances") {
  const auto g = log_grid(0.01, 100.0, 5);
  CHECK(g.front() == Approx(0.01));
  CHECK(g[2] == Approx(1.0));
  CHECK(g.back() == Approx(100.0));
  const std::vector<double> data{1.0, 2.0, 2.0, 3.0};
  // Uniform(0,4) CDF against the EDF: largest gap is at the double jump at 2.
  CHECK(ks_distance_to_edf(data, [](double x) { return x / 4.0; }) == Approx(0.25));
}

TEST_CASE("synthetic volume: weighted mixture matches the data") {
  SynthSpec spec;
  spec.seed = 3;
  const auto gen = generate_volume(spec);
  const auto v = gen.volume.values();
  const auto seg = segment(v);
  const auto b = build_mixture(v, seg);
  const auto& m = b.model;
  CHECK(m.local_family == Family::LogNormal);
  CHECK(m.segments.size() == b.local_fits.size());
  if (b.local_fits.size() == seg.segments.size()) CHECK(m.total_length() == static_cast<double>(v.size()));
  CHECK(b.fitted_segments.size() == b.local_fits.size());
  CHECK(b.mu.size() == b.omega.size());
  for (std::size_t i = 0; i < b.mu.size(); ++i) {
    const auto mm = lognormal_moments(b.local_fits[i].params.p1, b.local_fits[i].params.p2);
    CHECK(b.mu[i] == Approx(mm.mean).epsilon(1e-12));
  }
  const double edf = ks_distance_to_edf(v, [&](double x) { return long_term_cdf_weighted(m, x); });
  CHECK(edf <= 0.03);
  const auto grid = log_grid(0.02, 20.0, 200);
  MixtureModel single = m;
  single.relation = m.relation.as_single();
  const double d = ks_distance_on_grid([&](double x) { return long_term_cdf_integral(single, x); },
                                       [&](double x) { return long_term_cdf_weighted(m, x); }, grid);
  CHECK(d <= 0.05);
  CHECK(m.length_law.lambda == Approx(116.0).epsilon(0.25));
  CHECK(m.theta_prior.family == Family::Gamma);
}
