#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "superstat/dynamics.hpp"
#include "superstat/synth.hpp"

using namespace superstat;
using Catch::Approx;

TEST_CASE("length fluctuation examples") {
  const std::vector<double> flat(10, 45.0);
  for (double d : length_fluctuations(flat, 3)) CHECK(d == 0.0);
  CHECK(length_fluctuations(std::vector<double>{30, 60, 90}, 1) == std::vector<double>{30, 30});

  std::mt19937_64 rng(4);
  std::vector<double> l(57);
  for (auto& x : l) x = 30 + std::floor(std::exponential_distribution<double>(1.0 / 116)(rng));
  const auto d2 = length_fluctuations(l, 2);
  REQUIRE(d2.size() == l.size() - 2);
  for (std::size_t i = 0; i < d2.size(); ++i) CHECK(d2[i] == l[i + 2] - l[i]);

  // Reversal negates and re-indexes.
  std::vector<double> r(l.rbegin(), l.rend());
  const auto rd = length_fluctuations(r, 2);
  for (std::size_t i = 0; i < rd.size(); ++i) CHECK(rd[i] == -d2[d2.size() - 1 - i]);

  CHECK_THROWS_AS(length_fluctuations(l, 0), InputError);
  CHECK_THROWS_AS(length_fluctuations(l, l.size()), InputError);
}

TEST_CASE("autocorr estimator identities") {
  std::mt19937_64 rng(6);
  auto x = testutil::normals(500, 2.0, 1.5, rng);
  const auto rep = autocorr(x, 10, {.shuffles = 20});
  double m = 0.0, v = 0.0;
  for (double e : x) m += e;
  m /= x.size();
  for (double e : x) v += (e - m) * (e - m);
  v /= x.size();
  CHECK(rep.covariance[0] == Approx(v).epsilon(1e-12));
  CHECK(rep.normalized[0] == 1.0);
  CHECK(rep.lags.size() == 11);

  auto shifted = x;
  for (auto& e : shifted) e += 1000.0;
  const auto rs = autocorr(shifted, 10, {.shuffles = 20});
  for (std::size_t l = 0; l <= 10; ++l) CHECK(rs.covariance[l] == Approx(rep.covariance[l]).margin(1e-9));
  CHECK(rs.noise_level == Approx(rep.noise_level).epsilon(1e-6));

  const auto again = autocorr(x, 10, {.shuffles = 20});
  CHECK(again.noise_level == rep.noise_level);
}

TEST_CASE("autocorr degenerate and invalid input") {
  const auto c = autocorr(std::vector<double>(50, 3.0), 5);
  CHECK(c.degenerate);
  CHECK(c.noise_level == 0.0);
  for (double v : c.covariance) CHECK(v == 0.0);
  CHECK_THROWS_AS(autocorr(std::vector<double>(5, 1.0), 5), InputError);
  CHECK_THROWS_AS(autocorr(std::vector<double>(50, 1.0), 0), InputError);
}

TEST_CASE("white noise is at the noise level from lag 1") {
  int at_one = 0;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto rep = autocorr(testutil::normals(10000, 0, 1, rng), 20, {.shuffles = 100, .seed = 5u + seed});
    CHECK(rep.noise_level > 0.0);
    at_one += rep.first_lag_at_noise == std::size_t{1};
  }
  CHECK(at_one >= 18);
}

TEST_CASE("AR(1) decay lag") {
  std::mt19937_64 rng(90);
  std::normal_distribution<double> N(0, 1);
  std::vector<double> x(10000);
  double prev = 0.0;
  for (auto& e : x) e = prev = 0.9 * prev + N(rng);
  const auto rep = autocorr(x, 40, {.shuffles = 50});
  REQUIRE(rep.decay_lag);
  const double tau = -1.0 / std::log(0.9);
  CHECK(std::abs(static_cast<double>(*rep.decay_lag) - tau) <= 0.3 * tau);
}

TEST_CASE("block persistence of 18 segments") {
  std::mt19937_64 rng(18);
  std::normal_distribution<double> N(0, 1);
  std::vector<double> mu;
  while (mu.size() < 5000) {
    const double level = N(rng);
    for (int k = 0; k < 18; ++k) mu.push_back(1.0 + 0.3 * level + 0.05 * N(rng));
  }
  const auto rep = autocorr(mu, 30);
  REQUIRE(rep.first_lag_at_noise);
  CHECK(std::abs(static_cast<double>(*rep.first_lag_at_noise) - 18.0) <= 5.0);
}

TEST_CASE("intraday profile: octile occupancy is exact") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {8u, 9u, 15u, 100u, 803u}) {
    std::vector<double> starts(n), lengths(n, 50.0);
    for (auto& s : starts) s = std::floor(std::uniform_real_distribution<double>(0, 390)(rng));
    const auto p = intraday_profile(starts, lengths, 390.0);
    double total = 0.0;
    for (std::size_t b = 0; b < kBands; ++b) {
      CHECK((p.band_counts[b] == n / 8 || p.band_counts[b] == (n + 7) / 8));
      total += p.band_probability[b];
    }
    CHECK(total == Approx(1.0).margin(1e-12));
    CHECK(std::is_sorted(p.band_edges.begin(), p.band_edges.end()));
  }
  CHECK_THROWS_AS(intraday_profile(std::vector<double>(7, 1.0), std::vector<double>(7, 30.0), 390.0), InputError);
}

TEST_CASE("intraday profile: uniform and first-hour starts") {
  std::mt19937_64 rng(8);
  const std::size_t n = 8000;
  std::vector<double> starts(n), lengths(n);
  std::exponential_distribution<double> E(1.0 / 116);
  for (std::size_t i = 0; i < n; ++i) {
    starts[i] = std::floor(std::uniform_real_distribution<double>(0, 390)(rng));
    lengths[i] = 30 + std::floor(E(rng));
  }
  const auto p = intraday_profile(starts, lengths, 390.0);
  for (const auto& cls : p.classes) {
    if (cls.count < 200) continue;
    const double se = std::sqrt(0.125 * 0.875 / cls.count);
    for (double q : cls.band_given_class) CHECK(std::abs(q - 0.125) <= 4.0 * se);
  }
  for (double q : p.clock_probability) CHECK(std::abs(q - 0.125) <= 4.0 * std::sqrt(0.125 * 0.875 / n));

  for (auto& s : starts) s = std::floor(std::uniform_real_distribution<double>(0, 60)(rng));
  const auto early = intraday_profile(starts, lengths, 390.0);
  CHECK(early.clock_probability[0] + early.clock_probability[1] == Approx(1.0));
  for (std::size_t b = 2; b < kBands; ++b) CHECK(early.clock_counts[b] == 0);
}

TEST_CASE("intraday profile: U-shaped start intensity") {
  SynthSpec spec;
  spec.seed = 12;
  spec.length = 200000;
  spec.u_shape = true;
  const auto gen = generate_volume(spec);
  const auto& ts = gen.volume.series().timestamps();
  std::vector<double> starts, lengths;
  for (const auto& s : gen.truth.segments) {
    if (s.start == 0) continue;
    starts.push_back(static_cast<double>(spec.calendar.minute_of_session(ts[s.start])));
    lengths.push_back(static_cast<double>(s.length));
  }
  const auto p = intraday_profile(starts, lengths, spec.calendar.session_length());
  const double n = static_cast<double>(starts.size());
  const auto& expect = gen.truth.start_band_probability;
  for (std::size_t b = 0; b < kBands; ++b) {
    const double se = std::sqrt(expect[b] * (1 - expect[b]) / n);
    CHECK(std::abs(p.clock_probability[b] - expect[b]) <= 3.0 * se);
  }
  CHECK(p.clock_probability[0] > 0.125);
  CHECK(p.clock_probability[7] > 0.125);
  CHECK(p.clock_probability[3] < 0.125);
  CHECK(p.clock_probability[4] < 0.125);
}

TEST_CASE("length against mean") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> N(0, 1);
  std::vector<double> mu, len;
  for (int i = 0; i < 300; ++i) {
    mu.push_back(std::exp(0.5 * N(rng)));
    len.push_back(200.0 / mu.back() + 10.0 * N(rng));
  }
  const auto inv = length_vs_mean(mu, len);
  CHECK(inv.monotonicity == -1);
  CHECK(inv.fitted_slope < 0.0);

  int flat = 0;
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 r2(seed);
    std::vector<double> m2, l2;
    for (int i = 0; i < 300; ++i) {
      m2.push_back(std::exp(0.5 * N(r2)));
      l2.push_back(30 + std::exponential_distribution<double>(1.0 / 116)(r2));
    }
    const auto rep = length_vs_mean(m2, l2);
    flat += std::abs(rep.fitted_slope) < 2.0 * rep.raw_slope_se;
  }
  CHECK(flat >= 45);
  CHECK_THROWS_AS(length_vs_mean(std::vector<double>{1, 2}, std::vector<double>{30, 40}), InputError);
}
