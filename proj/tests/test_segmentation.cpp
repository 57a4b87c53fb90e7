#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "superstat/distributions.hpp"
#include "superstat/segmentation.hpp"
#include "superstat/synth.hpp"

using namespace superstat;
using Catch::Approx;

namespace {

// Direct EDF comparison at every pooled point.
double brute_ks(std::vector<double> a, std::vector<double> b) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  double d = 0.0;
  for (double x : pts) {
    const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [x](double y) { return y <= x; })) / a.size();
    const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [x](double y) { return y <= x; })) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

std::vector<double> three_regimes(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  for (double m : {0.0, 3.0, 0.0})
    for (double x : testutil::normals(1000, m, 1, rng)) out.push_back(x);
  return out;
}

}  // namespace

TEST_CASE("ks_distance examples") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6}, c{1, 3}, d{2, 4};
  CHECK(ks_distance(a, a) == 0.0);
  CHECK(ks_distance(a, b) == 1.0);
  CHECK(ks_distance(c, d) == 0.5);
  CHECK_THROWS_AS(ks_distance(std::vector<double>{}, a), InputError);
}

TEST_CASE("ks_distance is symmetric, bounded and invariant under monotone maps") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(1, 60);
  for (int t = 0; t < 200; ++t) {
    auto a = testutil::normals(len(rng), 0, 1, rng);
    auto b = testutil::normals(len(rng), 0.3, 1.5, rng);
    for (auto& x : a) x = std::round(x * 4) / 4;  // ties
    const double d = ks_distance(a, b);
    CHECK(d == ks_distance(b, a));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == Approx(brute_ks(a, b)).margin(1e-15));
    std::vector<double> ea(a.size()), eb(b.size());
    std::transform(a.begin(), a.end(), ea.begin(), [](double x) { return std::exp(x); });
    std::transform(b.begin(), b.end(), eb.begin(), [](double x) { return std::exp(x); });
    CHECK(ks_distance(ea, eb) == Approx(d).margin(1e-15));
  }
}

TEST_CASE("weighted_statistic examples") {
  CHECK(weighted_statistic(std::vector<double>{1, 3, 2, 4}, 2) == Approx(0.5).margin(1e-15));
  std::vector<double> s{100};
  for (int i = 0; i < 99; ++i) s.push_back(i);
  CHECK(weighted_statistic(s, 1) == Approx(1.0 / std::sqrt(1.0 + 1.0 / 99.0)).margin(1e-15));
  CHECK(weighted_statistic(s, 1) == Approx(0.994987).margin(1e-6));
  CHECK(weighted_statistic(std::vector<double>{1, 2, 3, 1, 2, 3}, 3) == 0.0);
  CHECK_THROWS_AS(weighted_statistic(s, 0), InputError);
  CHECK_THROWS_AS(weighted_statistic(s, s.size()), InputError);
}

TEST_CASE("incremental scan equals the brute-force statistic at every cut") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(2, 200);
  std::uniform_int_distribution<int> ml(1, 20);
  for (int t = 0; t < 300; ++t) {
    auto w = testutil::normals(len(rng), 0, 1, rng);
    if (t % 2) for (auto& x : w) x = std::round(x * 2);  // heavy ties
    const std::size_t min_len = static_cast<std::size_t>(ml(rng));
    const auto prof = cut_profile(w, min_len);
    if (w.size() < 2 * min_len) {
      CHECK(prof.empty());
      continue;
    }
    REQUIRE(prof.size() == w.size() - 2 * min_len + 1);
    for (std::size_t k = 0; k < prof.size(); ++k) {
      const std::size_t cut = min_len + k;
      const std::vector<double> a(w.begin(), w.begin() + cut), b(w.begin() + cut, w.end());
      const double oracle = brute_ks(a, b) / std::sqrt(1.0 / a.size() + 1.0 / b.size());
      CHECK(prof[k] == Approx(oracle).margin(1e-12));
    }
  }
}

TEST_CASE("d_crit examples") {
  CHECK(d_crit(1000, 0.95) == Approx(1.9099).margin(1e-4));
  CHECK(d_crit(100, 0.90) == Approx(1.6512).margin(1e-4));
  for (double p : {0.90, 0.95, 0.99}) CHECK(d_crit(10000, p) > d_crit(1000, p));
  const double direct = 1.72 * std::pow(std::log(1e4) - 1.86, 0.13);
  CHECK(d_crit(10000, 0.99) == Approx(direct).margin(1e-12));
  CHECK(std::isinf(d_crit(6, 0.95)));
  CHECK_THROWS_AS(d_crit(100, 0.93), InputError);
  CHECK_THROWS_AS(d_crit(2, 0.95), InputError);
}

TEST_CASE("find_best_cut edge cases") {
  std::vector<double> flat(100, 1.0);
  auto c = find_best_cut(flat, 30);
  REQUIRE(c);
  CHECK(c->index == 30);
  CHECK(c->statistic == 0.0);
  CHECK_FALSE(find_best_cut(std::vector<double>(59, 0.0), 30));
  CHECK(find_best_cut(std::vector<double>(60, 0.0), 30));
}

TEST_CASE("mean shift of 5 SD is located within 20 samples") {
  int hits = 0;
  for (int seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    auto a = testutil::normals(500, 0, 1, rng);
    for (double x : testutil::normals(500, 5, 1, rng)) a.push_back(x);
    const auto c = find_best_cut(a, 30);
    REQUIRE(c);
    if (c->index >= 480 && c->index <= 520) ++hits;
    if (seed < 10) {
      // Brute-force argmax as oracle.
      std::size_t arg = 0;
      double best = -1.0;
      for (std::size_t i = 30; i + 30 <= a.size(); ++i) {
        const double d = weighted_statistic(a, i);
        if (d > best + 1e-12) {
          best = d;
          arg = i;
        }
      }
      CHECK(c->index == arg);
      CHECK(c->statistic == Approx(best).margin(1e-12));
    }
  }
  CHECK(hits >= 190);
}

TEST_CASE("i.i.d. Gaussian noise is rarely cut") {
  int clean = 0;
  const int trials = 60;
  for (int seed = 0; seed < trials; ++seed) {
    std::mt19937_64 rng(seed);
    const auto x = testutil::normals(10000, 0, 1, rng);
    if (segment(x).cuts.empty()) ++clean;
  }
  CHECK(clean >= 0.9 * trials);
}

TEST_CASE("three-regime series: both cuts near the truth") {
  int ok = 0;
  const int trials = 30;
  for (int seed = 0; seed < trials; ++seed) {
    const auto s = segment(three_regimes(seed));
    bool near1 = false, near2 = false;
    for (auto c : s.cuts) {
      near1 = near1 || std::abs(static_cast<long>(c) - 1000) <= 25;
      near2 = near2 || std::abs(static_cast<long>(c) - 2000) <= 25;
    }
    if (s.cuts.size() == 2 && near1 && near2) ++ok;
  }
  CHECK(ok >= 0.9 * trials);
}

TEST_CASE("segmentation tiles the series and respects the minimum length") {
  SynthSpec spec;
  spec.seed = 4;
  spec.length = 20000;
  const auto gen = generate_volume(spec);
  const auto v = gen.volume.values();
  const auto s = segment(v);
  REQUIRE(s.segments.size() == s.cuts.size() + 1);
  std::size_t pos = 0;
  for (const auto& seg : s.segments) {
    CHECK(seg.start == pos);
    CHECK(seg.length() >= 30);
    pos = seg.end;
    double m = 0.0;
    for (std::size_t i = seg.start; i < seg.end; ++i) m += v[i];
    CHECK(seg.mean == Approx(m / seg.length()).epsilon(1e-12));
  }
  CHECK(pos == v.size());
  CHECK(std::is_sorted(s.cuts.begin(), s.cuts.end()));

  const auto again = segment(v);
  CHECK(again.cuts == s.cuts);
  KssConfig par;
  par.parallel = true;
  CHECK(segment(v, par).cuts == s.cuts);
}

TEST_CASE("lengths above the minimum are insensitive to dropping the bound") {
  SynthSpec spec;
  spec.seed = 21;
  const auto gen = generate_volume(spec);
  const auto v = gen.volume.values();
  KssConfig loose;
  loose.min_segment_length = 2;
  std::vector<double> a, b;
  for (double l : segment(v).lengths()) a.push_back(l);
  for (double l : segment(v, loose).lengths())
    if (l >= 30) b.push_back(l);
  REQUIRE(a.size() >= 50);
  REQUIRE(b.size() >= 50);
  const double n = a.size(), m = b.size();
  const double stat = ks_distance(a, b) * std::sqrt(n * m / (n + m));
  CHECK(kolmogorov_survival(stat) > 0.01);
}

TEST_CASE("segment validates its configuration") {
  std::vector<double> x(100, 0.0);
  KssConfig bad;
  bad.significance = 0.8;
  CHECK_THROWS_AS(segment(x, bad), InputError);
  KssConfig small;
  small.min_segment_length = 1;
  CHECK_THROWS_AS(segment(x, small), InputError);
  CHECK_THROWS_AS(segment(std::vector<double>(59, 0.0)), InputError);
  KssConfig shallow;
  shallow.max_recursion_depth = 1;
  CHECK_THROWS_AS(segment(three_regimes(1), shallow), InputError);
}
