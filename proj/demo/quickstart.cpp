// Segment a synthetic volume series, fit the superstatistical mixture and
// compare the long-term distribution with the data.
//
//   ./quickstart [seed]

#include <cstdio>
#include <cstdlib>

#include "superstat/superstat.hpp"

using namespace superstat;

int main(int argc, char** argv) {
  SynthSpec spec;
  spec.seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  spec.length = 50000;
  const auto gen = generate_volume(spec);
  const auto v = gen.volume.values();

  const auto seg = segment(v);
  std::printf("%zu minutes, %zu true patches, %zu segments found\n", v.size(), gen.truth.segments.size(),
              seg.segments.size());

  const auto mix = build_mixture(v, seg);
  const auto& m = mix.model;
  std::printf("length law: lambda = %.1f +/- %.1f (min length %.0f)\n", m.length_law.lambda, m.length_law.lambda_se,
              m.length_law.min_length);
  std::printf("theta prior: %s(%.3g, %.3g)\n", std::string(family_name(m.theta_prior.family)).c_str(),
              m.theta_prior.params.p1, m.theta_prior.params.p2);
  std::printf("ln mu = %.3f ln omega + %.3f (sigma %.3f), mode %s\n", m.relation.alpha_single, m.relation.beta_single,
              m.relation.sigma_single, m.relation.mode == RelationMode::Dual ? "dual" : "single");

  const double edf = ks_distance_to_edf(v, [&](double x) { return long_term_cdf_weighted(m, x); });
  std::printf("KS distance, weighted mixture vs data: %.4f\n", edf);

  std::printf("\n%10s %12s %12s\n", "v", "P_weighted", "P_integral");
  MixtureModel single = m;
  single.relation = m.relation.as_single();
  for (double x : log_grid(0.01, 10.0, 7))
    std::printf("%10.4f %12.5g %12.5g\n", x, long_term_pdf_weighted(m, x), long_term_pdf_integral(single, x));
  for (const auto& w : mix.warnings) std::printf("warning: %s\n", w.c_str());
}
