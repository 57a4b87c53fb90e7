#pragma once

// Batch pipeline behind the command-line tool: ingest one or more market CSV
// files, run the requested stages and write plot-ready CSV/JSON artifacts
// plus a manifest of SHA-256 hashes.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "superstat/core.hpp"
#include "superstat/distributions.hpp"
#include "superstat/dynamics.hpp"
#include "superstat/impact.hpp"
#include "superstat/io.hpp"
#include "superstat/loess.hpp"
#include "superstat/mixture.hpp"
#include "superstat/segmentation.hpp"
#include "superstat/stats.hpp"
#include "superstat/timeseries.hpp"

namespace superstat {

enum class Stage { Segment, Fit, Mixture, Dynamics, Impact, Returns, Report };

inline constexpr std::array<Stage, 7> kAllStages = {Stage::Segment, Stage::Fit,     Stage::Mixture, Stage::Dynamics,
                                                    Stage::Impact,  Stage::Returns, Stage::Report};

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Segment: return "segment";
    case Stage::Fit: return "fit";
    case Stage::Mixture: return "mixture";
    case Stage::Dynamics: return "dynamics";
    case Stage::Impact: return "impact";
    case Stage::Returns: return "returns";
    case Stage::Report: return "report";
  }
  return "?";
}

inline Stage stage_from_name(std::string_view s) {
  for (Stage st : kAllStages)
    if (stage_name(st) == s) return st;
  throw InputError("unknown stage '" + std::string(s) + "'");
}

inline constexpr int kExitOk = 0;
inline constexpr int kExitStageFailure = 1;
inline constexpr int kExitConfigError = 2;

struct RunConfig {
  std::vector<std::string> inputs;
  Calendar calendar{};
  bool drop_zero_volume = false;
  KssConfig kss{};
  LoessConfig loess{};
  std::vector<Family> families{kPositiveFamilies.begin(), kPositiveFamilies.end()};
  std::string out_dir = "out";
  std::uint64_t seed = 20240531;
  std::vector<Stage> stages;
  std::size_t max_lag = 20;
  std::size_t shuffles = 100;
  std::size_t sign_bins = 50;
  std::size_t grid_points = 200;
  std::vector<double> loess_sensitivity{0.2, 0.5};

  /// Throws InputError naming the offending setting or path.
  void validate() const {
    if (inputs.empty()) throw InputError("no input file given");
    for (const auto& p : inputs)
      if (!std::filesystem::is_regular_file(p)) throw InputError("input file not found: " + p);
    if (inputs.size() > 1) {
      std::set<std::string> stems;
      for (const auto& p : inputs)
        if (!stems.insert(std::filesystem::path(p).stem().string()).second)
          throw InputError("input files share the name '" + std::filesystem::path(p).stem().string() + "'");
    }
    if (stages.empty()) throw InputError("no stage requested");
    for (std::size_t k = 1; k < stages.size(); ++k)
      if (static_cast<int>(stages[k]) <= static_cast<int>(stages[k - 1]))
        throw InputError("stages out of dependency order: '" + std::string(stage_name(stages[k])) + "' after '" +
                         std::string(stage_name(stages[k - 1])) + "'");
    if (out_dir.empty()) throw InputError("output directory must not be empty");
    calendar.validate();
    kss.validate();
    loess.validate();
    if (families.empty()) throw InputError("family set must not be empty");
    if (max_lag < 1) throw InputError("max lag must be >= 1");
    if (shuffles < 2) throw InputError("shuffle count must be >= 2");
    if (sign_bins < 20) throw InputError("sign-probability bins must be >= 20");
    if (grid_points < 10) throw InputError("grid must have at least 10 points");
    for (double f : loess_sensitivity)
      if (!(f > 0.0 && f <= 1.0)) throw InputError("loess sensitivity fractions must lie in (0, 1]");
  }
};

struct RunResult {
  int status = kExitOk;
  std::string message;
  std::vector<std::string> files;  // relative to out_dir
};

inline std::string sha256_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

namespace detail {

struct StageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Complementary EDF P(L >= l) at each distinct length.
inline std::vector<std::pair<double, double>> survival_points(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    if (i == 0 || x[i] != x[i - 1]) out.emplace_back(x[i], static_cast<double>(x.size() - i) / n);
  return out;
}

class Analysis {
 public:
  Analysis(const RunConfig& cfg, std::string input, std::filesystem::path dir, std::filesystem::path root,
           std::ostream& log)
      : cfg_(cfg), input_(std::move(input)), dir_(std::move(dir)), root_(std::move(root)), log_(log) {}

  void load() {
    data_ = read_market_csv(input_, cfg_.calendar, {cfg_.drop_zero_volume});
    volume_ = normalize_volume(data_->volume);
    returns_ = price_to_returns(data_->price);
    // Volume at each return minute.
    const auto vt = data_->volume.timestamps();
    const auto rt = returns_->timestamps();
    const auto vv = volume_->values();
    std::size_t j = 0;
    paired_volume_.reserve(rt.size());
    for (std::int64_t t : rt) {
      while (j < vt.size() && vt[j] < t) ++j;
      paired_volume_.push_back(vv[j]);
    }
    summary_["input"] = std::filesystem::path(input_).filename().string();
    summary_["observations"] = volume_->values().size();
    summary_["returns"] = returns_->size();
    summary_["mean_volume"] = volume_->mean_volume();
  }

  void run(Stage s) {
    switch (s) {
      case Stage::Segment: ensure_segment(); break;
      case Stage::Fit: fit(); break;
      case Stage::Mixture: ensure_mixture(); break;
      case Stage::Dynamics: dynamics(); break;
      case Stage::Impact: impact(); break;
      case Stage::Returns: returns(); break;
      case Stage::Report: report(); break;
    }
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string path(const std::string& name) {
    const auto p = dir_ / name;
    files_.push_back(std::filesystem::relative(p, root_).generic_string());
    return p.string();
  }

  void note(std::string_view what) { log_ << "[" << std::filesystem::path(input_).stem().string() << "] " << what << '\n'; }

  void write_length_edf(const std::string& name, const Segmentation& seg, Json& js) {
    const auto lengths = seg.lengths();
    std::optional<LengthLaw> law;
    if (lengths.size() >= 2) {
      double lmin = static_cast<double>(cfg_.kss.min_segment_length);
      for (double l : lengths) lmin = std::min(lmin, l);
      law = fit_length_law(lengths, lmin);
      js["length_law"] = to_json(*law);
    }
    CsvWriter csv(path(name), {"length", "survival", "fitted_survival"});
    for (const auto& [l, s] : survival_points(lengths))
      csv.row(l, s, law && law->lambda > 0.0 ? 1.0 - law->cdf(l) : std::numeric_limits<double>::quiet_NaN());
    csv.close();
  }

  void write_segmentation(const std::string& name, const Segmentation& seg, const Series& series) {
    CsvWriter csv(path(name), {"segment", "start", "end", "length", "mean", "variance", "start_time"});
    for (std::size_t k = 0; k < seg.segments.size(); ++k) {
      const auto& s = seg.segments[k];
      csv.row(k, s.start, s.end, s.length(), s.mean, s.variance, format_timestamp(series.timestamps()[s.start]));
    }
    csv.close();
  }

  // ------------------------------------------------------------ segment
  void ensure_segment() {
    if (seg_) return;
    note("segmenting volume");
    seg_ = segment(volume_->values(), cfg_.kss);
    write_segmentation("segmentation.csv", *seg_, volume_->series());
    Json js{{"significance", cfg_.kss.significance},
            {"min_segment_length", cfg_.kss.min_segment_length},
            {"segments", seg_->segments.size()},
            {"mean_length", stats::mean(seg_->lengths())}};
    write_length_edf("length_edf.csv", *seg_, js);
    summary_["segment"] = js;
  }

  // ------------------------------------------------------------ fit
  void fit() {
    ensure_segment();
    note("fitting local families");
    const auto values = volume_->values();
    struct Acc {
      std::vector<double> gof;
      std::size_t pass = 0, failed = 0;
    };
    std::map<std::string, Acc> acc;
    CsvWriter csv(path("local_fits.csv"),
                  {"segment", "start", "length", "family", "p1", "p2", "log_likelihood", "gof", "ks_pass"});
    for (std::size_t k = 0; k < seg_->segments.size(); ++k) {
      const auto& s = seg_->segments[k];
      const auto window = values.subspan(s.start, s.length());
      for (Family f : cfg_.families) {
        auto& a = acc[std::string(family_name(f))];
        try {
          const auto r = fit_mle(f, window);
          csv.row(k, s.start, s.length(), family_name(f), r.params.p1, r.params.p2, r.log_likelihood, r.gof,
                  r.ks_pass ? 1 : 0);
          a.gof.push_back(r.gof);
          a.pass += r.ks_pass ? 1 : 0;
        } catch (const std::exception&) {
          ++a.failed;
        }
      }
    }
    csv.close();
    Json fams = Json::array();
    std::string best;
    double best_gof = std::numeric_limits<double>::infinity();
    CsvWriter tab(path("fit_summary.csv"), {"family", "fitted", "failed", "mean_gof", "sd_gof", "pass_ratio"});
    for (Family f : cfg_.families) {
      const auto& a = acc[std::string(family_name(f))];
      const double m = a.gof.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::mean(a.gof);
      const double sd = a.gof.size() > 1 ? std::sqrt(stats::variance(a.gof, 1)) : 0.0;
      const double ratio = a.gof.empty() ? 0.0 : static_cast<double>(a.pass) / static_cast<double>(a.gof.size());
      tab.row(family_name(f), a.gof.size(), a.failed, m, sd, ratio);
      fams.push_back(Json{{"family", family_name(f)},
                          {"fitted", a.gof.size()},
                          {"failed", a.failed},
                          {"mean_gof", finite_or_null(m)},
                          {"sd_gof", sd},
                          {"pass_ratio", ratio}});
      if (std::isfinite(m) && m < best_gof) {
        best_gof = m;
        best = family_name(f);
      }
    }
    tab.close();
    summary_["fit"] = Json{{"best_family", best}, {"families", fams}};
  }

  // ------------------------------------------------------------ mixture
  void ensure_mixture() {
    if (mix_) return;
    ensure_segment();
    note("building mixture");
    MixtureBuildOptions opt;
    opt.min_length = static_cast<double>(cfg_.kss.min_segment_length);
    opt.loess = cfg_.loess;
    mix_ = build_mixture(volume_->values(), *seg_, opt);
    const auto& model = mix_->model;
    Json js = to_json(model);

    {
      CsvWriter csv(path("mu_omega.csv"), {"segment", "ln_omega", "ln_mu", "single_fit", "relation_fit"});
      for (std::size_t k = 0; k < mix_->mu.size(); ++k) {
        const double x = std::log(mix_->omega[k]);
        csv.row(k, x, std::log(mix_->mu[k]), model.relation.alpha_single * x + model.relation.beta_single,
                model.relation.n ? model.relation.ln_mu(x) : std::numeric_limits<double>::quiet_NaN());
      }
      csv.close();
    }
    {
      std::vector<double> th;
      for (const auto& s : model.segments) th.push_back(s.params.p2);
      std::sort(th.begin(), th.end());
      CsvWriter csv(path("theta_prior.csv"), {"family", "theta", "edf", "cdf"});
      for (const auto& c : model.theta_prior.candidates)
        for (std::size_t i = 0; i < th.size(); ++i)
          csv.row(family_name(c.family), th[i], static_cast<double>(i + 1) / static_cast<double>(th.size()),
                  cdf(c.family, c.params, th[i]));
      csv.close();
    }

    // Volume density curves on a log grid spanning the bulk of the data.
    std::vector<double> pos;
    for (double v : volume_->values())
      if (v > 0.0) pos.push_back(v);
    std::sort(pos.begin(), pos.end());
    const double lo = stats::quantile(pos, 0.001), hi = stats::quantile(pos, 0.999);
    const std::size_t G = cfg_.grid_points;
    const auto edges = log_grid(lo, hi, G + 1);
    const bool integral_ok = model.local_family == Family::LogNormal && model.segments.size() >= 20 &&
                             model.relation.n > 0;
    MixtureModel single = model;
    single.relation = model.relation.as_single();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double n_all = static_cast<double>(volume_->values().size());
    std::vector<double> grid;
    CsvWriter csv(path("volume_pdf.csv"),
                  {"v", "empirical_density", "weighted_pdf", "integral_pdf", "edf", "weighted_cdf", "integral_cdf"});
    for (std::size_t b = 0; b < G; ++b) {
      const double v = std::sqrt(edges[b] * edges[b + 1]);
      grid.push_back(v);
      const auto c0 = std::lower_bound(pos.begin(), pos.end(), edges[b]);
      const auto c1 = b + 1 == G ? std::upper_bound(pos.begin(), pos.end(), edges[b + 1])
                                 : std::lower_bound(pos.begin(), pos.end(), edges[b + 1]);
      const double dens = static_cast<double>(c1 - c0) / (n_all * (edges[b + 1] - edges[b]));
      const auto below = std::upper_bound(pos.begin(), pos.end(), v) - pos.begin();
      const double edf = (static_cast<double>(below) + n_all - static_cast<double>(pos.size())) / n_all;
      csv.row(v, dens, long_term_pdf_weighted(model, v), integral_ok ? long_term_pdf_integral(single, v) : nan, edf,
              long_term_cdf_weighted(model, v), integral_ok ? long_term_cdf_integral(single, v) : nan);
    }
    csv.close();

    const double ks_w = ks_distance_to_edf(volume_->values(), [&](double v) { return long_term_cdf_weighted(model, v); });
    js["ks_weighted_vs_edf"] = ks_w;
    if (integral_ok) {
      js["ks_integral_vs_weighted"] = ks_distance_on_grid([&](double v) { return long_term_cdf_integral(single, v); },
                                                          [&](double v) { return long_term_cdf_weighted(model, v); },
                                                          grid);
      js["integral_relation"] = model.relation.mode == RelationMode::Single ? "single" : "single_line_of_dual_fit";
    }
    if (model.mu_length) {
      const auto& c = *model.mu_length;
      CsvWriter ml(path("mixture_length_vs_mean.csv"), {"mean", "length", "fitted"});
      for (std::size_t k = 0; k < c.size(); ++k) ml.row(c.x[k], c.y[k], c.fitted[k]);
      ml.close();
    }
    js["warnings"] = mix_->warnings;
    write_json(path("mixture.json"), js);
    js.erase("segments");
    summary_["mixture"] = js;
  }

  // ------------------------------------------------------------ dynamics
  void write_correlation(CsvWriter& csv, const std::string& name, std::span<const double> x, Json& js) {
    if (x.size() < 3) return;
    const std::size_t L = std::min(cfg_.max_lag, x.size() - 1);
    const auto rep = autocorr(x, L, {cfg_.shuffles, cfg_.seed});
    for (std::size_t l = 0; l < rep.lags.size(); ++l)
      csv.row(name, rep.lags[l], rep.covariance[l], rep.normalized[l], rep.noise_level);
    js[name] = Json{{"noise_level", rep.noise_level},
                    {"first_lag_at_noise", rep.first_lag_at_noise ? Json(*rep.first_lag_at_noise) : Json(nullptr)},
                    {"decay_lag", rep.decay_lag ? Json(*rep.decay_lag) : Json(nullptr)},
                    {"degenerate", rep.degenerate}};
  }

  void dynamics() {
    ensure_segment();
    note("segment dynamics");
    Json js;
    const auto lengths = seg_->lengths();
    const auto means = seg_->means();
    {
      CsvWriter csv(path("correlation.csv"), {"series", "lag", "covariance", "normalized", "noise_level"});
      Json corr;
      write_correlation(csv, "mu", means, corr);
      write_correlation(csv, "length", lengths, corr);
      if (lengths.size() >= 2) {
        const auto d1 = length_fluctuations(lengths, 1);
        std::vector<double> ad1(d1.size());
        std::transform(d1.begin(), d1.end(), ad1.begin(), [](double x) { return std::abs(x); });
        write_correlation(csv, "d1", d1, corr);
        write_correlation(csv, "abs_d1", ad1, corr);
      }
      csv.close();
      js["correlation"] = corr;
    }
    if (seg_->segments.size() >= kBands) {
      const auto prof = intraday_profile(volume_->series(), *seg_);
      CsvWriter bands(path("intraday_bands.csv"), {"band", "lo_minute", "hi_minute", "count", "probability"});
      for (std::size_t b = 0; b < kBands; ++b)
        bands.row(b, prof.band_edges[b], prof.band_edges[b + 1], prof.band_counts[b], prof.band_probability[b]);
      bands.close();
      CsvWriter clock(path("intraday_clock.csv"), {"band", "lo_minute", "hi_minute", "count", "probability"});
      for (std::size_t b = 0; b < kBands; ++b)
        clock.row(b, prof.clock_edges[b], prof.clock_edges[b + 1], prof.clock_counts[b], prof.clock_probability[b]);
      clock.close();
      CsvWriter cls(path("intraday_classes.csv"),
                    {"class_lo", "class_hi", "class_count", "band", "band_given_class", "class_given_band"});
      for (const auto& c : prof.classes)
        for (std::size_t b = 0; b < kBands; ++b)
          cls.row(c.lo, c.hi, c.count, b, c.band_given_class[b], c.class_given_band[b]);
      cls.close();
    } else {
      js["intraday"] = "skipped: fewer than 8 segments";
    }
    if (seg_->segments.size() >= 10) {
      try {
        const auto lm = length_vs_mean(*seg_, cfg_.loess);
        CsvWriter csv(path("length_vs_mean.csv"), {"mean", "length", "fitted"});
        for (std::size_t k = 0; k < lm.curve.size(); ++k) csv.row(lm.curve.x[k], lm.curve.y[k], lm.curve.fitted[k]);
        csv.close();
        js["length_vs_mean"] = Json{{"central_lo", lm.central_lo},     {"central_hi", lm.central_hi},
                                    {"fitted_slope", lm.fitted_slope}, {"raw_slope", lm.raw_slope},
                                    {"raw_slope_se", lm.raw_slope_se}, {"monotonicity", lm.monotonicity}};
      } catch (const InputError& e) {
        js["length_vs_mean"] = std::string("skipped: ") + e.what();
      }
    }
    summary_["dynamics"] = js;
  }

  // ------------------------------------------------------------ |r| segmentation
  void ensure_abs_segmentation() {
    if (abs_seg_) return;
    note("segmenting |r|");
    const auto mag = magnitude(*returns_);
    abs_seg_ = segment(mag.values(), cfg_.kss);
    write_segmentation("abs_return_segmentation.csv", *abs_seg_, mag);
    Json js{{"segments", abs_seg_->segments.size()}, {"mean_length", stats::mean(abs_seg_->lengths())}};
    write_length_edf("abs_return_length_edf.csv", *abs_seg_, js);
    summary_["abs_return_segmentation"] = js;
  }

  // ------------------------------------------------------------ impact
  void impact() {
    ensure_mixture();
    ensure_abs_segmentation();
    note("impact analysis");
    const auto r = returns_->values();
    const std::span<const double> v = paired_volume_;
    Json js;

    const auto signs = fit_sign_prob(v, r, cfg_.sign_bins);
    {
      CsvWriter csv(path("sign_prob.csv"), {"bin", "volume", "count", "freq_plus", "freq_minus", "freq_zero",
                                            "fit_plus", "fit_minus", "fit_zero"});
      for (std::size_t b = 0; b < signs.bin_volume.size(); ++b) {
        const double x = signs.bin_volume[b];
        csv.row(b, x, signs.bin_count[b], signs.freq_plus[b], signs.freq_minus[b], signs.freq_zero[b],
                signs.g_plus(x), signs.g_minus(x), signs.g_zero(x));
      }
      csv.close();
    }
    js["sign_prob"] = to_json(signs);
    const auto cross = sign_crossing(signs);
    js["sign_prob"]["crossing"] = cross ? Json(*cross) : Json(nullptr);

    ImpactOptions iopt;
    iopt.loess = cfg_.loess;
    std::optional<ImpactReport> both;
    Json fits = Json::array();
    CsvWriter tab(path("impact_fits.csv"),
                  {"loess_fraction", "sign", "form", "a", "b", "a_se", "b_se", "chi2_dof", "points", "best"});
    auto record = [&](const ImpactReport& rep, double frac) {
      for (const auto& f : rep.fits)
        tab.row(frac, sign_name(f.sign), impact_form_name(f.form), f.a, f.b, f.a_se, f.b_se, f.chi2_dof, f.points,
                f.form == rep.best ? 1 : 0);
      Json j = to_json(rep);
      j["loess_fraction"] = frac;
      fits.push_back(j);
    };
    for (SignSelect s : {SignSelect::Positive, SignSelect::Negative, SignSelect::Both}) {
      auto rep = fit_impact(v, r, s, iopt);
      record(rep, cfg_.loess.fraction);
      if (s == SignSelect::Both) both = std::move(rep);
    }
    for (double frac : cfg_.loess_sensitivity) {
      if (frac == cfg_.loess.fraction) continue;
      ImpactOptions o = iopt;
      o.loess.fraction = frac;
      record(fit_impact(v, r, SignSelect::Both, o), frac);
    }
    tab.close();
    js["impact"] = fits;

    {
      const auto& c = both->smooth;
      CsvWriter csv(path("impact_curve.csv"), {"v", "abs_r_smoothed", "log_form", "power_form", "exp_form"});
      for (std::size_t k : c.anchors) {
        const double x = std::exp(c.x[k]);
        csv.row(x, c.fitted[k], both->fit(ImpactForm::Log).predict(x), both->fit(ImpactForm::Power).predict(x),
                both->fit(ImpactForm::Exp).predict(x));
      }
      csv.close();
    }

    const auto seg_fits = fit_impact_segments(v, r, *abs_seg_);
    {
      CsvWriter csv(path("impact_params_vs_length.csv"), {"segment", "length", "a", "b", "moves"});
      for (const auto& s : seg_fits) csv.row(s.segment, s.length, s.a, s.b, s.moves);
      csv.close();
    }
    if (seg_fits.size() >= 20) {
      const auto h = homogeneity(seg_fits, cfg_.loess);
      CsvWriter csv(path("impact_param_edf.csv"), {"parameter", "z", "survival", "normal_survival"});
      for (const auto* p : {&h.a, &h.b}) {
        const double n = static_cast<double>(p->z.size());
        for (std::size_t i = 0; i < p->z.size(); ++i)
          csv.row(p->name, p->z[i], static_cast<double>(p->z.size() - i) / n, 1.0 - normal_cdf(p->z[i]));
      }
      csv.close();
      js["homogeneity"] = Json{{"a", to_json(h.a)}, {"b", to_json(h.b)}};
    } else {
      js["homogeneity"] = "skipped: fewer than 20 segment fits";
    }

    // Pi(|r|) from the volume mixture.
    std::vector<double> ar, nz;
    std::size_t zeros = 0;
    for (double x : r) {
      ar.push_back(std::abs(x));
      if (x == 0.0) ++zeros;
      else nz.push_back(std::abs(x));
    }
    if (nz.size() >= 10) {
      const auto P = volume_density(mix_->model);
      const auto& lf = both->fit(ImpactForm::Log);
      const double r_hi = 1.5 * stats::quantile(nz, 0.999);
      const std::size_t G = cfg_.grid_points;
      const double w = r_hi / static_cast<double>(G);
      std::vector<double> centers;
      for (std::size_t b = 0; b < G; ++b) centers.push_back(w * (static_cast<double>(b) + 0.5));
      const auto pi = return_pdf_from_volume(P, signs, lf, both->sigma_eta, centers);
      std::vector<std::size_t> counts(G, 0);
      for (double x : nz) {
        const auto b = static_cast<std::size_t>(x / w);
        if (b < G) ++counts[b];
      }
      CsvWriter csv(path("return_from_volume.csv"), {"abs_r", "model_density", "empirical_density"});
      const double N = static_cast<double>(r.size());
      for (std::size_t b = 0; b < G; ++b) csv.row(centers[b], pi.density[b], static_cast<double>(counts[b]) / (N * w));
      csv.close();
      js["return_from_volume"] = Json{{"atom", pi.atom},
                                      {"empirical_zero_frequency", static_cast<double>(zeros) / N},
                                      {"continuous_mass", pi.continuous_mass},
                                      {"total_mass", pi.total_mass},
                                      {"sigma_eta", both->sigma_eta},
                                      {"a", lf.a},
                                      {"b", lf.b}};
    }
    summary_["impact"] = js;
  }

  // ------------------------------------------------------------ returns
  void returns() {
    ensure_abs_segmentation();
    note("return mixture");
    const auto r = returns_->values();
    Json js;
    std::vector<double> vars;
    std::size_t laplace_wins = 0, fitted = 0, mean_rejected = 0, tested = 0;
    CsvWriter loc(path("local_return_fits.csv"),
                  {"segment", "length", "variance", "laplace_scale", "laplace_gof", "gaussian_gof", "t_test_p"});
    for (std::size_t k = 0; k < abs_seg_->segments.size(); ++k) {
      const auto& s = abs_seg_->segments[k];
      const auto window = r.subspan(s.start, s.length());
      const double var = stats::variance(window);
      if (!(var > 0.0)) continue;
      vars.push_back(var);
      try {
        const auto lap = fit_mle(Family::Laplace, window);
        const auto gau = fit_mle(Family::Gaussian, window);
        const auto nt = normality_tests(window);
        ++fitted;
        ++tested;
        if (lap.gof < gau.gof) ++laplace_wins;
        if (nt.t_test_p < 0.05) ++mean_rejected;
        loc.row(k, s.length(), var, lap.params.p2, lap.gof, gau.gof, nt.t_test_p);
      } catch (const std::exception&) {
      }
    }
    loc.close();
    js["segments_fitted"] = fitted;
    js["laplace_preferred_ratio"] = fitted ? static_cast<double>(laplace_wins) / static_cast<double>(fitted) : 0.0;
    js["mean_zero_rejected_ratio"] = tested ? static_cast<double>(mean_rejected) / static_cast<double>(tested) : 0.0;
    const auto pooled = normality_tests(r);
    js["pooled"] = Json{{"n", pooled.n},
                        {"t_statistic", pooled.t_statistic},
                        {"t_test_p", pooled.t_test_p},
                        {"skewness", pooled.skewness},
                        {"kurtosis", pooled.kurtosis},
                        {"jarque_bera", pooled.jarque_bera},
                        {"jarque_bera_p", pooled.jarque_bera_p}};
    if (vars.size() < 2) throw StageError("returns: fewer than 2 segments with positive variance");
    const auto prior = fit_volatility_prior(vars);
    js["volatility_prior"] = Json{{"shape", prior.shape}, {"scale", prior.scale}};
    js["tail_exponent"] = -1.0 - 2.0 * prior.shape;

    std::vector<double> ar;
    for (double x : r) ar.push_back(std::abs(x));
    const double r_hi = stats::quantile(ar, 0.999);
    if (!(r_hi > 0.0)) throw StageError("returns: all price changes are zero");
    const std::size_t G = cfg_.grid_points;
    const double w = 2.0 * r_hi / static_cast<double>(G);
    std::vector<std::size_t> counts(G, 0);
    for (double x : r) {
      const double pos = (x + r_hi) / w;
      if (pos >= 0.0 && pos < static_cast<double>(G)) ++counts[static_cast<std::size_t>(pos)];
    }
    CsvWriter csv(path("return_pdf.csv"), {"r", "empirical_density", "laplace_mixture", "gaussian_mixture"});
    const double N = static_cast<double>(r.size());
    for (std::size_t b = 0; b < G; ++b) {
      const double x = -r_hi + w * (static_cast<double>(b) + 0.5);
      csv.row(x, static_cast<double>(counts[b]) / (N * w), return_mixture_pdf(prior, x, ReturnKernel::Laplace),
              return_mixture_pdf(prior, x, ReturnKernel::Gaussian));
    }
    csv.close();
    summary_["returns"] = js;
  }

  // ------------------------------------------------------------ report
  void report() {
    note("report");
    write_json(path("summary.json"), summary_);
  }

  const RunConfig& cfg_;
  std::string input_;
  std::filesystem::path dir_, root_;
  std::ostream& log_;
  std::vector<std::string> files_;
  Json summary_;

  std::optional<MarketData> data_;
  std::optional<NormalizedVolumeSeries> volume_;
  std::optional<ReturnSeries> returns_;
  std::vector<double> paired_volume_;
  std::optional<Segmentation> seg_;
  std::optional<MixtureBuild> mix_;
  std::optional<Segmentation> abs_seg_;
};

}  // namespace detail

/// Runs every requested stage for each input. Prerequisite stages run (and
/// write their artifacts) on demand. Exit status 2 for configuration or input
/// errors, 1 when a stage fails, 0 otherwise; the manifest is written in
/// every case once the output directory exists.
inline RunResult run(const RunConfig& cfg, std::ostream& log) {
  RunResult res;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    res.status = kExitConfigError;
    res.message = e.what();
    return res;
  }
  const std::filesystem::path root(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) {
    res.status = kExitConfigError;
    res.message = "cannot create output directory " + cfg.out_dir + ": " + ec.message();
    return res;
  }
  for (const auto& input : cfg.inputs) {
    const auto dir = cfg.inputs.size() > 1 ? root / std::filesystem::path(input).stem() : root;
    std::filesystem::create_directories(dir, ec);
    detail::Analysis a(cfg, input, dir, root, log);
    try {
      a.load();
    } catch (const std::exception& e) {
      res.status = kExitConfigError;
      res.message = input + ": " + e.what();
      break;
    }
    Stage current = Stage::Segment;
    try {
      for (Stage s : cfg.stages) {
        current = s;
        a.run(s);
      }
    } catch (const std::exception& e) {
      res.status = kExitStageFailure;
      res.message = input + ": stage '" + std::string(stage_name(current)) + "' failed: " + e.what();
    }
    res.files.insert(res.files.end(), a.files().begin(), a.files().end());
    if (res.status != kExitOk) break;
  }

  std::sort(res.files.begin(), res.files.end());
  res.files.erase(std::unique(res.files.begin(), res.files.end()), res.files.end());
  Json files = Json::array();
  for (const auto& f : res.files) {
    const auto p = root / f;
    files.push_back(Json{{"path", f}, {"bytes", std::filesystem::file_size(p)}, {"sha256", sha256_hex(p.string())}});
  }
  Json stages = Json::array();
  for (Stage s : cfg.stages) stages.push_back(stage_name(s));
  Json inputs = Json::array();
  for (const auto& i : cfg.inputs) inputs.push_back(std::filesystem::path(i).filename().string());
  Json manifest{{"inputs", inputs},
                {"stages", stages},
                {"config",
                 {{"p0", cfg.kss.significance},
                  {"min_segment_length", cfg.kss.min_segment_length},
                  {"loess_fraction", cfg.loess.fraction},
                  {"seed", cfg.seed},
                  {"session", {cfg.calendar.session_open, cfg.calendar.session_close}},
                  {"drop_zero_volume", cfg.drop_zero_volume}}},
                {"status", res.status},
                {"files", files}};
  try {
    write_json((root / "manifest.json").string(), manifest);
  } catch (const std::exception& e) {
    if (res.status == kExitOk) {
      res.status = kExitStageFailure;
      res.message = e.what();
    }
  }
  return res;
}

}  // namespace superstat
