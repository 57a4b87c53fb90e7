#pragma once

// Plain-text output: CSV tables with shortest round-trip number formatting
// (so repeated runs are byte-identical), the ingestion CSV format, and JSON
// views of the model types.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "superstat/core.hpp"
#include "superstat/distributions.hpp"
#include "superstat/impact.hpp"
#include "superstat/mixture.hpp"
#include "superstat/segmentation.hpp"
#include "superstat/synth.hpp"
#include "superstat/timeseries.hpp"

namespace superstat {

using Json = nlohmann::ordered_json;

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// "YYYY-MM-DDTHH:MM" for minutes since the epoch.
inline std::string format_timestamp(std::int64_t minutes) {
  using namespace std::chrono;
  std::int64_t day = minutes / kMinutesPerDay;
  std::int64_t mod = minutes % kMinutesPerDay;
  if (mod < 0) {
    mod += kMinutesPerDay;
    --day;
  }
  const year_month_day ymd{sys_days{days{day}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(mod / 60),
                static_cast<int>(mod % 60));
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<std::string_view> header) : path_(path), out_(path) {
    if (!out_) throw InputError("cannot open output file: " + path);
    bool first = true;
    for (auto h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }

  template <class... T>
  void row(const T&... cells) {
    bool first = true;
    ((put(cells, first)), ...);
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw InputError("failed writing " + path_);
  }

 private:
  template <class T>
  void put(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) out_ << format_number(static_cast<double>(v));
    else if constexpr (std::is_integral_v<T>) out_ << v;
    else out_ << std::string_view(v);
  }

  std::string path_;
  std::ofstream out_;
};

/// Writes the ingestion format read by read_market_csv.
inline void write_market_csv(std::ostream& out, std::span<const std::int64_t> ts, std::span<const double> price,
                             std::span<const double> volume) {
  if (ts.size() != price.size() || ts.size() != volume.size())
    throw InputError("write_market_csv: columns differ in length");
  out << "timestamp,price,volume\n";
  for (std::size_t i = 0; i < ts.size(); ++i)
    out << format_timestamp(ts[i]) << ',' << format_number(price[i]) << ',' << format_number(volume[i]) << '\n';
}

// ---------------------------------------------------------------- JSON views

inline Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json to_json(const FitResult& f) {
  return Json{{"family", family_name(f.family)},
              {"p1", f.params.p1},
              {"p2", f.params.p2},
              {"log_likelihood", finite_or_null(f.log_likelihood)},
              {"n", f.n},
              {"gof", finite_or_null(f.gof)},
              {"ks_pass", f.ks_pass}};
}

inline Json to_json(const LengthLaw& l) {
  return Json{{"lambda", l.lambda},           {"lambda_se", l.lambda_se}, {"min_length", l.min_length},
              {"tail_break", l.tail_break},   {"tail_fraction", l.tail_fraction}, {"n", l.n},
              {"n_fit", l.n_fit},             {"truncated", l.truncated}, {"warnings", l.warnings}};
}

inline Json to_json(const MuOmegaRelation& r) {
  Json j{{"mode", r.mode == RelationMode::Single ? "single" : "dual"},
         {"alpha_single", r.alpha_single},
         {"beta_single", r.beta_single},
         {"sigma_single", r.sigma_single},
         {"sse_single", r.sse_single},
         {"n", r.n}};
  j["dual"] = Json{{"alpha_lo", r.alpha_lo},   {"beta_lo", r.beta_lo},   {"sigma_lo", r.sigma_lo},
                   {"alpha_hi", r.alpha_hi},   {"beta_hi", r.beta_hi},   {"sigma_hi", r.sigma_hi},
                   {"crossover_ln_omega", finite_or_null(r.crossover)},
                   {"mu_at_crossover", finite_or_null(r.mu_at_crossover)},
                   {"sse_dual", r.sse_dual},   {"n_lo", r.n_lo},         {"n_hi", r.n_hi}};
  return j;
}

inline Json to_json(const ThetaPrior& p) {
  Json cand = Json::array();
  for (const auto& c : p.candidates) cand.push_back(to_json(c));
  return Json{{"family", family_name(p.family)}, {"p1", p.params.p1}, {"p2", p.params.p2}, {"candidates", cand}};
}

inline Json to_json(const MixtureModel& m) {
  Json segs = Json::array();
  for (const auto& s : m.segments) segs.push_back(Json{{"length", s.length}, {"p1", s.params.p1}, {"p2", s.params.p2}});
  return Json{{"local_family", family_name(m.local_family)},
              {"length_law", to_json(m.length_law)},
              {"theta_prior", to_json(m.theta_prior)},
              {"relation", to_json(m.relation)},
              {"segments", segs}};
}

inline Json to_json(const SignCurve& c) {
  return Json{{"G", c.G}, {"varpi", c.varpi}, {"beta", c.beta}, {"sse", c.sse}, {"iterations", c.iterations},
              {"converged", c.converged}};
}

inline Json to_json(const SignProbModel& m) { return Json{{"plus", to_json(m.plus)}, {"minus", to_json(m.minus)}}; }

inline Json to_json(const ImpactFit& f) {
  return Json{{"form", impact_form_name(f.form)}, {"sign", sign_name(f.sign)}, {"a", f.a},
              {"b", f.b},                         {"a_se", f.a_se},           {"b_se", f.b_se},
              {"chi2_dof", f.chi2_dof},           {"points", f.points}};
}

inline Json to_json(const ImpactReport& r) {
  Json fits = Json::array();
  for (const auto& f : r.fits) fits.push_back(to_json(f));
  return Json{{"sign", sign_name(r.sign)},   {"best", impact_form_name(r.best)}, {"sigma_eta", r.sigma_eta},
              {"observations", r.observations}, {"raw_a", r.raw_a},           {"raw_b", r.raw_b},
              {"fits", fits}};
}

inline Json to_json(const ParameterHomogeneity& h) {
  return Json{{"name", h.name},           {"n", h.n},
              {"slope", h.slope},         {"slope_se", h.slope_se},
              {"intercept", h.intercept}, {"loess_slope", h.loess_slope},
              {"edf_distance", h.edf_distance}, {"ks_critical", h.ks_critical}};
}

inline Json to_json(const SynthSpec& s) {
  Json j{{"seed", s.seed},
         {"length", s.length},
         {"lambda", s.lambda},
         {"min_length", s.min_length},
         {"theta_family", family_name(s.theta_family)},
         {"theta_params", {s.theta_params.p1, s.theta_params.p2}},
         {"fixed_theta", s.fixed_theta ? Json(*s.fixed_theta) : Json(nullptr)},
         {"relation", s.relation == RelationMode::Single ? "single" : "dual"},
         {"alpha", s.alpha},
         {"beta", s.beta},
         {"sigma_eta", s.sigma_eta},
         {"alpha_hi", s.alpha_hi},
         {"beta_hi", s.beta_hi},
         {"sigma_eta_hi", s.sigma_eta_hi},
         {"normalize", s.normalize},
         {"return_lambda", s.return_lambda},
         {"volatility", {{"shape", s.volatility.shape}, {"scale", s.volatility.scale}}},
         {"fixed_sigma2", s.fixed_sigma2 ? Json(*s.fixed_sigma2) : Json(nullptr)},
         {"g_plus", {s.g_plus.G, s.g_plus.varpi, s.g_plus.beta}},
         {"g_minus", {s.g_minus.G, s.g_minus.varpi, s.g_minus.beta}},
         {"impact", {{"a", s.impact_a}, {"b", s.impact_b}, {"sigma", s.impact_sigma}}},
         {"start_price", s.start_price},
         {"session", {s.calendar.session_open, s.calendar.session_close}},
         {"start_day", s.start_day},
         {"u_shape", s.u_shape},
         {"u_shape_amplitude", s.u_shape_amplitude}};
  return j;
}

inline Json to_json(const SynthTruth& t) {
  Json segs = Json::array();
  for (const auto& s : t.segments)
    segs.push_back(Json{{"start", s.start}, {"length", s.length}, {"phi", s.phi}, {"theta", s.theta},
                        {"eta", s.eta}, {"sigma2", s.sigma2}});
  return Json{{"mean_volume", t.mean_volume},
              {"cuts", t.cuts},
              {"start_band_probability", t.start_band_probability},
              {"segments", segs}};
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw InputError("failed writing " + path);
}

}  // namespace superstat
