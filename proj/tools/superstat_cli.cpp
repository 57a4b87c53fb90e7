// superstat_cli: segment, fit and mix minute-level volume/price data.
//
//   superstat_cli segment --input data.csv --out out/
//   superstat_cli all --input a.csv --input b.csv --p0 0.99 --out out/
//   superstat_cli synth --seed 7 --length 50000 --out synthetic/

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "superstat/io.hpp"
#include "superstat/pipeline.hpp"
#include "superstat/synth.hpp"

namespace {

using namespace superstat;

struct Options {
  std::vector<std::string> inputs;
  std::string out = "out";
  double p0 = 0.95;
  std::size_t min_seg = 30;
  double loess_frac = 0.3;
  std::uint64_t seed = 20240531;
  int session_open = 570;
  int session_close = 960;
  bool drop_zero_volume = false;
  bool parallel = false;
  std::size_t max_lag = 20;
  std::size_t shuffles = 100;
  std::size_t sign_bins = 50;
  std::size_t grid = 200;
  std::vector<std::string> families;
};

void add_run_options(CLI::App* sub, Options& o) {
  sub->add_option("-i,--input", o.inputs, "Input CSV (timestamp,price,volume); repeatable")->required();
  sub->add_option("-o,--out", o.out, "Output directory")->capture_default_str();
  sub->add_option("--p0", o.p0, "KSS significance level")->capture_default_str();
  sub->add_option("--min-seg", o.min_seg, "Minimum segment length")->check(CLI::Range(2, 1 << 30))->capture_default_str();
  sub->add_option("--loess-frac", o.loess_frac, "Loess span fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--seed", o.seed, "Seed for shuffle surrogates")->capture_default_str();
  sub->add_option("--session-open", o.session_open, "Session open, minutes after midnight")->capture_default_str();
  sub->add_option("--session-close", o.session_close, "Session close, minutes after midnight")->capture_default_str();
  sub->add_flag("--drop-zero-volume", o.drop_zero_volume, "Skip rows with zero volume");
  sub->add_flag("--parallel", o.parallel, "Segment independent windows concurrently");
  sub->add_option("--max-lag", o.max_lag, "Largest lag of the correlation functions")->capture_default_str();
  sub->add_option("--shuffles", o.shuffles, "Shuffle surrogates for the noise level")->capture_default_str();
  sub->add_option("--sign-bins", o.sign_bins, "Volume bins for sign probabilities")->capture_default_str();
  sub->add_option("--grid", o.grid, "Points on density grids")->capture_default_str();
  sub->add_option("--families", o.families, "Local families for the fit stage (default: all positive)");
}

int run_stages(const Options& o, std::vector<Stage> stages) {
  RunConfig cfg;
  cfg.inputs = o.inputs;
  cfg.out_dir = o.out;
  cfg.calendar = Calendar{o.session_open, o.session_close};
  cfg.drop_zero_volume = o.drop_zero_volume;
  cfg.kss.significance = o.p0;
  cfg.kss.min_segment_length = o.min_seg;
  cfg.kss.parallel = o.parallel;
  cfg.loess.fraction = o.loess_frac;
  cfg.seed = o.seed;
  cfg.max_lag = o.max_lag;
  cfg.shuffles = o.shuffles;
  cfg.sign_bins = o.sign_bins;
  cfg.grid_points = o.grid;
  cfg.stages = std::move(stages);
  if (!o.families.empty()) {
    cfg.families.clear();
    try {
      for (const auto& f : o.families) cfg.families.push_back(family_from_name(f));
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitConfigError;
    }
  }
  const auto res = run(cfg, std::clog);
  if (res.status != kExitOk) std::cerr << "error: " << res.message << '\n';
  else std::clog << res.files.size() << " files written under " << o.out << '\n';
  return res.status;
}

struct SynthOptions {
  std::string out = "synthetic";
  std::uint64_t seed = 1;
  std::size_t length = 50000;
  double lambda = 116.0;
  double min_length = 30.0;
  bool dual = false;
  bool u_shape = false;
  double sigma_eta = 0.28;
};

int run_synth(const SynthOptions& o) {
  SynthSpec spec;
  spec.seed = o.seed;
  spec.length = o.length;
  spec.lambda = o.lambda;
  spec.min_length = o.min_length;
  spec.relation = o.dual ? RelationMode::Dual : RelationMode::Single;
  spec.u_shape = o.u_shape;
  spec.sigma_eta = o.sigma_eta;
  try {
    spec.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << o.out << ": " << ec.message() << '\n';
    return kExitConfigError;
  }
  try {
    const auto data = generate_coupled(spec);
    // Raw volume: undo the normalization so the file looks like share counts.
    std::vector<double> volume;
    for (double v : data.volume.values()) volume.push_back(v * 1e4);
    const auto csv_path = (std::filesystem::path(o.out) / "synthetic.csv").string();
    std::ofstream csv(csv_path);
    write_market_csv(csv, data.volume.series().timestamps(), data.prices, volume);
    csv.close();
    if (!csv) throw InputError("failed writing " + csv_path);
    Json truth{{"spec", to_json(spec)}, {"volume_scale", 1e4}, {"truth", to_json(data.truth)}};
    write_json((std::filesystem::path(o.out) / "truth.json").string(), truth);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStageFailure;
  }
  std::clog << "wrote synthetic.csv and truth.json under " << o.out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superstatistical segmentation and mixture analysis of minute data"};
  app.require_subcommand(1);

  Options opts;
  const std::vector<std::pair<std::string, std::string>> stage_cmds = {
      {"segment", "KSS segmentation of the volume series and its length EDF"},
      {"fit", "Local family fits per segment"},
      {"mixture", "Length law, theta prior, mu-omega relation and long-term P(v)"},
      {"dynamics", "Correlation functions, intraday profiles, length vs mean"},
      {"impact", "Sign probabilities, trading impact, homogeneity and Pi(|r|)"},
      {"returns", "Segmentation of |r| and the return mixture"},
      {"report", "Summary JSON"},
  };
  std::vector<std::pair<CLI::App*, Stage>> subs;
  for (const auto& [name, help] : stage_cmds) {
    auto* sub = app.add_subcommand(name, help);
    add_run_options(sub, opts);
    subs.emplace_back(sub, stage_from_name(name));
  }
  auto* all = app.add_subcommand("all", "Every stage in order");
  add_run_options(all, opts);

  SynthOptions sopt;
  auto* synth = app.add_subcommand("synth", "Generate coupled synthetic volume and price data");
  synth->add_option("-o,--out", sopt.out, "Output directory")->capture_default_str();
  synth->add_option("--seed", sopt.seed, "Seed")->capture_default_str();
  synth->add_option("--length", sopt.length, "Minutes to generate")->check(CLI::Range(2, 1 << 30))->capture_default_str();
  synth->add_option("--lambda", sopt.lambda, "Mean excess patch length")->capture_default_str();
  synth->add_option("--min-seg", sopt.min_length, "Minimum patch length")->capture_default_str();
  synth->add_option("--sigma-eta", sopt.sigma_eta, "Residual SD on ln mu")->capture_default_str();
  synth->add_flag("--dual", sopt.dual, "Dual-linear mu-omega relation");
  synth->add_flag("--u-shape", sopt.u_shape, "U-shaped intraday start intensity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  if (synth->parsed()) return run_synth(sopt);
  if (all->parsed()) return run_stages(opts, {kAllStages.begin(), kAllStages.end()});
  for (const auto& [sub, stage] : subs)
    if (sub->parsed()) return run_stages(opts, {stage});
  return kExitConfigError;
}
