// hsvio command-line tool: synth, run, eval, bench.
//
// Exit codes: 0 ok, 2 bad arguments or config, 3 I/O or dataset error,
// 4 truncated run (tracking could not recover, or never initialized),
// 5 trajectories do not overlap in time.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hsvio/hsvio.hpp"

namespace fs = std::filesystem;
using namespace hsvio;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kBadArgs = 2, kIo = 3, kTruncated = 4, kNoOverlap = 5 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::DeltaTooLarge:
      return kBadArgs;
    case ErrorCode::NoOverlap:
      return kNoOverlap;
    case ErrorCode::RecoveryFailed:
    case ErrorCode::InitFailed:
      return kTruncated;
    default:
      return kIo;
  }
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

TrackerConfig load_config(const std::string& path, const std::string& mode) {
  TrackerConfig cfg;
  if (!path.empty()) cfg = TrackerConfig::from_keyvalue(KeyValueFile::load(path));
  if (!mode.empty()) cfg.mode = parse_tracking_mode(mode);
  if (const char* seed = std::getenv("HS_SEED"); seed && *seed) {
    cfg.seed = static_cast<std::uint64_t>(parse_int(seed, "HS_SEED"));
  }
  cfg.validate();
  return cfg;
}

std::ofstream open_output(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 1;
  std::string traj = "circle";
  double duration = 10.0;
  double cam_rate = 20.0;
  double imu_rate = 200.0;
  std::string resolution = "640x480";
  int points = 200;
  double blob_sigma = 3.0;
  double noise_gyro = 0.0;
  double noise_accel = 0.0;
  double noise_pixel = 0.0;
  double stereo_baseline = 0.0;
  std::vector<std::string> occlusions;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--out", a.out, "output dataset directory")->required();
  app.add_option("--seed", a.seed, "scene and noise seed");
  app.add_option("--traj", a.traj, "circle | lissajous | stationary");
  app.add_option("--duration", a.duration, "seconds");
  app.add_option("--cam-rate", a.cam_rate, "Hz");
  app.add_option("--imu-rate", a.imu_rate, "Hz");
  app.add_option("--resolution", a.resolution, "WIDTHxHEIGHT");
  app.add_option("--points", a.points, "landmark blob count");
  app.add_option("--blob-sigma", a.blob_sigma, "landmark blob size, px");
  app.add_option("--noise-gyro", a.noise_gyro, "rad/s/sqrt(Hz)");
  app.add_option("--noise-accel", a.noise_accel, "m/s^2/sqrt(Hz)");
  app.add_option("--noise-pixel", a.noise_pixel, "intensity std");
  app.add_option("--stereo-baseline", a.stereo_baseline, "m; > 0 also renders cam1");
  app.add_option("--occlusion", a.occlusions, "START:END[:FRACTION] in seconds from the start");
}

SynthConfig synth_config(const SynthArgs& a) {
  SynthConfig c;
  c.seed = a.seed;
  c.trajectory = parse_trajectory_kind(a.traj);
  c.duration = a.duration;
  c.cam_rate = a.cam_rate;
  c.imu_rate = a.imu_rate;
  const auto x = a.resolution.find('x');
  if (x == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "resolution must be WIDTHxHEIGHT");
  c.width = static_cast<int>(parse_int(a.resolution.substr(0, x), "resolution"));
  c.height = static_cast<int>(parse_int(a.resolution.substr(x + 1), "resolution"));
  c.points = a.points;
  c.blob_sigma = a.blob_sigma;
  c.gyro_noise = a.noise_gyro;
  c.accel_noise = a.noise_accel;
  c.pixel_noise = a.noise_pixel;
  c.stereo_baseline = a.stereo_baseline;
  for (const auto& o : a.occlusions) {
    std::vector<double> v;
    std::stringstream ss(o);
    std::string tok;
    while (std::getline(ss, tok, ':')) v.push_back(parse_double(tok, "occlusion"));
    if (v.size() < 2 || v.size() > 3) throw Error(ErrorCode::ConfigInvalid, "occlusion must be START:END[:FRACTION]");
    c.occlusions.push_back({v[0], v[1], v.size() == 3 ? v[2] : 0.95});
  }
  c.validate();
  return c;
}

int cmd_synth(const SynthArgs& a) {
  const SynthConfig cfg = synth_config(a);
  const SequenceSource src = synth_generate(cfg);
  write_euroc(src, a.out);
  std::cout << "wrote " << src.frames.size() << " frames, " << src.imu.size() << " imu samples to " << a.out << '\n';
  std::cout << "synth frames=" << src.frames.size() << " imu=" << src.imu.size() << " seed=" << cfg.seed
            << " out=" << a.out << '\n';
  return kOk;
}

// --- run -----------------------------------------------------------------

struct RunArgs {
  std::string dataset;
  std::string mode;
  std::string config;
  std::string out_traj = "trajectory.txt";
  std::string out_stats = "stats.csv";
  std::string manifest;
};

void add_run(CLI::App& app, RunArgs& a) {
  app.add_option("--dataset", a.dataset, "EuRoC-layout dataset directory")->required();
  app.add_option("--mode", a.mode, "hybrid | full (overrides the config)");
  app.add_option("--config", a.config, "key = value config or a previous run manifest");
  app.add_option("--out-traj", a.out_traj, "TUM trajectory output");
  app.add_option("--out-stats", a.out_stats, "per-frame stats CSV output");
  app.add_option("--manifest", a.manifest, "manifest output (default: <out-traj>.manifest)");
}

int cmd_run(const RunArgs& a) {
  const TrackerConfig cfg = load_config(a.config, a.mode);
  const SequenceSource src = load_euroc(a.dataset);
  const PipelineResult r = run_pipeline(src, cfg);
  {
    auto out = open_output(a.out_traj);
    write_tum(out, r.trajectory);
  }
  {
    auto out = open_output(a.out_stats);
    write_frame_stats_csv(out, r.stats);
  }
  KeyValueFile manifest = cfg.to_keyvalue();
  manifest.set("run.version", kVersion);
  manifest.set("run.dataset", fs::absolute(a.dataset).string());
  manifest.set("run.dataset_seed", std::to_string(src.metadata.seed));
  manifest.set("run.out_traj", a.out_traj);
  manifest.set("run.out_stats", a.out_stats);
  manifest.set("run.frames", std::to_string(r.stats.frames.size()));
  manifest.set("run.total_ms", fixed(r.stats.total_ms));
  manifest.set("run.mean_ms", fixed(r.stats.mean_ms()));
  manifest.set("run.truncated", r.truncated ? "true" : "false");
  const std::string manifest_path = a.manifest.empty() ? a.out_traj + ".manifest" : a.manifest;
  {
    auto out = open_output(manifest_path);
    out << "# hsvio run manifest; pass it back with --config to reproduce this run\n";
    manifest.write(out);
  }
  if (r.truncated) {
    std::cerr << "run truncated at frame "
              << (r.stats.lost_at_frame ? std::to_string(*r.stats.lost_at_frame) : std::string("?")) << ": "
              << r.message << '\n';
  }
  std::cout << "total frames: " << r.stats.frames.size() << '\n'
            << "total tracking time (ms): " << fixed(r.stats.total_ms) << '\n'
            << "mean per-frame time (ms): " << fixed(r.stats.mean_ms()) << '\n';
  std::cout << "run mode=" << to_string(cfg.mode) << " frames=" << r.stats.frames.size()
            << " total_ms=" << fixed(r.stats.total_ms) << " mean_ms=" << fixed(r.stats.mean_ms())
            << " keyframes=" << r.stats.keyframes << " extractions=" << r.stats.total_extractions()
            << " truncated=" << (r.truncated ? 1 : 0) << '\n';
  return r.truncated ? kTruncated : kOk;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string gt;
  std::string est;
  std::string metric = "all";
  std::string variant = "se3";
  int delta = 1;
  std::string align = "none";
  double max_dt = 0.01;
  std::string out;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--gt", a.gt, "ground truth: TUM text or EuRoC ground-truth CSV")->required();
  app.add_option("--est", a.est, "estimate: TUM text")->required();
  app.add_option("--metric", a.metric, "ate | rpe | all")->check(CLI::IsMember({"ate", "rpe", "all"}));
  app.add_option("--variant", a.variant, "se3 | trans")->check(CLI::IsMember({"se3", "trans"}));
  app.add_option("--delta", a.delta, "RPE index gap")->check(CLI::PositiveNumber);
  app.add_option("--align", a.align, "none | se3 | sim3")->check(CLI::IsMember({"none", "se3", "sim3"}));
  app.add_option("--max-dt", a.max_dt, "association tolerance, s");
  app.add_option("--out", a.out, "per-pose error series CSV");
}

Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path);
  if (fs::path(path).extension() == ".csv") return parse_euroc_groundtruth(in, path);
  return read_tum(in, path);
}

int cmd_eval(const EvalArgs& a) {
  MetricsOptions opts;
  opts.variant = a.variant == "se3" ? ErrorVariant::Se3 : ErrorVariant::Translation;
  opts.alignment = a.align == "none" ? AlignmentMode::None : (a.align == "se3" ? AlignmentMode::Se3 : AlignmentMode::Sim3);
  opts.delta = a.delta;
  opts.max_dt = a.max_dt;
  const Trajectory gt = read_trajectory(a.gt);
  const Trajectory est = read_trajectory(a.est);
  const MetricsReport rep = evaluate(gt, est, opts);
  if (a.metric != "ate" && !rep.rpe_available) throw Error(ErrorCode::DeltaTooLarge, "delta exceeds the trajectory");
  if (!a.out.empty()) {
    auto out = open_output(a.out);
    write_series_csv(out, rep);
  }
  std::string summary = "eval n=" + std::to_string(rep.n) + " variant=" + a.variant + " align=" + a.align;
  if (a.metric != "rpe") {
    std::cout << "ATE RMSE: " << format_double(rep.ate_rmse) << "\nATE S.D.: " << format_double(rep.sd)
              << "\nATE mean: " << format_double(rep.mean) << '\n';
    summary += " ate_rmse=" + format_double(rep.ate_rmse) + " ate_sd=" + format_double(rep.sd);
  }
  if (a.metric != "ate") {
    const double rpe_sd = sd(rep.rpe_series);
    std::cout << "RPE RMSE: " << format_double(rep.rpe_rmse) << "\nRPE S.D.: " << format_double(rpe_sd)
              << "\nRPE delta: " << rep.delta << '\n';
    summary += " rpe_rmse=" + format_double(rep.rpe_rmse) + " rpe_sd=" + format_double(rpe_sd);
  }
  std::cout << "N: " << rep.n << '\n';
  if (a.align == "sim3") std::cout << "scale: " << format_double(rep.alignment.scale) << '\n';
  std::cout << summary << '\n';
  return kOk;
}

// --- bench ---------------------------------------------------------------

struct BenchArgs {
  std::string dataset;
  int repeat = 5;
  std::string config;
  std::string out = "bench.csv";
};

void add_bench(CLI::App& app, BenchArgs& a) {
  app.add_option("--dataset", a.dataset, "EuRoC-layout dataset directory")->required();
  app.add_option("--repeat", a.repeat, "runs per mode")->check(CLI::PositiveNumber);
  app.add_option("--config", a.config, "key = value config (mode is overridden)");
  app.add_option("--out", a.out, "report CSV");
}

struct ModeSummary {
  std::size_t frames = 0;
  double total_ms = 0.0;  // mean over repeats
  double mean_ms = 0.0;   // mean over repeats
  double min_ms = std::numeric_limits<double>::infinity();
  std::optional<double> ate;
  bool truncated = false;
};

ModeSummary bench_mode(const SequenceSource& src, TrackerConfig cfg, TrackingMode mode, int repeat) {
  cfg.mode = mode;
  ModeSummary s;
  for (int i = 0; i < repeat; ++i) {
    const PipelineResult r = run_pipeline(src, cfg);
    s.frames = r.stats.frames.size();
    s.total_ms += r.stats.total_ms / repeat;
    s.mean_ms += r.stats.mean_ms() / repeat;
    s.min_ms = std::min(s.min_ms, r.stats.mean_ms());
    s.truncated = s.truncated || r.truncated;
    if (i == 0 && !src.ground_truth.empty()) {
      MetricsOptions mo;
      mo.alignment = AlignmentMode::Sim3;
      try {
        s.ate = evaluate(src.ground_truth_trajectory(), r.trajectory, mo).ate_rmse;
      } catch (const Error&) {
        s.ate.reset();
      }
    }
  }
  return s;
}

int cmd_bench(const BenchArgs& a) {
  const TrackerConfig cfg = load_config(a.config, "");
  const SequenceSource src = load_euroc(a.dataset);
  const ModeSummary hybrid = bench_mode(src, cfg, TrackingMode::Hybrid, a.repeat);
  const ModeSummary full = bench_mode(src, cfg, TrackingMode::Full, a.repeat);
  const double improvement = full.mean_ms > 0.0 ? 100.0 * (full.mean_ms - hybrid.mean_ms) / full.mean_ms : 0.0;
  const auto ate_text = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  {
    auto out = open_output(a.out);
    out << "total_frames,hybrid_total_ms,full_total_ms,hybrid_mean_ms,full_mean_ms,hybrid_min_ms,full_min_ms,"
           "improvement_percent,hybrid_ate,full_ate\n";
    out << hybrid.frames << ',' << fixed(hybrid.total_ms) << ',' << fixed(full.total_ms) << ',' << fixed(hybrid.mean_ms)
        << ',' << fixed(full.mean_ms) << ',' << fixed(hybrid.min_ms) << ',' << fixed(full.min_ms) << ','
        << fixed(improvement, 2) << ',' << ate_text(hybrid.ate) << ',' << ate_text(full.ate) << '\n';
  }
  std::cout << "frames: " << hybrid.frames << ", repeats: " << a.repeat << '\n'
            << "hybrid mean/min ms per frame: " << fixed(hybrid.mean_ms) << " / " << fixed(hybrid.min_ms) << '\n'
            << "full   mean/min ms per frame: " << fixed(full.mean_ms) << " / " << fixed(full.min_ms) << '\n'
            << "speedup: " << fixed(improvement, 2) << "%\n"
            << "ATE (sim3) hybrid: " << ate_text(hybrid.ate) << ", full: " << ate_text(full.ate) << '\n';
  std::cout << "bench frames=" << hybrid.frames << " hybrid_mean_ms=" << fixed(hybrid.mean_ms)
            << " full_mean_ms=" << fixed(full.mean_ms) << " improvement_percent=" << fixed(improvement, 2)
            << " hybrid_ate=" << ate_text(hybrid.ate) << " full_ate=" << ate_text(full.ate)
            << " truncated=" << ((hybrid.truncated || full.truncated) ? 1 : 0) << '\n';
  return hybrid.truncated || full.truncated ? kTruncated : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid feature/direct visual-inertial odometry front-end"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  SynthArgs synth;
  RunArgs run;
  EvalArgs eval;
  BenchArgs bench;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic EuRoC-layout dataset");
  auto* c_run = app.add_subcommand("run", "track a dataset and write the trajectory");
  auto* c_eval = app.add_subcommand("eval", "compare an estimated trajectory to ground truth");
  auto* c_bench = app.add_subcommand("bench", "time hybrid against full descriptor extraction");
  add_synth(*c_synth, synth);
  add_run(*c_run, run);
  add_eval(*c_eval, eval);
  add_bench(*c_bench, bench);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadArgs;
  }
  try {
    if (c_synth->parsed()) return cmd_synth(synth);
    if (c_run->parsed()) return cmd_run(run);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_bench->parsed()) return cmd_bench(bench);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kBadArgs;
}
