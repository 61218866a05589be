// Acceptance checks: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is the number of failed criteria (0 when all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "harness.hpp"
#include "hsvio/hsvio.hpp"
#include "oracle.hpp"
#include "rendered.hpp"

using namespace hsvio;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kMetricsTol = 1e-12;
constexpr double kFixtureTol = 1e-9;
constexpr double kFixtureAte = 0.070711;
constexpr double kFixtureRpe = 0.1;
constexpr double kMetricsSeconds = 5.0;
constexpr double kTwoViewTol = 1e-6;
constexpr double kTwoViewSeconds = 10.0;
constexpr double kImuTol = 1e-4;
constexpr double kImuHalvingRatio = 3.0;
constexpr double kImuSeconds = 5.0;
constexpr double kJacobianTol = 1e-4;
constexpr int kJacobianProbes = 100;
constexpr double kJacobianSeconds = 10.0;
constexpr double kPyramidRequired = 0.90;
constexpr double kSingleLevelCeiling = 0.50;
constexpr double kPyramidSeconds = 30.0;
constexpr double kAteLimit = 0.01;
constexpr double kMinPathLength = 3.0;
constexpr double kEndToEndSeconds = 60.0;
constexpr double kMinCornersPerFrame = 150.0;
constexpr int kRepeats = 5;
constexpr double kMinSpeedup = 0.10;
constexpr double kAteRatio = 2.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

// Runs one criterion; the budget (seconds, 0 = none) is part of the verdict.
void criterion(const std::string& name, double budget, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = seconds_since(t0);
  if (budget > 0.0 && s >= budget) {
    o.pass = false;
    o.detail += "; over the " + fmt("%.0f", budget) + " s budget";
  }
  if (!o.pass) ++failures;
  std::printf("%s %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), s);
  std::fflush(stdout);
}

// --- metrics -----------------------------------------------------------------

Outcome metrics_oracle() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 49);
    Trajectory gt;
    Trajectory est;
    for (int i = 0; i < n; ++i) {
      const Pose p = test::random_pose(rng, 3.0, 5.0);
      gt.push_back({0.05 * i, p});
      est.push_back({0.05 * i, p * test::random_pose(rng, 1.0, 0.5)});
    }
    const int delta = 1 + static_cast<int>(rng() % static_cast<unsigned>(n - 1));
    std::vector<Eigen::Matrix4d> mg;
    std::vector<Eigen::Matrix4d> me;
    for (int i = 0; i < n; ++i) {
      mg.push_back(gt[static_cast<std::size_t>(i)].pose.matrix());
      me.push_back(est[static_cast<std::size_t>(i)].pose.matrix());
    }
    for (bool trans : {false, true}) {
      MetricsOptions o;
      o.delta = delta;
      o.variant = trans ? ErrorVariant::Translation : ErrorVariant::Se3;
      const auto got = evaluate(gt, est, o);
      const auto want = test::oracle::evaluate(mg, me, delta, trans);
      worst = std::max({worst, std::abs(got.ate_rmse - want.ate), std::abs(got.rpe_rmse - want.rpe),
                        std::abs(got.sd - want.sd)});
    }
  }
  const Trajectory gt = {{0.0, Pose()}, {1.0, Pose()}};
  const Trajectory est = {{0.0, Pose()}, {1.0, Pose::from_translation(Vec3(0.1, 0.0, 0.0))}};
  const auto fx = evaluate(gt, est);
  const double ate_err = std::abs(fx.ate_rmse - kFixtureAte);
  const double rpe_err = std::abs(fx.rpe_rmse - kFixtureRpe);
  // The fixture value is printed to six places; compare against the exact root too.
  const bool pass = worst < kMetricsTol && std::abs(fx.ate_rmse - std::sqrt(0.005)) < kFixtureTol &&
                    ate_err < 1e-6 && rpe_err < kFixtureTol;
  return {pass, "worst oracle gap " + fmt("%.2e", worst) + ", fixture ATE " + fmt("%.9f", fx.ate_rmse) + " RPE " +
                    fmt("%.9f", fx.rpe_rmse)};
}

// --- two-view geometry ----------------------------------------------------------

double rotation_distance(const Rotation& a, const Rotation& b) { return (a.inverse() * b).log().norm(); }

Outcome two_view() {
  double worst_r = 0.0;
  double worst_t = 0.0;
  double worst_x = 0.0;
  int below_floor = 0;
  int points = 0;
  // Noise-free rays triangulate exactly at any angle, so every point is checked; the
  // default parallax floor guards noisy data and would skip points near the epipole.
  TriangulationOptions every;
  every.min_parallax_deg = 1e-3;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto s = test::make_two_view(seed, 60);
    const Mat3 f = estimate_fundamental(s.matches).fundamental;
    const auto m = decompose_essential(essential_from_fundamental(f, s.k), s.matches, s.k);
    const Pose truth = s.camera2_from_camera1;
    worst_r = std::max(worst_r, rotation_distance(m.rotation, truth.rotation()));
    worst_t = std::max(worst_t, (m.translation - truth.translation().normalized()).norm());
    // Unit baseline reconstruction: true points shrink by the true baseline length.
    const double scale = 1.0 / truth.translation().norm();
    const Pose cam2(m.rotation, m.translation);
    for (std::size_t i = 0; i < s.matches.size(); ++i) {
      const Vec3 x = triangulate(s.matches[i].first, s.matches[i].second, Pose::identity(), cam2, s.k, every);
      const Vec3 c2 = -(cam2.rotation().inverse() * cam2.translation());
      const double ray_angle = std::acos(std::clamp(x.normalized().dot((x - c2).normalized()), -1.0, 1.0));
      if (ray_angle * 180.0 / std::numbers::pi < TriangulationOptions{}.min_parallax_deg) ++below_floor;
      ++points;
      worst_x = std::max(worst_x, (x - s.points[i] * scale).norm());
    }
  }
  const bool pass = worst_r < kTwoViewTol && worst_t < kTwoViewTol && worst_x < kTwoViewTol;
  return {pass, "100 seeds, " + std::to_string(points) + " points (" + std::to_string(below_floor) +
                    " below the default parallax floor); worst R " + fmt("%.2e", worst_r) + " rad, t " + fmt("%.2e", worst_t) + ", X " +
                    fmt("%.2e", worst_x) + " m"};
}

// --- IMU integration ---------------------------------------------------------------

std::vector<ImuSample> imu_stream(double duration, double rate, const std::function<Vec3(double)>& gyro,
                                  const std::function<Vec3(double)>& accel) {
  std::vector<ImuSample> out;
  const int n = static_cast<int>(std::lround(duration * rate));
  for (int i = 0; i <= n; ++i) {
    ImuSample s;
    s.timestamp_ns = seconds_to_ns(i / rate);
    s.t = ns_to_seconds(s.timestamp_ns);
    s.gyro = gyro(s.t);
    s.accel = accel(s.t);
    out.push_back(s);
  }
  return out;
}

// Spinning about z while following a circle with a vertical wobble.
double helix_error(double duration, double rate) {
  const double spin = 0.7;
  const double r = 1.5;
  const double w = 0.9;
  const Vec3 g(0.0, 0.0, -9.81);
  const auto orient = [&](double t) { return Rotation::exp(Vec3(0.0, 0.0, spin * t)); };
  const auto pos = [&](double t) { return Vec3(r * std::cos(w * t), r * std::sin(w * t), 0.3 * std::sin(2.0 * t)); };
  const auto vel = [&](double t) {
    return Vec3(-r * w * std::sin(w * t), r * w * std::cos(w * t), 0.6 * std::cos(2.0 * t));
  };
  const auto acc = [&](double t) {
    return Vec3(-r * w * w * std::cos(w * t), -r * w * w * std::sin(w * t), -1.2 * std::sin(2.0 * t));
  };
  const auto samples = imu_stream(
      duration, rate, [&](double) { return Vec3(0.0, 0.0, spin); },
      [&](double t) { return Vec3(orient(t).inverse() * (acc(t) - g)); });
  ImuState s0;
  s0.orientation = orient(0.0);
  s0.position = pos(0.0);
  s0.velocity = vel(0.0);
  s0.gravity = g;
  const auto res = integrate(s0, samples, 0.0, duration, 1.0 / rate);
  const Pose truth = Pose(orient(0.0), pos(0.0)).inverse() * Pose(orient(duration), pos(duration));
  const Pose d = truth.inverse() * res.prediction.relative;
  return d.translation().norm() + d.rotation().angle();
}

Outcome imu_integration() {
  const double rate = 200.0;
  ImuState still;
  still.gravity = Vec3::Zero();
  // Constant acceleration from rest: p = a t^2 / 2.
  const Vec3 a(0.4, -0.3, 0.2);
  const auto ca = integrate(still, imu_stream(2.0, rate, [](double) { return Vec3::Zero().eval(); },
                                              [&](double) { return a; }),
                            0.0, 2.0, 1.0 / rate);
  const double acc_err = (ca.prediction.relative.translation() - 0.5 * a * 4.0).norm() +
                         (ca.state.velocity - a * 2.0).norm();
  // Constant rate: R = exp(w t).
  const Vec3 w(0.3, -0.2, 0.9);
  const auto cr = integrate(still, imu_stream(2.0, rate, [&](double) { return w; },
                                              [](double) { return Vec3::Zero().eval(); }),
                            0.0, 2.0, 1.0 / rate);
  const double rot_err = (cr.prediction.relative.rotation().inverse() * Rotation::exp(w * 2.0)).angle();
  const double helix = helix_error(1.0, rate);
  double worst_ratio = 1e300;
  for (double r : {50.0, 100.0, 200.0}) worst_ratio = std::min(worst_ratio, helix_error(2.0, r) / helix_error(2.0, 2.0 * r));
  const bool pass = acc_err < kImuTol && rot_err < kImuTol && helix < kImuTol && worst_ratio >= kImuHalvingRatio;
  return {pass, "const-accel " + fmt("%.2e", acc_err) + ", const-rate " + fmt("%.2e", rot_err) + ", helix " +
                    fmt("%.2e", helix) + ", min halving ratio " + fmt("%.2f", worst_ratio)};
}

// --- photometric Jacobian ----------------------------------------------------------

Outcome photometric_jacobian_check() {
  const auto field = test::SmoothField::random(41, 640, 480, 400, 6.0, 14.0);
  const CameraIntrinsics k = test::vga_camera();
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int probes = 0;
  double worst = 0.0;
  while (probes < kJacobianProbes) {
    const Pose t_cw = test::random_pose(rng, 0.3, 0.5);
    const Vec3 pc(2.0 * u(rng), 1.5 * u(rng), 4.0 + 2.0 * u(rng));
    const Vec3 x = t_cw.inverse() * pc;
    const Vec2 px = project_camera_point(k, pc);
    if (px.x() < 40 || px.y() < 40 || px.x() > 600 || px.y() > 440) continue;
    const int level = probes % 4;
    const Vec2 offset(1.5 * u(rng), 1.5 * u(rng));
    struct Scaled {
      const test::SmoothField* f;
      double s;
      double value(double a, double b) const { return f->value(a * s, b * s); }
      Vec2 gradient(double a, double b) const { return f->gradient(a * s, b * s) * s; }
    } sampler{&field, static_cast<double>(1 << level)};
    const Vec6Row analytic = photometric_jacobian(sampler, k, t_cw, x, offset, level);
    if (analytic.norm() < 1.0) continue;
    Vec6Row numeric;
    const double h = 1e-5;  // truncation error falls as h^2; roundoff stays near 1e-9 here
    for (int j = 0; j < 6; ++j) {
      Vec6 d = Vec6::Zero();
      d(j) = h;
      numeric(j) = (photometric_sample(sampler, k, Pose::exp(d) * t_cw, x, offset, level) -
                    photometric_sample(sampler, k, Pose::exp(-d) * t_cw, x, offset, level)) /
                   (2.0 * h);
    }
    worst = std::max(worst, (analytic - numeric).norm() / analytic.norm());
    ++probes;
  }
  return {worst < kJacobianTol, std::to_string(probes) + " probes, worst relative error " + fmt("%.2e", worst)};
}

// --- pyramid sweep -----------------------------------------------------------------

Outcome pyramid_sweep() {
  const auto pair = test::RenderedPair::consecutive();
  bool dominates = true;
  std::string table;
  double s4_at8 = 0.0;
  double s1_at8 = 1.0;
  for (int offset = 0; offset <= 12; ++offset) {
    const double s4 = test::alignment_success(pair, offset, 4);
    const double s1 = test::alignment_success(pair, offset, 1);
    if (s4 < s1) dominates = false;
    if (offset == 8) {
      s4_at8 = s4;
      s1_at8 = s1;
    }
    table += " " + std::to_string(offset) + ":" + fmt("%.2f", s4) + "/" + fmt("%.2f", s1);
  }
  const bool pass = dominates && s4_at8 >= kPyramidRequired && s1_at8 <= kSingleLevelCeiling;
  return {pass, std::to_string(pair.patches.size()) + " patches, 4-level/1-level success" + table};
}

// --- sequence-level checks ---------------------------------------------------------------

struct SequenceRun {
  SequenceSource src;
  PipelineResult hybrid;
  double generate_s = 0.0;
  double hybrid_s = 0.0;
};

double path_length(const Trajectory& t) {
  double len = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) len += (t[i].pose.translation() - t[i - 1].pose.translation()).norm();
  return len;
}

double sim3_ate(const SequenceSource& src, const Trajectory& est) {
  MetricsOptions mo;
  mo.alignment = AlignmentMode::Sim3;
  mo.variant = ErrorVariant::Translation;
  return evaluate(src.ground_truth_trajectory(), est, mo).ate_rmse;
}

TrackerConfig mode_config(TrackingMode m) {
  TrackerConfig c;
  c.mode = m;
  return c;
}

SequenceRun& circle() {
  static SequenceRun run = [] {
    SequenceRun r;
    auto t0 = std::chrono::steady_clock::now();
    r.src = synth_generate(SynthConfig{});
    r.generate_s = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    r.hybrid = run_pipeline(r.src, mode_config(TrackingMode::Hybrid));
    r.hybrid_s = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome end_to_end() {
  const auto& c = circle();
  const double ate = sim3_ate(c.src, c.hybrid.trajectory);
  const double len = path_length(c.src.ground_truth_trajectory());
  const bool pass = !c.hybrid.truncated && c.src.frames.size() == 200 && c.hybrid.trajectory.size() == 200 &&
                    len >= kMinPathLength && ate < kAteLimit;
  return {pass, std::to_string(c.hybrid.trajectory.size()) + " frames, path " + fmt("%.3f", len) + " m, sim3 ATE " +
                    fmt("%.5f", ate) + " m (" + fmt("%.3f", 100.0 * ate / len) + "% of length)"};
}

Outcome efficiency() {
  const auto& c = circle();
  const TrackerConfig tc;
  double corners = 0.0;
  FastOptions fo;
  fo.border = kBriefMargin + 1;
  for (const auto& f : c.src.frames) {
    corners += static_cast<double>(detect_fast(f.image, tc.fast_threshold, static_cast<std::size_t>(tc.max_features), fo).size());
  }
  corners /= static_cast<double>(c.src.frames.size());
  double hybrid_ms = 0.0;
  double full_ms = 0.0;
  double full_ate = 0.0;
  // Interleaved so that slow drift of the machine affects both modes alike.
  for (int i = 0; i < kRepeats; ++i) {
    hybrid_ms += run_pipeline(c.src, mode_config(TrackingMode::Hybrid)).stats.mean_ms() / kRepeats;
    const auto full = run_pipeline(c.src, mode_config(TrackingMode::Full));
    full_ms += full.stats.mean_ms() / kRepeats;
    if (i == 0) full_ate = sim3_ate(c.src, full.trajectory);
  }
  const double hybrid_ate = sim3_ate(c.src, c.hybrid.trajectory);
  const double speedup = (full_ms - hybrid_ms) / full_ms;
  const bool pass = corners >= kMinCornersPerFrame && speedup >= kMinSpeedup && hybrid_ate <= kAteRatio * full_ate;
  return {pass, fmt("%.1f", corners) + " corners/frame, hybrid " + fmt("%.2f", hybrid_ms) + " ms vs full " +
                    fmt("%.2f", full_ms) + " ms per frame (speedup " + fmt("%.1f", 100.0 * speedup) + "%), ATE " +
                    fmt("%.5f", hybrid_ate) + " vs " + fmt("%.5f", full_ate)};
}

// Hybrid: 2 + keyframes promoted from flow-tracked frames + recovery attempts. Full: one per processed frame.
// Rebuilt from the per-frame records and compared with the extraction counters.
bool extraction_counts_hold(const SequenceSource& src, const PipelineResult* hybrid_run, std::string& detail) {
  const PipelineResult hybrid = hybrid_run ? *hybrid_run : run_pipeline(src, mode_config(TrackingMode::Hybrid));
  const PipelineResult full = run_pipeline(src, mode_config(TrackingMode::Full));
  int kf_without = 0;
  int recovery_events = 0;
  for (const auto& f : hybrid.stats.frames) {
    if (f.keyframe && f.branch == Branch::Flow) ++kf_without;
    if (f.branch == Branch::Recovery || f.branch == Branch::Lost) ++recovery_events;
  }
  const int expected = 2 + kf_without + recovery_events;
  const bool ok = hybrid.stats.total_extractions() == expected && hybrid.stats.keyframe_extractions == kf_without &&
                  full.stats.total_extractions() == static_cast<int>(full.stats.frames.size());
  detail += " [" + std::to_string(hybrid.stats.total_extractions()) + " = 2 + " + std::to_string(kf_without) + " + " +
            std::to_string(recovery_events) + (hybrid.truncated ? " lost" : "") + "; full " +
            std::to_string(full.stats.total_extractions()) + "/" + std::to_string(full.stats.frames.size()) + "]";
  return ok;
}

Outcome keyframe_truth_table() {
  const TrackerConfig tc;
  int agree = 0;
  for (int mask = 0; mask < 8; ++mask) {
    const bool pose = mask & 1;
    const bool parallax = mask & 2;
    const bool few = mask & 4;
    Frame cur;
    cur.pose = Pose::from_translation(Vec3(pose ? tc.frobenius_threshold + 0.05 : 0.5 * tc.frobenius_threshold, 0.0, 0.0));
    const int n = few ? tc.min_matches - 1 : tc.min_matches + 10;
    const double shift = parallax ? tc.parallax_threshold + 1.0 : 0.5 * tc.parallax_threshold;
    LocalMatches m(static_cast<std::size_t>(n));
    for (auto& x : m) x.current = x.previous + Vec2(shift, 0.0);
    const auto c = evaluate_keyframe_criteria(*cur.pose, Pose(), m, tc);
    const bool decided = keyframe_decision(cur, Pose(), m, tc);
    if (c.pose_triggered == pose && c.parallax_triggered == parallax && c.count_triggered == few &&
        decided == (pose || parallax || few)) {
      ++agree;
    }
  }
  // Sequences chosen to exercise each term: plain circle, a wide circle that promotes
  // keyframes, an IMU spike that forces a recovery, and an occlusion that ends the run.
  std::string detail = std::to_string(agree) + "/8 combinations agree; extractions";
  bool counts = extraction_counts_hold(circle().src, &circle().hybrid, detail);
  SynthConfig wide;
  wide.duration = 5.0;
  wide.radius = 1.5;
  counts = extraction_counts_hold(synth_generate(wide), nullptr, detail) && counts;
  SynthConfig short_circle;
  short_circle.duration = 5.0;
  SequenceSource spiked = synth_generate(short_circle);
  const double t0 = spiked.frames.front().timestamp;
  for (auto& m : spiked.imu) {
    if (m.t - t0 >= 2.0 && m.t - t0 < 2.05) m.accel.x() += 300.0;
  }
  counts = extraction_counts_hold(spiked, nullptr, detail) && counts;
  SynthConfig occluded = short_circle;
  occluded.occlusions.push_back({2.0, 2.3, 0.95});
  counts = extraction_counts_hold(synth_generate(occluded), nullptr, detail) && counts;
  return {agree == 8 && counts, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto& c = circle();
  const fs::path dir = fs::temp_directory_path() / ("hsvio_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  for (const char* name : {"a.txt", "b.txt"}) {
    std::ofstream out(dir / name, std::ios::binary);
    write_tum(out, run_pipeline(c.src, mode_config(TrackingMode::Hybrid)).trajectory);
  }
  const std::string a = slurp(dir / "a.txt");
  const std::string b = slurp(dir / "b.txt");
  fs::remove_all(dir);
  std::ostringstream first;
  write_tum(first, c.hybrid.trajectory);
  const bool pass = !a.empty() && a == b && a == first.str();
  return {pass, std::to_string(a.size()) + " bytes, three runs " + (pass ? "identical" : "differ")};
}

}  // namespace

int main() {
  criterion("metrics oracle equivalence", kMetricsSeconds, metrics_oracle);
  criterion("two-view geometry", kTwoViewSeconds, two_view);
  criterion("IMU integration", kImuSeconds, imu_integration);
  criterion("photometric Jacobian", kJacobianSeconds, photometric_jacobian_check);
  criterion("pyramid robustness sweep", kPyramidSeconds, pyramid_sweep);
  criterion("end-to-end accuracy", 0.0, [] {
    auto o = end_to_end();
    const auto& c = circle();
    const double s = c.generate_s + c.hybrid_s;
    o.detail += "; generate + track " + fmt("%.1f", s) + " s";
    if (s >= kEndToEndSeconds) {
      o.pass = false;
      o.detail += " over the budget";
    }
    return o;
  });
  criterion("efficiency (hybrid vs full)", 0.0, efficiency);
  criterion("keyframe truth table", 0.0, keyframe_truth_table);
  criterion("determinism", 0.0, determinism);
  std::printf("%d criteria failed\n", failures);
  return failures;
}
