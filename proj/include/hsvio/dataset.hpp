#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hsvio/error.hpp"
#include "hsvio/geometry/camera.hpp"
#include "hsvio/geometry/lie.hpp"
#include "hsvio/imaging/image.hpp"
#include "hsvio/imu.hpp"
#include "hsvio/io/csv.hpp"
#include "hsvio/io/keyvalue.hpp"
#include "hsvio/metrics.hpp"

namespace hsvio {

struct ImageRecord {
  std::int64_t timestamp_ns = 0;
  double timestamp = 0.0;
  GrayImage image;
};

struct SequenceMetadata {
  std::string trajectory;
  std::uint64_t seed = 0;
  double cam_rate = 0.0;
  double imu_rate = 0.0;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  double gyro_noise = 0.0;
  double accel_noise = 0.0;
  double stereo_baseline = 0.0;
  // Body state at the first camera frame, when the source knows it.
  std::optional<Vec3> init_velocity;
  std::optional<Rotation> init_orientation;
};

/// Time-ordered sensor streams of one sequence. cam1 is carried but unused by tracking.
struct SequenceSource {
  CameraIntrinsics camera;
  Pose body_from_camera;
  std::vector<ImageRecord> frames;
  std::vector<ImageRecord> cam1_frames;
  std::vector<ImuSample> imu;
  std::vector<GroundTruthState> ground_truth;
  SequenceMetadata metadata;

  Trajectory ground_truth_trajectory() const {
    Trajectory out;
    out.reserve(ground_truth.size());
    for (const auto& s : ground_truth) out.push_back({ns_to_seconds(s.timestamp_ns), s.pose});
    return out;
  }
};

// ---------------------------------------------------------------------------
// Synthetic generator

enum class TrajectoryKind { Circle, Lissajous, Stationary };

inline const char* to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Circle: return "circle";
    case TrajectoryKind::Lissajous: return "lissajous";
    case TrajectoryKind::Stationary: return "stationary";
  }
  return "?";
}

inline TrajectoryKind parse_trajectory_kind(const std::string& s) {
  if (s == "circle") return TrajectoryKind::Circle;
  if (s == "lissajous") return TrajectoryKind::Lissajous;
  if (s == "stationary") return TrajectoryKind::Stationary;
  throw Error(ErrorCode::ConfigInvalid, "unknown trajectory '" + s + "'");
}

/// Points in [start, end] seconds (relative to the first frame) hide `fraction` of all blobs.
struct OcclusionWindow {
  double start = 0.0;
  double end = 0.0;
  double fraction = 0.95;
};

inline Pose default_body_from_camera() {
  return Pose(Rotation::from_axis_angle(Vec3(1.0, 1.0, 0.0), 0.05), Vec3(0.05, -0.02, 0.01));
}

struct SynthConfig {
  std::uint64_t seed = 1;
  TrajectoryKind trajectory = TrajectoryKind::Circle;
  double duration = 10.0;  // s
  double cam_rate = 20.0;  // Hz
  double imu_rate = 200.0;
  int width = 640;
  int height = 480;
  double focal = 0.0;  // px; 0 picks 450 px scaled to the width
  int points = 200;
  double blob_sigma = 3.0;  // px
  double blob_min_amplitude = 90.0;
  double blob_max_amplitude = 150.0;
  // Faint signed blobs between the landmarks, kept below the corner threshold.
  int texture_points = 3000;
  double texture_amplitude = 15.0;
  double background = 60.0;
  double ramp_amplitude = 30.0;
  double min_depth = 3.0;  // m, from the trajectory centre
  double max_depth = 6.0;
  double radius = 0.5;          // m
  double yaw_amplitude = 0.1;   // rad
  double gyro_noise = 0.0;      // rad/s/sqrt(Hz)
  double accel_noise = 0.0;     // m/s^2/sqrt(Hz)
  double pixel_noise = 0.0;     // intensity std
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  Pose body_from_camera = default_body_from_camera();
  std::vector<OcclusionWindow> occlusions;
  double stereo_baseline = 0.0;  // m; > 0 also renders cam1
  std::int64_t start_ns = 1'000'000'000;

  CameraIntrinsics camera() const {
    CameraIntrinsics k;
    const double f = focal > 0.0 ? focal : 450.0 * width / 640.0;
    k.fx = f;
    k.fy = f;
    k.cx = 0.5 * (width - 1);
    k.cy = 0.5 * (height - 1);
    k.width = width;
    k.height = height;
    return k;
  }

  void validate() const {
    const auto bad = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
    if (width < 16 || height < 16) bad("resolution must be at least 16x16");
    if (!(duration > 0.0)) bad("duration must be positive");
    if (!(cam_rate > 0.0) || !(imu_rate > 0.0)) bad("rates must be positive");
    if (imu_rate < cam_rate) bad("imu rate must be at least the camera rate");
    if (!(blob_sigma >= 1.5)) bad("blob sigma must be at least 1.5 px");
    if (points < 0 || texture_points < 0) bad("point counts must be non-negative");
    if (texture_amplitude < 0.0) bad("texture amplitude must be non-negative");
    if (!(min_depth > 0.0) || max_depth < min_depth) bad("depth range invalid");
    if (gyro_noise < 0.0 || accel_noise < 0.0 || pixel_noise < 0.0) bad("noise levels must be non-negative");
    for (const auto& w : occlusions) {
      if (w.end < w.start || w.fraction < 0.0 || w.fraction > 1.0) bad("occlusion window invalid");
    }
  }
};

/// Analytic body kinematics in the world frame (z up).
struct BodyKinematics {
  Pose world_from_body;
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();  // world frame
};

namespace detail {

// Camera looking along world +y with image y pointing down (world -z).
inline Rotation level_camera_orientation() {
  Mat3 r;
  r << 1.0, 0.0, 0.0,
       0.0, 0.0, 1.0,
       0.0, -1.0, 0.0;
  return Rotation::from_matrix(r);
}

inline const Vec3 kTrajectoryCentre(0.0, 0.0, 1.5);

// Portable uniform/normal draws so generated data is identical across standard libraries.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace detail

/// Closed-form body pose and derivatives at time t (seconds since the first frame).
inline BodyKinematics body_kinematics(const SynthConfig& cfg, double t) {
  BodyKinematics k;
  const Rotation r0 = detail::level_camera_orientation() * cfg.body_from_camera.rotation().inverse();
  const double w = 2.0 * M_PI / cfg.duration;
  Vec3 p = detail::kTrajectoryCentre;
  double yaw = 0.0;
  double yaw_rate = 0.0;
  switch (cfg.trajectory) {
    case TrajectoryKind::Circle: {
      const double th = w * t;
      const double r = cfg.radius;
      p += Vec3(r * std::cos(th), 0.0, r * std::sin(th));
      k.velocity = Vec3(-r * w * std::sin(th), 0.0, r * w * std::cos(th));
      k.acceleration = Vec3(-r * w * w * std::cos(th), 0.0, -r * w * w * std::sin(th));
      break;
    }
    case TrajectoryKind::Lissajous: {
      const double r = cfg.radius;
      const double a = r, b = 0.2 * r, c = 0.6 * r;
      const double ph = M_PI / 3.0;
      p += Vec3(a * std::sin(w * t), b * std::sin(2.0 * w * t), c * std::sin(2.0 * w * t + ph));
      k.velocity = Vec3(a * w * std::cos(w * t), 2.0 * b * w * std::cos(2.0 * w * t),
                        2.0 * c * w * std::cos(2.0 * w * t + ph));
      k.acceleration = Vec3(-a * w * w * std::sin(w * t), -4.0 * b * w * w * std::sin(2.0 * w * t),
                            -4.0 * c * w * w * std::sin(2.0 * w * t + ph));
      break;
    }
    case TrajectoryKind::Stationary:
      break;
  }
  if (cfg.trajectory != TrajectoryKind::Stationary) {
    yaw = cfg.yaw_amplitude * std::sin(2.0 * w * t);
    yaw_rate = cfg.yaw_amplitude * 2.0 * w * std::cos(2.0 * w * t);
  }
  k.world_from_body = Pose(Rotation::exp(Vec3(0.0, 0.0, yaw)) * r0, p);
  k.angular_velocity = Vec3(0.0, 0.0, yaw_rate);
  return k;
}

struct SyntheticScene {
  std::vector<Vec3> points;
  std::vector<double> amplitudes;
  std::vector<Eigen::Matrix2d> shapes;  // inverse blob covariance, px^-2
  std::vector<double> occlusion_draw;  // point hidden in a window when draw < fraction
  std::vector<Vec3> texture_points;
  std::vector<double> texture_amplitudes;
  std::vector<double> texture_sigmas;
  std::vector<double> texture_occlusion_draw;
};

inline SyntheticScene make_scene(const SynthConfig& cfg) {
  detail::SynthRng rng(cfg.seed);
  const CameraIntrinsics k = cfg.camera();
  const Pose centre(detail::level_camera_orientation(), detail::kTrajectoryCentre);
  SyntheticScene s;
  // Points lie on a smooth depth surface so that neighbourhoods keep their layout under parallax.
  const double ph_u = rng.uniform(0.0, 2.0 * M_PI);
  const double ph_v = rng.uniform(0.0, 2.0 * M_PI);
  const auto depth = [&](double u, double v) {
    const double s01 = 0.5 + 0.25 * std::sin(2.6 * M_PI * u / cfg.width + ph_u) +
                       0.25 * std::sin(1.8 * M_PI * v / cfg.height + ph_v);
    return cfg.min_depth + (cfg.max_depth - cfg.min_depth) * s01;
  };
  for (int i = 0; i < cfg.points; ++i) {
    const double u = rng.uniform(-0.1 * cfg.width, 1.1 * cfg.width);
    const double v = rng.uniform(-0.1 * cfg.height, 1.1 * cfg.height);
    const double d = depth(u, v);
    s.points.push_back(centre * (k.unproject(Vec2(u, v)) * d));
    s.amplitudes.push_back(rng.uniform(cfg.blob_min_amplitude, cfg.blob_max_amplitude));
    s.occlusion_draw.push_back(rng.uniform());
    // Elongated, rotated blobs give descriptors something to tell apart.
    const double su = cfg.blob_sigma * rng.uniform(0.75, 1.33);
    const double sv = cfg.blob_sigma * rng.uniform(0.75, 1.33);
    const double a = rng.uniform(0.0, M_PI);
    Eigen::Matrix2d r;
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    s.shapes.push_back(r * Eigen::Vector2d(1.0 / (su * su), 1.0 / (sv * sv)).asDiagonal() * r.transpose());
  }
  detail::SynthRng trng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int i = 0; i < cfg.texture_points; ++i) {
    const double u = trng.uniform(-0.1 * cfg.width, 1.1 * cfg.width);
    const double v = trng.uniform(-0.1 * cfg.height, 1.1 * cfg.height);
    const double d = depth(u, v);
    s.texture_points.push_back(centre * (k.unproject(Vec2(u, v)) * d));
    s.texture_amplitudes.push_back(trng.uniform(-cfg.texture_amplitude, cfg.texture_amplitude));
    s.texture_sigmas.push_back(trng.uniform(1.5, 3.5));
    s.texture_occlusion_draw.push_back(trng.uniform());
  }
  return s;
}

/// Faint texture and anisotropic landmark blobs splatted at their exact projections over a diagonal ramp.
inline GrayImage render_view(const SynthConfig& cfg, const SyntheticScene& scene, const Pose& camera_from_world,
                             double t, detail::SynthRng* noise) {
  const CameraIntrinsics k = cfg.camera();
  const int w = cfg.width;
  const int h = cfg.height;
  std::vector<double> acc(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      acc[static_cast<std::size_t>(y) * w + x] =
          cfg.background + cfg.ramp_amplitude * 0.5 * (static_cast<double>(x) / (w - 1) + static_cast<double>(y) / (h - 1));
    }
  }
  double hide = 0.0;
  for (const auto& win : cfg.occlusions) {
    if (t >= win.start && t <= win.end) hide = std::max(hide, win.fraction);
  }
  const auto splat = [&](const Vec2& p, int radius, const Eigen::Matrix2d& inv_cov, double amplitude) {
    if (p.x() < -radius || p.y() < -radius || p.x() > w + radius || p.y() > h + radius) return;
    const int x0 = std::max(0, static_cast<int>(std::floor(p.x())) - radius);
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(p.x())) + radius);
    const int y0 = std::max(0, static_cast<int>(std::floor(p.y())) - radius);
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(p.y())) + radius);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Eigen::Vector2d d(x - p.x(), y - p.y());
        acc[static_cast<std::size_t>(y) * w + x] += amplitude * std::exp(-0.5 * d.dot(inv_cov * d));
      }
    }
  };
  for (std::size_t i = 0; i < scene.texture_points.size(); ++i) {
    if (scene.texture_occlusion_draw[i] < hide) continue;
    const Vec3 pc = camera_from_world * scene.texture_points[i];
    if (pc.z() < 0.1) continue;
    const double sg = scene.texture_sigmas[i];
    splat(project_camera_point(k, pc), static_cast<int>(std::ceil(3.0 * sg)),
          Eigen::Matrix2d::Identity() / (sg * sg), scene.texture_amplitudes[i]);
  }
  const int radius = static_cast<int>(std::ceil(4.0 * 1.33 * cfg.blob_sigma));
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    if (scene.occlusion_draw[i] < hide) continue;
    const Vec3 pc = camera_from_world * scene.points[i];
    if (pc.z() < 0.1) continue;
    splat(project_camera_point(k, pc), radius, scene.shapes[i], scene.amplitudes[i]);
  }
  GrayImage img(w, h);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    double v = acc[i];
    if (noise && cfg.pixel_noise > 0.0) v += cfg.pixel_noise * noise->normal();
    img.data()[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return img;
}

inline std::int64_t synth_timestamp_ns(const SynthConfig& cfg, int index, double rate) {
  return cfg.start_ns + static_cast<std::int64_t>(std::llround(index * 1e9 / rate));
}

inline int synth_frame_count(const SynthConfig& cfg) {
  return static_cast<int>(std::floor(cfg.duration * cfg.cam_rate + 1e-9));
}

/// Deterministic synthetic sequence: analytic motion, exact IMU, rendered frames and ground truth.
inline SequenceSource synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  SequenceSource src;
  src.camera = cfg.camera();
  src.body_from_camera = cfg.body_from_camera;
  const SyntheticScene scene = make_scene(cfg);
  detail::SynthRng noise(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  SequenceMetadata& m = src.metadata;
  m.trajectory = to_string(cfg.trajectory);
  m.seed = cfg.seed;
  m.cam_rate = cfg.cam_rate;
  m.imu_rate = cfg.imu_rate;
  m.gravity = cfg.gravity;
  m.gyro_bias = cfg.gyro_bias;
  m.accel_bias = cfg.accel_bias;
  m.gyro_noise = cfg.gyro_noise;
  m.accel_noise = cfg.accel_noise;
  m.stereo_baseline = cfg.stereo_baseline;
  const BodyKinematics first = body_kinematics(cfg, 0.0);
  m.init_velocity = first.velocity;
  m.init_orientation = first.world_from_body.rotation();

  const Pose cam1_from_cam0 = Pose::from_translation(Vec3(-cfg.stereo_baseline, 0.0, 0.0));
  const int frames = synth_frame_count(cfg);
  for (int i = 0; i < frames; ++i) {
    const double t = i / cfg.cam_rate;
    const std::int64_t ns = synth_timestamp_ns(cfg, i, cfg.cam_rate);
    const BodyKinematics kin = body_kinematics(cfg, t);
    const Pose world_from_camera = kin.world_from_body * cfg.body_from_camera;
    const Pose camera_from_world = world_from_camera.inverse();
    src.frames.push_back({ns, ns_to_seconds(ns), render_view(cfg, scene, camera_from_world, t, &noise)});
    if (cfg.stereo_baseline > 0.0) {
      src.cam1_frames.push_back(
          {ns, ns_to_seconds(ns), render_view(cfg, scene, cam1_from_cam0 * camera_from_world, t, &noise)});
    }
    src.ground_truth.push_back({ns, kin.world_from_body, kin.velocity, cfg.gyro_bias, cfg.accel_bias});
  }

  const int imu_count = static_cast<int>(std::floor(cfg.duration * cfg.imu_rate + 1e-9)) + 1;
  const double gyro_std = cfg.gyro_noise * std::sqrt(cfg.imu_rate);
  const double accel_std = cfg.accel_noise * std::sqrt(cfg.imu_rate);
  for (int i = 0; i < imu_count; ++i) {
    const double t = i / cfg.imu_rate;
    const BodyKinematics kin = body_kinematics(cfg, t);
    const Rotation r_bw = kin.world_from_body.rotation().inverse();
    Vec3 gyro = r_bw * kin.angular_velocity + cfg.gyro_bias;
    Vec3 accel = r_bw * (kin.acceleration - cfg.gravity) + cfg.accel_bias;
    if (gyro_std > 0.0) gyro += gyro_std * Vec3(noise.normal(), noise.normal(), noise.normal());
    if (accel_std > 0.0) accel += accel_std * Vec3(noise.normal(), noise.normal(), noise.normal());
    src.imu.push_back(ImuSample::at(synth_timestamp_ns(cfg, i, cfg.imu_rate), gyro, accel));
  }
  return src;
}

/// Ground-truth scene points of a synthetic config (for tests that need them).
inline std::vector<Vec3> synth_points(const SynthConfig& cfg) { return make_scene(cfg).points; }

// ---------------------------------------------------------------------------
// EuRoC layout

namespace detail {

inline std::string frame_filename(std::int64_t ns) { return std::to_string(ns) + ".pgm"; }

inline void write_camera(const std::filesystem::path& dir, const std::vector<ImageRecord>& frames) {
  std::filesystem::create_directories(dir / "data");
  std::ofstream csv(dir / "data.csv", std::ios::binary);
  if (!csv) throw Error(ErrorCode::IoError, "cannot write " + (dir / "data.csv").string());
  csv << "#timestamp [ns],filename\n";
  for (const auto& f : frames) {
    csv << f.timestamp_ns << ',' << frame_filename(f.timestamp_ns) << '\n';
    write_pgm((dir / "data" / frame_filename(f.timestamp_ns)).string(), f.image);
  }
  if (!csv) throw Error(ErrorCode::IoError, "write failed: " + (dir / "data.csv").string());
}

inline std::vector<ImageRecord> read_camera(const std::filesystem::path& dir) {
  const auto csv_path = dir / "data.csv";
  std::ifstream in(csv_path);
  if (!in) throw Error(ErrorCode::MissingFile, "missing " + csv_path.string());
  CsvReader reader(in, csv_path.string());
  std::vector<std::string_view> fields;
  std::vector<ImageRecord> out;
  while (reader.next(fields)) {
    if (fields.size() < 2) reader.fail("expected timestamp,filename");
    ImageRecord r;
    r.timestamp_ns = reader.to_int64(fields[0]);
    r.timestamp = ns_to_seconds(r.timestamp_ns);
    if (!out.empty() && r.timestamp_ns <= out.back().timestamp_ns) {
      throw Error(ErrorCode::NonMonotoneTimestamps, csv_path.string() + " line " + std::to_string(reader.line_number()));
    }
    const auto img_path = dir / "data" / std::string(fields[1]);
    if (!std::filesystem::exists(img_path)) throw Error(ErrorCode::MissingFile, "missing " + img_path.string());
    r.image = read_pgm(img_path.string());
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

inline KeyValueFile metadata_to_keyvalue(const SequenceSource& src) {
  KeyValueFile kv;
  const auto& k = src.camera;
  const auto& m = src.metadata;
  kv.set("camera.fx", format_double(k.fx));
  kv.set("camera.fy", format_double(k.fy));
  kv.set("camera.cx", format_double(k.cx));
  kv.set("camera.cy", format_double(k.cy));
  kv.set("camera.width", std::to_string(k.width));
  kv.set("camera.height", std::to_string(k.height));
  kv.set("extrinsics.body_from_camera", format_pose(src.body_from_camera));
  kv.set("gravity", format_vec3(m.gravity));
  kv.set("imu.gyro_bias", format_vec3(m.gyro_bias));
  kv.set("imu.accel_bias", format_vec3(m.accel_bias));
  kv.set("imu.gyro_noise", format_double(m.gyro_noise));
  kv.set("imu.accel_noise", format_double(m.accel_noise));
  kv.set("rate.camera", format_double(m.cam_rate));
  kv.set("rate.imu", format_double(m.imu_rate));
  kv.set("seed", std::to_string(m.seed));
  kv.set("trajectory", m.trajectory);
  kv.set("stereo.baseline", format_double(m.stereo_baseline));
  if (m.init_velocity) kv.set("init.velocity", format_vec3(*m.init_velocity));
  if (m.init_orientation) {
    kv.set("init.orientation", format_pose(Pose(*m.init_orientation, Vec3::Zero())));
  }
  return kv;
}

inline void metadata_from_keyvalue(const KeyValueFile& kv, SequenceSource& src) {
  const auto req = [&](const std::string& key) {
    const auto v = kv.get(key);
    if (!v) throw Error(ErrorCode::ConfigInvalid, "metadata is missing '" + key + "'");
    return *v;
  };
  src.camera.fx = parse_double(req("camera.fx"), "camera.fx");
  src.camera.fy = parse_double(req("camera.fy"), "camera.fy");
  src.camera.cx = parse_double(req("camera.cx"), "camera.cx");
  src.camera.cy = parse_double(req("camera.cy"), "camera.cy");
  src.camera.width = static_cast<int>(parse_int(req("camera.width"), "camera.width"));
  src.camera.height = static_cast<int>(parse_int(req("camera.height"), "camera.height"));
  src.camera.validate();
  SequenceMetadata& m = src.metadata;
  if (auto v = kv.get("extrinsics.body_from_camera")) src.body_from_camera = parse_pose(*v, "extrinsics.body_from_camera");
  if (auto v = kv.get("gravity")) m.gravity = parse_vec3(*v, "gravity");
  if (auto v = kv.get("imu.gyro_bias")) m.gyro_bias = parse_vec3(*v, "imu.gyro_bias");
  if (auto v = kv.get("imu.accel_bias")) m.accel_bias = parse_vec3(*v, "imu.accel_bias");
  if (auto v = kv.get("imu.gyro_noise")) m.gyro_noise = parse_double(*v, "imu.gyro_noise");
  if (auto v = kv.get("imu.accel_noise")) m.accel_noise = parse_double(*v, "imu.accel_noise");
  if (auto v = kv.get("rate.camera")) m.cam_rate = parse_double(*v, "rate.camera");
  if (auto v = kv.get("rate.imu")) m.imu_rate = parse_double(*v, "rate.imu");
  if (auto v = kv.get("seed")) m.seed = static_cast<std::uint64_t>(parse_int(*v, "seed"));
  if (auto v = kv.get("trajectory")) m.trajectory = *v;
  if (auto v = kv.get("stereo.baseline")) m.stereo_baseline = parse_double(*v, "stereo.baseline");
  if (auto v = kv.get("init.velocity")) m.init_velocity = parse_vec3(*v, "init.velocity");
  if (auto v = kv.get("init.orientation")) m.init_orientation = parse_pose(*v, "init.orientation").rotation();
}

/// Writes mav0/{cam0,cam1,imu0,state_groundtruth_estimate0} plus metadata.txt under `dir`.
inline void write_euroc(const SequenceSource& src, const std::filesystem::path& dir) {
  try {
    const auto mav = dir / "mav0";
    detail::write_camera(mav / "cam0", src.frames);
    if (!src.cam1_frames.empty()) detail::write_camera(mav / "cam1", src.cam1_frames);
    std::filesystem::create_directories(mav / "imu0");
    {
      std::ofstream out(mav / "imu0" / "data.csv", std::ios::binary);
      if (!out) throw Error(ErrorCode::IoError, "cannot write imu csv");
      write_imu_csv(out, src.imu);
    }
    if (!src.ground_truth.empty()) {
      std::filesystem::create_directories(mav / "state_groundtruth_estimate0");
      std::ofstream out(mav / "state_groundtruth_estimate0" / "data.csv", std::ios::binary);
      if (!out) throw Error(ErrorCode::IoError, "cannot write ground truth csv");
      write_euroc_groundtruth(out, src.ground_truth);
    }
    std::ofstream meta(dir / "metadata.txt", std::ios::binary);
    if (!meta) throw Error(ErrorCode::IoError, "cannot write metadata.txt");
    metadata_to_keyvalue(src).write(meta);
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(ErrorCode::IoError, e.what());
  }
}

namespace detail {

inline std::vector<GroundTruthState> read_groundtruth_states(const std::filesystem::path& path) {
  std::ifstream in(path);
  CsvReader reader(in, path.string());
  std::vector<std::string_view> fields;
  std::vector<GroundTruthState> out;
  while (reader.next(fields)) {
    if (fields.size() < 8) reader.fail("expected at least 8 columns");
    GroundTruthState s;
    s.timestamp_ns = reader.to_int64(fields[0]);
    if (!out.empty() && s.timestamp_ns <= out.back().timestamp_ns) {
      throw Error(ErrorCode::NonMonotoneTimestamps, path.string() + " line " + std::to_string(reader.line_number()));
    }
    double v[16] = {};
    const std::size_t n = std::min<std::size_t>(fields.size() - 1, 16);
    for (std::size_t i = 0; i < n; ++i) v[i] = reader.to_double(fields[i + 1]);
    s.pose = Pose(Rotation(Eigen::Quaterniond(v[3], v[4], v[5], v[6])), Vec3(v[0], v[1], v[2]));
    if (n >= 16) {
      s.velocity = Vec3(v[7], v[8], v[9]);
      s.gyro_bias = Vec3(v[10], v[11], v[12]);
      s.accel_bias = Vec3(v[13], v[14], v[15]);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace detail

inline SequenceSource load_euroc(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::MissingFile, "no dataset directory " + dir.string());
  const auto meta_path = dir / "metadata.txt";
  if (!std::filesystem::exists(meta_path)) throw Error(ErrorCode::MissingFile, "missing " + meta_path.string());
  SequenceSource src;
  metadata_from_keyvalue(KeyValueFile::load(meta_path.string()), src);
  const auto mav = dir / "mav0";
  src.frames = detail::read_camera(mav / "cam0");
  if (std::filesystem::exists(mav / "cam1" / "data.csv")) src.cam1_frames = detail::read_camera(mav / "cam1");
  const auto imu_path = mav / "imu0" / "data.csv";
  std::ifstream imu_in(imu_path);
  if (!imu_in) throw Error(ErrorCode::MissingFile, "missing " + imu_path.string());
  src.imu = parse_imu_csv(imu_in, imu_path.string());
  const auto gt_path = mav / "state_groundtruth_estimate0" / "data.csv";
  if (std::filesystem::exists(gt_path)) src.ground_truth = detail::read_groundtruth_states(gt_path);
  for (const auto& f : src.frames) {
    if (f.image.width() != src.camera.width || f.image.height() != src.camera.height) {
      throw Error(ErrorCode::ConfigInvalid, "image size does not match the intrinsics");
    }
  }
  return src;
}

}  // namespace hsvio
