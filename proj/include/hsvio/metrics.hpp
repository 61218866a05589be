#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "hsvio/error.hpp"
#include "hsvio/geometry/lie.hpp"
#include "hsvio/io/csv.hpp"

namespace hsvio {

struct TimedPose {
  double timestamp = 0.0;  // seconds
  Pose pose;
};

/// Time-ordered poses (body-to-world).
using Trajectory = std::vector<TimedPose>;

inline void validate_trajectory(const Trajectory& traj, const std::string& name = "trajectory") {
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (!(traj[i].timestamp > traj[i - 1].timestamp)) {
      throw Error(ErrorCode::NonMonotoneTimestamps, name + ": timestamps must increase (index " + std::to_string(i) + ")");
    }
  }
}

struct PosePair {
  double timestamp = 0.0;
  Pose gt;
  Pose est;
};

enum class ErrorVariant { Se3, Translation };
enum class AlignmentMode { None, Se3, Sim3 };

inline const char* to_string(ErrorVariant v) { return v == ErrorVariant::Se3 ? "se3" : "trans"; }

inline const char* to_string(AlignmentMode m) {
  switch (m) {
    case AlignmentMode::None: return "none";
    case AlignmentMode::Se3: return "se3";
    case AlignmentMode::Sim3: return "sim3";
  }
  return "?";
}

/**
 * Greedy nearest-timestamp association. Each estimate is paired with the
 * closest ground-truth stamp after the previously used one, so the result is
 * one-to-one and preserves order.
 */
inline std::vector<PosePair> associate(const Trajectory& gt, const Trajectory& est, double max_dt) {
  if (gt.empty() || est.empty()) throw Error(ErrorCode::NoOverlap, "empty trajectory");
  std::vector<PosePair> out;
  std::size_t j = 0;
  for (const auto& e : est) {
    while (j < gt.size() && gt[j].timestamp < e.timestamp - max_dt) ++j;
    if (j == gt.size()) break;
    std::size_t best = gt.size();
    double best_dt = max_dt;
    for (std::size_t k = j; k < gt.size() && gt[k].timestamp <= e.timestamp + max_dt; ++k) {
      const double dt = std::abs(gt[k].timestamp - e.timestamp);
      if (dt <= best_dt && (best == gt.size() || dt < best_dt)) {
        best = k;
        best_dt = dt;
      }
    }
    if (best == gt.size()) continue;
    out.push_back({e.timestamp, gt[best].pose, e.pose});
    j = best + 1;
  }
  if (out.empty()) throw Error(ErrorCode::NoOverlap, "no timestamps within " + std::to_string(max_dt) + " s");
  return out;
}

struct ErrorSeries {
  double rmse = 0.0;
  std::vector<double> series;
};

inline double pose_error(const Pose& delta, ErrorVariant variant) {
  return variant == ErrorVariant::Se3 ? delta.log().norm() : delta.translation().norm();
}

inline double rms(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s / static_cast<double>(v.size()));
}

/// Absolute trajectory error: e_i = ||log(T_gt^-1 T_est)|| or the translation distance.
inline ErrorSeries ate(std::span<const PosePair> pairs, ErrorVariant variant = ErrorVariant::Se3) {
  ErrorSeries out;
  out.series.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (variant == ErrorVariant::Translation) {
      out.series.push_back((p.gt.translation() - p.est.translation()).norm());
    } else {
      out.series.push_back(pose_error(p.gt.inverse() * p.est, variant));
    }
  }
  out.rmse = rms(out.series);
  return out;
}

/// Relative pose error over an index gap `delta`.
inline ErrorSeries rpe(std::span<const PosePair> pairs, int delta = 1, ErrorVariant variant = ErrorVariant::Se3) {
  if (delta < 1 || static_cast<std::size_t>(delta) >= pairs.size()) {
    throw Error(ErrorCode::DeltaTooLarge,
                "rpe needs 1 <= delta < N (delta " + std::to_string(delta) + ", N " + std::to_string(pairs.size()) + ")");
  }
  ErrorSeries out;
  const auto d = static_cast<std::size_t>(delta);
  for (std::size_t i = 0; i + d < pairs.size(); ++i) {
    const Pose rel_gt = pairs[i].gt.inverse() * pairs[i + d].gt;
    const Pose rel_est = pairs[i].est.inverse() * pairs[i + d].est;
    out.series.push_back(pose_error(rel_gt.inverse() * rel_est, variant));
  }
  out.rmse = rms(out.series);
  return out;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(v.size());
}

/// Population standard deviation, sqrt(1/N sum (e - mean)^2).
inline double sd(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mu = mean(v);
  double s = 0.0;
  for (double e : v) s += (e - mu) * (e - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

/// est' = scale * rotation * est + translation, applied to whole poses.
struct Similarity {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Pose apply(const Pose& p) const { return Pose(rotation * p.rotation(), scale * (rotation * p.translation()) + translation); }
};

struct AlignedPairs {
  std::vector<PosePair> pairs;
  Similarity transform;
};

/// Closed-form least-squares alignment of estimated positions onto ground truth.
inline AlignedPairs align_umeyama(std::span<const PosePair> pairs, AlignmentMode mode) {
  AlignedPairs out;
  out.pairs.assign(pairs.begin(), pairs.end());
  if (mode == AlignmentMode::None) return out;
  const std::size_t n = pairs.size();
  if (n < 3) throw Error(ErrorCode::DegenerateAlignment, "alignment needs at least 3 poses");
  Vec3 mu_src = Vec3::Zero();
  Vec3 mu_dst = Vec3::Zero();
  for (const auto& p : pairs) {
    mu_src += p.est.translation();
    mu_dst += p.gt.translation();
  }
  mu_src /= static_cast<double>(n);
  mu_dst /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero();
  Mat3 src_scatter = Mat3::Zero();
  double var_src = 0.0;
  for (const auto& p : pairs) {
    const Vec3 s = p.est.translation() - mu_src;
    const Vec3 d = p.gt.translation() - mu_dst;
    cov += d * s.transpose();
    src_scatter += s * s.transpose();
    var_src += s.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_src /= static_cast<double>(n);
  const Eigen::JacobiSVD<Mat3> scatter_svd(src_scatter);
  const auto sv = scatter_svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw Error(ErrorCode::DegenerateAlignment, "estimated positions are collinear");
  }
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 s = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * s * svd.matrixV().transpose();
  double scale = 1.0;
  if (mode == AlignmentMode::Sim3) {
    scale = (svd.singularValues().asDiagonal() * s).trace() / var_src;
  }
  out.transform.rotation = Rotation::from_matrix(r);
  out.transform.scale = scale;
  out.transform.translation = mu_dst - scale * (r * mu_src);
  for (auto& p : out.pairs) p.est = out.transform.apply(p.est);
  return out;
}

struct MetricsOptions {
  double max_dt = 0.01;
  ErrorVariant variant = ErrorVariant::Se3;
  AlignmentMode alignment = AlignmentMode::None;
  int delta = 1;
};

struct MetricsReport {
  double ate_rmse = 0.0;
  double rpe_rmse = 0.0;
  double sd = 0.0;
  double mean = 0.0;
  std::vector<double> ate_series;
  std::vector<double> rpe_series;
  std::vector<double> timestamps;
  std::size_t n = 0;
  int delta = 1;
  bool rpe_available = false;
  MetricsOptions options;
  Similarity alignment;
};

inline MetricsReport evaluate(const Trajectory& gt, const Trajectory& est, const MetricsOptions& opts = {}) {
  const auto raw = associate(gt, est, opts.max_dt);
  const auto aligned = align_umeyama(raw, opts.alignment);
  MetricsReport rep;
  rep.options = opts;
  rep.alignment = aligned.transform;
  rep.n = aligned.pairs.size();
  rep.delta = opts.delta;
  for (const auto& p : aligned.pairs) rep.timestamps.push_back(p.timestamp);
  auto a = ate(aligned.pairs, opts.variant);
  rep.ate_rmse = a.rmse;
  rep.ate_series = std::move(a.series);
  rep.mean = mean(rep.ate_series);
  rep.sd = sd(rep.ate_series);
  if (static_cast<std::size_t>(opts.delta) < aligned.pairs.size()) {
    auto r = rpe(aligned.pairs, opts.delta, opts.variant);
    rep.rpe_rmse = r.rmse;
    rep.rpe_series = std::move(r.series);
    rep.rpe_available = true;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// File formats

/// TUM: "timestamp tx ty tz qx qy qz qw", whitespace separated, '#' comments.
inline Trajectory read_tum(std::istream& in, const std::string& name = "tum trajectory") {
  Trajectory out;
  CsvReader reader(in, name, ' ');
  std::vector<std::string_view> raw;
  std::vector<std::string_view> fields;
  while (reader.next(raw)) {
    fields.clear();
    for (auto f : raw) {
      if (!f.empty()) fields.push_back(f);
    }
    if (fields.size() != 8) reader.fail("expected 8 fields");
    double v[8];
    for (std::size_t i = 0; i < 8; ++i) v[i] = reader.to_double(fields[i]);
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (std::abs(q.norm() - 1.0) > 1e-3) reader.fail("quaternion is not unit length");
    out.push_back({v[0], Pose(Rotation(q), Vec3(v[1], v[2], v[3]))});
  }
  validate_trajectory(out, name);
  return out;
}

inline std::string format_tum_line(const TimedPose& p) {
  const auto& q = p.pose.rotation().quaternion();
  const Vec3& t = p.pose.translation();
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.9f %.9g %.9g %.9g %.9g %.9g %.9g %.9g", p.timestamp, t.x(), t.y(), t.z(), q.x(),
                q.y(), q.z(), q.w());
  return buf;
}

inline void write_tum(std::ostream& out, const Trajectory& traj) {
  for (const auto& p : traj) out << format_tum_line(p) << '\n';
}

/// EuRoC ground truth: timestamp_ns, p_xyz, q_wxyz, then optional velocity and bias columns.
inline Trajectory parse_euroc_groundtruth(std::istream& in, const std::string& name = "ground truth csv") {
  Trajectory out;
  CsvReader reader(in, name);
  std::vector<std::string_view> fields;
  std::int64_t last_ns = 0;
  while (reader.next(fields)) {
    if (fields.size() < 8) reader.fail("expected at least 8 columns");
    const std::int64_t ns = reader.to_int64(fields[0]);
    if (!out.empty() && ns <= last_ns) {
      throw Error(ErrorCode::NonMonotoneTimestamps, name + " line " + std::to_string(reader.line_number()));
    }
    last_ns = ns;
    double v[7];
    for (std::size_t i = 0; i < 7; ++i) v[i] = reader.to_double(fields[i + 1]);
    const Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
    if (std::abs(q.norm() - 1.0) > 1e-3) reader.fail("quaternion is not unit length");
    out.push_back({ns_to_seconds(ns), Pose(Rotation(q), Vec3(v[0], v[1], v[2]))});
  }
  return out;
}

/// Full ground-truth state row as written by the synthetic generator.
struct GroundTruthState {
  std::int64_t timestamp_ns = 0;
  Pose pose;
  Vec3 velocity = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
};

inline void write_euroc_groundtruth(std::ostream& out, std::span<const GroundTruthState> states) {
  out << "#timestamp, p_RS_R_x [m], p_RS_R_y [m], p_RS_R_z [m], q_RS_w [], q_RS_x [], q_RS_y [], q_RS_z [], "
         "v_RS_R_x [m s^-1], v_RS_R_y [m s^-1], v_RS_R_z [m s^-1], b_w_RS_S_x [rad s^-1], b_w_RS_S_y [rad s^-1], "
         "b_w_RS_S_z [rad s^-1], b_a_RS_S_x [m s^-2], b_a_RS_S_y [m s^-2], b_a_RS_S_z [m s^-2]\n";
  for (const auto& s : states) {
    const auto& q = s.pose.rotation().quaternion();
    const Vec3& p = s.pose.translation();
    out << s.timestamp_ns;
    for (double v : {p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z()}) out << ',' << format_double(v);
    for (const Vec3* vec : {&s.velocity, &s.gyro_bias, &s.accel_bias}) {
      for (int i = 0; i < 3; ++i) out << ',' << format_double((*vec)[i]);
    }
    out << '\n';
  }
}

/// Per-pose series as CSV: index,timestamp,ate[,rpe].
inline void write_series_csv(std::ostream& out, const MetricsReport& rep) {
  out << "index,timestamp,ate,rpe\n";
  for (std::size_t i = 0; i < rep.ate_series.size(); ++i) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.17g,", i, rep.timestamps[i], rep.ate_series[i]);
    out << buf;
    if (i < rep.rpe_series.size()) out << format_double(rep.rpe_series[i]);
    out << '\n';
  }
}

}  // namespace hsvio
