#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "hsvio/error.hpp"
#include "hsvio/geometry/lie.hpp"
#include "hsvio/io/csv.hpp"

namespace hsvio {

struct ImuSample {
  std::int64_t timestamp_ns = 0;
  double t = 0.0;                 // seconds
  Vec3 gyro = Vec3::Zero();       // rad/s, body frame
  Vec3 accel = Vec3::Zero();      // m/s^2, body frame, specific force

  static ImuSample at(std::int64_t ns, const Vec3& gyro, const Vec3& accel) {
    return {ns, ns_to_seconds(ns), gyro, accel};
  }
};

/// Dead-reckoning state. Orientation is body-to-world.
struct ImuState {
  Rotation orientation;
  Vec3 velocity = Vec3::Zero();
  Vec3 position = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  Pose pose() const { return Pose(orientation, position); }
};

/// Body-frame relative motion between two instants.
struct ImuPrediction {
  Pose relative;
  double translation_norm = 0.0;
  int sample_count = 0;
  bool valid = false;  // false: the interval had no covering samples (EmptyInterval)
};

struct ImuIntegrationResult {
  ImuState state;
  ImuPrediction prediction;
};

inline constexpr double kDefaultImuPeriod = 1.0 / 200.0;

namespace detail {

inline ImuSample lerp_sample(const ImuSample& a, const ImuSample& b, double t) {
  const double s = (b.t > a.t) ? (t - a.t) / (b.t - a.t) : 0.0;
  ImuSample out;
  out.t = t;
  out.timestamp_ns = a.timestamp_ns + static_cast<std::int64_t>(std::llround(s * static_cast<double>(b.timestamp_ns - a.timestamp_ns)));
  out.gyro = a.gyro + s * (b.gyro - a.gyro);
  out.accel = a.accel + s * (b.accel - a.accel);
  return out;
}

}  // namespace detail

/**
 * Midpoint dead reckoning over [t0, t1]. Samples must be time ordered; the
 * boundary samples are linearly interpolated. When no samples bracket the
 * interval the state is returned unchanged with an invalid (identity)
 * prediction.
 */
inline ImuIntegrationResult integrate(const ImuState& state, std::span<const ImuSample> samples, double t0,
                                      double t1, double nominal_period = kDefaultImuPeriod) {
  ImuIntegrationResult result{state, {}};
  if (!(t1 > t0) || samples.size() < 2 || samples.front().t > t0 || samples.back().t < t1) {
    return result;
  }
  // Last sample at or before t0, first sample at or after t1.
  auto lo = std::upper_bound(samples.begin(), samples.end(), t0,
                             [](double t, const ImuSample& s) { return t < s.t; });
  --lo;
  auto hi = std::lower_bound(samples.begin(), samples.end(), t1,
                             [](const ImuSample& s, double t) { return s.t < t; });
  std::vector<ImuSample> steps;
  steps.reserve(static_cast<std::size_t>(hi - lo) + 2);
  for (auto it = lo; it != hi; ++it) {
    const auto next = it + 1;
    if (next->t - it->t > 3.0 * nominal_period) {
      throw Error(ErrorCode::GapTooLarge, "IMU gap of " + std::to_string(next->t - it->t) + " s");
    }
  }
  steps.push_back(detail::lerp_sample(*lo, *(lo + 1), t0));
  for (auto it = lo + 1; it < hi; ++it) {
    if (it->t > t0) steps.push_back(*it);
  }
  steps.push_back(detail::lerp_sample(*(hi - 1), *hi, t1));

  ImuState s = state;
  for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
    const ImuSample& a = steps[k];
    const ImuSample& b = steps[k + 1];
    const double dt = b.t - a.t;
    if (dt <= 0.0) continue;
    const Vec3 omega = 0.5 * (a.gyro + b.gyro) - s.gyro_bias;
    const Rotation r_next = s.orientation * Rotation::exp(omega * dt);
    const Vec3 acc_a = s.orientation * (a.accel - s.accel_bias) + s.gravity;
    const Vec3 acc_b = r_next * (b.accel - s.accel_bias) + s.gravity;
    const Vec3 acc = 0.5 * (acc_a + acc_b);
    s.position += s.velocity * dt + 0.5 * acc * dt * dt;
    s.velocity += acc * dt;
    s.orientation = r_next;
  }
  result.state = s;
  result.prediction.relative = state.pose().inverse() * s.pose();
  result.prediction.translation_norm = result.prediction.relative.translation().norm();
  result.prediction.sample_count = static_cast<int>(steps.size());
  result.prediction.valid = true;
  return result;
}

/**
 * T_hat = T_prev * (extrinsics^-1 * relative * extrinsics), where poses are
 * camera-to-world and extrinsics maps camera to body coordinates.
 */
inline Pose predict_pose(const Pose& previous, const ImuPrediction& prediction, const Pose& body_from_camera) {
  return previous * (body_from_camera.inverse() * prediction.relative * body_from_camera);
}

// ---------------------------------------------------------------------------
// EuRoC IMU CSV: timestamp_ns,w_x,w_y,w_z,a_x,a_y,a_z

inline std::vector<ImuSample> parse_imu_csv(std::istream& in, const std::string& name = "imu csv") {
  std::vector<ImuSample> out;
  CsvReader reader(in, name);
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    if (fields.size() < 7) reader.fail("expected 7 columns");
    ImuSample s;
    s.timestamp_ns = reader.to_int64(fields[0]);
    s.t = ns_to_seconds(s.timestamp_ns);
    for (int i = 0; i < 3; ++i) {
      s.gyro[i] = reader.to_double(fields[static_cast<std::size_t>(1 + i)]);
      s.accel[i] = reader.to_double(fields[static_cast<std::size_t>(4 + i)]);
    }
    if (!out.empty() && s.timestamp_ns <= out.back().timestamp_ns) {
      throw Error(ErrorCode::NonMonotoneTimestamps, name + " line " + std::to_string(reader.line_number()));
    }
    out.push_back(s);
  }
  return out;
}

inline void write_imu_csv(std::ostream& out, std::span<const ImuSample> samples) {
  out << "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],"
         "a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]\n";
  for (const auto& s : samples) {
    out << s.timestamp_ns;
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.gyro[i]);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.accel[i]);
    out << '\n';
  }
}

}  // namespace hsvio
