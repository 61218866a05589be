#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hsvio/dataset.hpp"
#include "hsvio/error.hpp"
#include "hsvio/imu.hpp"
#include "hsvio/metrics.hpp"
#include "hsvio/tracking/tracker.hpp"
#include "hsvio/tracking/types.hpp"

namespace hsvio {

struct PipelineResult {
  Trajectory trajectory;  // body poses in the IMU world frame
  TrackStats stats;
  WorldMap map;
  bool truncated = false;
  std::optional<ErrorCode> failure;
  std::string message;
};

/// Gravity-aligned orientation (zero yaw) from a body-frame specific force.
inline Rotation orientation_from_accel(const Vec3& accel, const Vec3& gravity) {
  if (accel.norm() < 1e-9) return Rotation();
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(accel.normalized(), -gravity.normalized());
  return Rotation(q);
}

namespace detail {

class PipelineRunner {
 public:
  PipelineRunner(const SequenceSource& src, const TrackerConfig& cfg)
      : src_(src), cfg_(cfg), k_(src.camera), e_(src.body_from_camera) {
    period_ = src.metadata.imu_rate > 0.0 ? 1.0 / src.metadata.imu_rate : kDefaultImuPeriod;
  }

  PipelineResult run() {
    if (src_.frames.empty()) throw Error(ErrorCode::EmptyDataset, "sequence has no camera frames");
    cfg_.validate();
    k_.validate();
    state_ = initial_state();
    for (std::size_t i = 0; i < src_.frames.size(); ++i) {
      const auto start = std::chrono::steady_clock::now();
      FrameStats fs;
      fs.frame_id = i;
      fs.timestamp = src_.frames[i].timestamp;
      bool stop = false;
      try {
        if (!initialized_) {
          step_uninitialized(i, fs);
        } else {
          step_tracking(i, fs);
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::RecoveryFailed) throw;
        fs.branch = Branch::Lost;
        result_.truncated = true;
        result_.failure = e.code();
        result_.message = e.what();
        result_.stats.lost_at_frame = i;
        stop = true;
      }
      fs.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      result_.stats.total_ms += fs.time_ms;
      result_.stats.frames.push_back(fs);
      if (stop) break;
    }
    if (!initialized_ && !result_.truncated) {
      result_.truncated = true;
      result_.failure = ErrorCode::InitFailed;
      result_.message = "map initialization never succeeded";
    }
    result_.map = std::move(map_);
    return std::move(result_);
  }

 private:
  ImuState initial_state() const {
    ImuState s;
    s.gravity = src_.metadata.gravity;
    const auto& md = src_.metadata;
    if (cfg_.use_initial_state && md.init_orientation && md.init_velocity) {
      s.orientation = *md.init_orientation;
      s.velocity = *md.init_velocity;
      s.gyro_bias = md.gyro_bias;
      s.accel_bias = md.accel_bias;
      return s;
    }
    // Assume the platform starts at rest: gravity from the first sample, zero yaw.
    const double t0 = src_.frames.front().timestamp;
    for (const auto& m : src_.imu) {
      if (m.t >= t0) {
        s.orientation = orientation_from_accel(m.accel, s.gravity);
        break;
      }
    }
    return s;
  }

  // Integrates the IMU state from the previous frame time; nullopt when the IMU does not cover the interval.
  std::optional<ImuIntegrationResult> propagate(double t0, double t1) const {
    try {
      auto r = integrate(state_, src_.imu, t0, t1, period_);
      if (!r.prediction.valid) return std::nullopt;
      return r;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::GapTooLarge) throw;
      return std::nullopt;
    }
  }

  void emit(double t, const Pose& world_from_body) { result_.trajectory.push_back({t, world_from_body}); }

  Pose world_from_body(const Pose& map_from_camera) const { return world_from_map_ * map_from_camera * e_.inverse(); }

  GrayImage image(std::size_t i) const { return src_.frames[i].image; }

  void step_uninitialized(std::size_t i, FrameStats& fs) {
    fs.branch = Branch::Init;
    const double t = src_.frames[i].timestamp;
    if (i > 0) {
      const auto r = propagate(src_.frames[i - 1].timestamp, t);
      if (r) state_ = r->state;
    }
    emit(t, state_.pose());
    Frame f = make_frame(i, t, image(i), cfg_);
    if (cfg_.mode == TrackingMode::Full) {
      extract_features(f, cfg_);
      ++result_.stats.frame_extractions;
    }
    if (!first_) {
      start_init(std::move(f));
      return;
    }
    const auto gap = static_cast<int>(i - first_->id);
    if (gap < cfg_.init_frame_gap) return;
    if (!f.descriptors_available) {
      extract_features(f, cfg_);
      ++result_.stats.init_extractions;
    }
    const Pose w_c1 = first_state_.pose() * e_;
    const Pose w_c2 = state_.pose() * e_;
    const double baseline = (w_c2.translation() - w_c1.translation()).norm();
    try {
      auto init = initialize_map(*first_, f, k_, cfg_, baseline > 1e-6 ? std::optional<double>(baseline) : std::nullopt);
      map_ = std::move(init.map);
      world_from_map_ = w_c1;
      const auto kf2 = map_.keyframes().rbegin()->first;
      prev_ = map_.keyframe(kf2).frame;
      prev_.id = i;
      initialized_ = true;
      fs.matches = init.inliers;
      fs.keyframe = true;
      anchor_state(prev_, std::nullopt, t);
      result_.trajectory.back().pose = world_from_body(*prev_.pose);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InitFailed) throw;
      if (gap > 3 * cfg_.init_frame_gap) start_init(std::move(f));
    }
  }

  void start_init(Frame f) {
    if (!f.descriptors_available) {
      extract_features(f, cfg_);
      ++result_.stats.init_extractions;
    }
    first_ = std::move(f);
    first_state_ = state_;
  }

  // Resets the IMU position and orientation to the visual estimate and corrects the velocity.
  void anchor_state(const Frame& f, const std::optional<ImuIntegrationResult>& imu, double t) {
    const Pose wb = world_from_body(*f.pose);
    if (imu && last_time_) {
      const double dt = t - *last_time_;
      state_.velocity = imu->state.velocity + cfg_.velocity_gain * (wb.translation() - imu->state.position) / dt;
    } else if (last_time_ && t > *last_time_) {
      state_.velocity = (wb.translation() - state_.position) / (t - *last_time_);
    }
    state_.orientation = wb.rotation();
    state_.position = wb.translation();
    last_time_ = t;
  }

  void step_tracking(std::size_t i, FrameStats& fs) {
    const double t = src_.frames[i].timestamp;
    Frame cur = make_frame(i, t, image(i), cfg_);
    if (cfg_.mode == TrackingMode::Full) {
      extract_features(cur, cfg_);
      ++result_.stats.frame_extractions;
    }
    const auto imu = propagate(prev_.timestamp, t);
    ImuPrediction prediction;
    if (imu) {
      prediction = imu->prediction;
    } else {
      fs.constant_velocity = true;
      ++result_.stats.constant_velocity_frames;
      prediction.relative = e_ * last_camera_motion_ * e_.inverse();
      prediction.valid = true;
    }

    bool recovered = false;
    try {
      const auto tracked = track_frame(prev_, cur, map_, prediction, e_, k_, cfg_);
      cur.pose = tracked.world_from_camera;
      for (const auto& m : tracked.matches) cur.tracks[*m.map_point] = m.current;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TrackingLost) throw;
      // A failed attempt still paid for the extraction.
      const bool had_descriptors = cur.descriptors_available;
      const auto count_extraction = [&] {
        if (!had_descriptors && cur.descriptors_available) ++result_.stats.recovery_extractions;
      };
      RecoveryResult rec;
      try {
        rec = recover(cur, map_, k_, cfg_);
      } catch (const Error&) {
        count_extraction();
        throw;
      }
      count_extraction();
      ++result_.stats.recoveries;
      cur.pose = rec.world_from_camera;
      fill_tracks(cur);
      recovered = true;
    }

    LocalMatches local = track_local_map(prev_, cur, map_, k_, cfg_);
    fs.matches = static_cast<int>(local.size());
    fs.branch = recovered ? Branch::Recovery : (cur.descriptors_available ? Branch::Descriptor : Branch::Flow);
    const Pose previous_pose = *prev_.pose;
    last_camera_motion_ = previous_pose.inverse() * *cur.pose;

    anchor_state(cur, recovered ? std::nullopt : imu, t);
    emit(t, world_from_body(*cur.pose));

    if (keyframe_decision(cur, previous_pose, local, cfg_)) {
      const auto promo = promote_keyframe(cur, map_, k_, cfg_);
      if (promo.extracted) ++result_.stats.keyframe_extractions;
      ++result_.stats.keyframes;
      fs.keyframe = true;
      // Tracks now include the freshly triangulated points.
      cur.tracks = map_.keyframe(promo.keyframe_id).frame.tracks;
    }
    prev_ = std::move(cur);
  }

  // Map-point positions in a recovered frame, from patch alignment at the recovered pose.
  void fill_tracks(Frame& cur) const {
    std::vector<PatchResidual> patches;
    std::vector<Vec3> points;
    collect_map_patches(map_, patches, points);
    FusionOptions fo = fusion_options(cfg_);
    fo.refine_pose = false;
    fo.min_points = 0;
    const auto a = fusion_feature_matching(patches, points, cur.pyramid, cur.pose->inverse(), k_, fo);
    for (const auto& c : a.correspondences) cur.tracks[c.map_point_id] = c.position;
  }

  const SequenceSource& src_;
  TrackerConfig cfg_;
  CameraIntrinsics k_;
  Pose e_;
  double period_ = kDefaultImuPeriod;

  ImuState state_;
  std::optional<double> last_time_;
  std::optional<Frame> first_;
  ImuState first_state_;
  bool initialized_ = false;
  WorldMap map_;
  Pose world_from_map_;
  Frame prev_;
  Pose last_camera_motion_;
  PipelineResult result_;
};

}  // namespace detail

/**
 * Runs the front-end over a whole sequence. Initialization failures are
 * retried on later frames; an unrecoverable tracking loss truncates the
 * trajectory at the failing frame.
 */
inline PipelineResult run_pipeline(const SequenceSource& source, const TrackerConfig& cfg) {
  return detail::PipelineRunner(source, cfg).run();
}

/// One row per processed frame: frame_id,time_ms,branch,keyframe,matches.
inline void write_frame_stats_csv(std::ostream& out, const TrackStats& stats) {
  out << "frame_id,time_ms,branch,keyframe,matches\n";
  for (const auto& f : stats.frames) {
    out << f.frame_id << ',' << format_double(f.time_ms) << ',' << to_string(f.branch) << ','
        << (f.keyframe ? 1 : 0) << ',' << f.matches << '\n';
  }
}

}  // namespace hsvio
