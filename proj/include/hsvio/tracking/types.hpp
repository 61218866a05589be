#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hsvio/direct_align.hpp"
#include "hsvio/error.hpp"
#include "hsvio/geometry/lie.hpp"
#include "hsvio/imaging/features.hpp"
#include "hsvio/imaging/pyramid.hpp"
#include "hsvio/io/keyvalue.hpp"

namespace hsvio {

/// One camera image with its pyramid and (optionally) its features.
struct Frame {
  std::uint64_t id = 0;
  double timestamp = 0.0;
  GrayImage image;
  Pyramid pyramid;
  std::vector<Corner> corners;
  std::vector<Descriptor> descriptors;
  bool descriptors_available = false;
  std::map<std::uint64_t, Vec2> tracks;  // map point id -> level-0 pixel
  std::optional<Pose> pose;              // world-from-camera, set once tracked
};

struct Keyframe {
  std::uint64_t id = 0;
  Frame frame;
  std::vector<std::optional<std::uint64_t>> corner_points;  // map point observed by each corner
  std::set<std::uint64_t> observations;

  const Pose& pose() const { return *frame.pose; }
};

struct MapPoint {
  std::uint64_t id = 0;
  Vec3 position = Vec3::Zero();
  std::uint64_t reference_keyframe = 0;
  PatchResidual patch;  // sampled in the reference keyframe
  Descriptor descriptor;
  std::set<std::uint64_t> observers;  // keyframe ids
};

/// Map points and keyframes by id with cascading deletes.
class WorldMap {
 public:
  const std::map<std::uint64_t, MapPoint>& points() const { return points_; }
  const std::map<std::uint64_t, Keyframe>& keyframes() const { return keyframes_; }
  std::map<std::uint64_t, MapPoint>& points() { return points_; }
  std::map<std::uint64_t, Keyframe>& keyframes() { return keyframes_; }

  bool has_point(std::uint64_t id) const { return points_.count(id) != 0; }
  bool has_keyframe(std::uint64_t id) const { return keyframes_.count(id) != 0; }
  const MapPoint& point(std::uint64_t id) const { return points_.at(id); }
  const Keyframe& keyframe(std::uint64_t id) const { return keyframes_.at(id); }
  Keyframe& keyframe(std::uint64_t id) { return keyframes_.at(id); }

  std::uint64_t add_keyframe(Frame frame) {
    if (!frame.pose) throw Error(ErrorCode::ConfigInvalid, "keyframe needs a pose");
    if (!frame.descriptors_available) throw Error(ErrorCode::ConfigInvalid, "keyframe needs descriptors");
    Keyframe kf;
    kf.id = next_keyframe_id_++;
    kf.corner_points.assign(frame.corners.size(), std::nullopt);
    kf.frame = std::move(frame);
    const auto id = kf.id;
    keyframes_.emplace(id, std::move(kf));
    return id;
  }

  /// Adds a point observed by `corner` of its reference keyframe. The reference
  /// patch is sampled at `patch_px` (default: the corner position).
  std::uint64_t add_point(const Vec3& position, std::uint64_t reference_keyframe, std::size_t corner,
                          std::optional<Vec2> patch_px = std::nullopt) {
    Keyframe& kf = keyframes_.at(reference_keyframe);
    if (!position.allFinite()) throw Error(ErrorCode::ConfigInvalid, "map point position must be finite");
    MapPoint p;
    p.id = next_point_id_++;
    p.position = position;
    p.reference_keyframe = reference_keyframe;
    p.descriptor = kf.frame.descriptors.at(corner);
    p.patch = make_patch_residual(kf.frame.pyramid, patch_px.value_or(kf.frame.corners.at(corner).position), corner, p.id);
    const auto id = p.id;
    points_.emplace(id, std::move(p));
    add_observation(reference_keyframe, id, corner);
    return id;
  }

  void add_observation(std::uint64_t keyframe_id, std::uint64_t point_id, std::optional<std::size_t> corner) {
    Keyframe& kf = keyframes_.at(keyframe_id);
    MapPoint& p = points_.at(point_id);
    kf.observations.insert(point_id);
    p.observers.insert(keyframe_id);
    if (corner) kf.corner_points.at(*corner) = point_id;
  }

  void erase_point(std::uint64_t id) {
    const auto it = points_.find(id);
    if (it == points_.end()) return;
    for (std::uint64_t kf_id : it->second.observers) {
      Keyframe& kf = keyframes_.at(kf_id);
      kf.observations.erase(id);
      for (auto& c : kf.corner_points) {
        if (c == id) c.reset();
      }
    }
    points_.erase(it);
  }

  /// Removes the keyframe; points left without observers go with it and
  /// points referencing it move to their oldest remaining observer.
  void erase_keyframe(std::uint64_t id) {
    const auto it = keyframes_.find(id);
    if (it == keyframes_.end()) return;
    const std::set<std::uint64_t> observed = it->second.observations;
    keyframes_.erase(it);
    for (std::uint64_t pid : observed) {
      MapPoint& p = points_.at(pid);
      p.observers.erase(id);
      if (p.observers.empty()) {
        points_.erase(pid);
        continue;
      }
      if (p.reference_keyframe == id) p.reference_keyframe = *p.observers.begin();
    }
  }

  /// Referential integrity: every id mentioned anywhere resolves, both directions agree.
  bool validate(std::string* why = nullptr) const {
    const auto fail = [&](const std::string& msg) {
      if (why) *why = msg;
      return false;
    };
    for (const auto& [id, p] : points_) {
      if (p.id != id) return fail("point id mismatch");
      if (!p.position.allFinite()) return fail("point " + std::to_string(id) + " not finite");
      if (p.observers.empty()) return fail("point " + std::to_string(id) + " has no observer");
      if (!keyframes_.count(p.reference_keyframe)) return fail("point " + std::to_string(id) + " reference missing");
      if (!p.observers.count(p.reference_keyframe)) return fail("reference keyframe does not observe point");
      for (std::uint64_t kf : p.observers) {
        const auto k = keyframes_.find(kf);
        if (k == keyframes_.end()) return fail("observer keyframe missing");
        if (!k->second.observations.count(id)) return fail("observation not mirrored");
      }
    }
    for (const auto& [id, kf] : keyframes_) {
      if (kf.id != id) return fail("keyframe id mismatch");
      if (!kf.frame.descriptors_available || kf.frame.descriptors.size() != kf.frame.corners.size()) {
        return fail("keyframe " + std::to_string(id) + " lacks descriptors");
      }
      if (kf.corner_points.size() != kf.frame.corners.size()) return fail("corner table size mismatch");
      for (std::uint64_t pid : kf.observations) {
        const auto p = points_.find(pid);
        if (p == points_.end()) return fail("keyframe observes a missing point");
        if (!p->second.observers.count(id)) return fail("observer not mirrored");
      }
      for (const auto& c : kf.corner_points) {
        if (c && !kf.observations.count(*c)) return fail("corner points at an unobserved point");
      }
    }
    return true;
  }

  std::vector<std::uint64_t> keyframe_ids() const {
    std::vector<std::uint64_t> out;
    for (const auto& [id, kf] : keyframes_) out.push_back(id);
    return out;
  }

 private:
  std::map<std::uint64_t, MapPoint> points_;
  std::map<std::uint64_t, Keyframe> keyframes_;
  std::uint64_t next_point_id_ = 0;
  std::uint64_t next_keyframe_id_ = 0;
};

enum class TrackingMode { Hybrid, Full };

inline const char* to_string(TrackingMode m) { return m == TrackingMode::Hybrid ? "hybrid" : "full"; }

inline TrackingMode parse_tracking_mode(const std::string& s) {
  if (s == "hybrid") return TrackingMode::Hybrid;
  if (s == "full") return TrackingMode::Full;
  throw Error(ErrorCode::ConfigInvalid, "mode must be hybrid or full, got '" + s + "'");
}

struct TrackerConfig {
  double frobenius_threshold = 0.15;  // tau_T
  double parallax_threshold = 20.0;   // tau_p, px
  int min_matches = 30;               // N_min
  double reprojection_threshold = 2.0;  // px
  int max_descriptor_distance = 64;     // bits
  int pyramid_levels = 4;
  int fast_threshold = 20;
  int max_features = 300;
  int gn_max_iterations = 15;
  double gn_min_update = 1e-10;
  double reprojection_huber = 1.0;  // px
  double photometric_huber = 10.0;  // intensity
  TrackingMode mode = TrackingMode::Hybrid;
  std::uint64_t seed = 42;
  int recovery_keyframes = 5;
  double epipolar_threshold = 2.0;  // px
  int init_frame_gap = 10;
  bool use_initial_state = true;
  double velocity_gain = 0.2;
  double min_parallax_deg = 0.5;

  void validate() const {
    const auto bad = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
    if (!(frobenius_threshold > 0.0)) bad("frobenius_threshold must be > 0");
    if (!(parallax_threshold > 0.0)) bad("parallax_threshold must be > 0");
    if (min_matches <= 0) bad("min_matches must be > 0");
    if (!(reprojection_threshold > 0.0)) bad("reprojection_threshold must be > 0");
    if (max_descriptor_distance <= 0) bad("max_descriptor_distance must be > 0");
    if (pyramid_levels < 1) bad("pyramid_levels must be >= 1");
    if (fast_threshold <= 0) bad("fast_threshold must be > 0");
    if (max_features <= 0) bad("max_features must be > 0");
    if (gn_max_iterations <= 0 || !(gn_min_update > 0.0)) bad("Gauss-Newton settings must be > 0");
    if (!(reprojection_huber > 0.0) || !(photometric_huber > 0.0)) bad("Huber thresholds must be > 0");
    if (recovery_keyframes <= 0) bad("recovery_keyframes must be > 0");
    if (!(epipolar_threshold > 0.0)) bad("epipolar_threshold must be > 0");
    if (init_frame_gap <= 0) bad("init_frame_gap must be > 0");
    if (velocity_gain < 0.0 || velocity_gain > 1.0) bad("velocity_gain must be in [0, 1]");
    if (!(min_parallax_deg > 0.0)) bad("min_parallax_deg must be > 0");
  }

  KeyValueFile to_keyvalue() const {
    KeyValueFile kv;
    kv.set("frobenius_threshold", format_double(frobenius_threshold));
    kv.set("parallax_threshold", format_double(parallax_threshold));
    kv.set("min_matches", std::to_string(min_matches));
    kv.set("reprojection_threshold", format_double(reprojection_threshold));
    kv.set("max_descriptor_distance", std::to_string(max_descriptor_distance));
    kv.set("pyramid_levels", std::to_string(pyramid_levels));
    kv.set("fast_threshold", std::to_string(fast_threshold));
    kv.set("max_features", std::to_string(max_features));
    kv.set("gn_max_iterations", std::to_string(gn_max_iterations));
    kv.set("gn_min_update", format_double(gn_min_update));
    kv.set("reprojection_huber", format_double(reprojection_huber));
    kv.set("photometric_huber", format_double(photometric_huber));
    kv.set("mode", to_string(mode));
    kv.set("seed", std::to_string(seed));
    kv.set("recovery_keyframes", std::to_string(recovery_keyframes));
    kv.set("epipolar_threshold", format_double(epipolar_threshold));
    kv.set("init_frame_gap", std::to_string(init_frame_gap));
    kv.set("use_initial_state", use_initial_state ? "true" : "false");
    kv.set("velocity_gain", format_double(velocity_gain));
    kv.set("min_parallax_deg", format_double(min_parallax_deg));
    return kv;
  }

  /// Applies recognised keys; keys with a "run." prefix are ignored, anything else is an error.
  static TrackerConfig from_keyvalue(const KeyValueFile& kv) { return from_keyvalue(kv, TrackerConfig()); }

  static TrackerConfig from_keyvalue(const KeyValueFile& kv, TrackerConfig cfg) {
    for (const auto& [key, value] : kv.values()) {
      if (key.rfind("run.", 0) == 0) continue;
      if (key == "frobenius_threshold") cfg.frobenius_threshold = parse_double(value, key);
      else if (key == "parallax_threshold") cfg.parallax_threshold = parse_double(value, key);
      else if (key == "min_matches") cfg.min_matches = static_cast<int>(parse_int(value, key));
      else if (key == "reprojection_threshold") cfg.reprojection_threshold = parse_double(value, key);
      else if (key == "max_descriptor_distance") cfg.max_descriptor_distance = static_cast<int>(parse_int(value, key));
      else if (key == "pyramid_levels") cfg.pyramid_levels = static_cast<int>(parse_int(value, key));
      else if (key == "fast_threshold") cfg.fast_threshold = static_cast<int>(parse_int(value, key));
      else if (key == "max_features") cfg.max_features = static_cast<int>(parse_int(value, key));
      else if (key == "gn_max_iterations") cfg.gn_max_iterations = static_cast<int>(parse_int(value, key));
      else if (key == "gn_min_update") cfg.gn_min_update = parse_double(value, key);
      else if (key == "reprojection_huber") cfg.reprojection_huber = parse_double(value, key);
      else if (key == "photometric_huber") cfg.photometric_huber = parse_double(value, key);
      else if (key == "mode") cfg.mode = parse_tracking_mode(value);
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(value, key));
      else if (key == "recovery_keyframes") cfg.recovery_keyframes = static_cast<int>(parse_int(value, key));
      else if (key == "epipolar_threshold") cfg.epipolar_threshold = parse_double(value, key);
      else if (key == "init_frame_gap") cfg.init_frame_gap = static_cast<int>(parse_int(value, key));
      else if (key == "use_initial_state") cfg.use_initial_state = parse_bool(value, key);
      else if (key == "velocity_gain") cfg.velocity_gain = parse_double(value, key);
      else if (key == "min_parallax_deg") cfg.min_parallax_deg = parse_double(value, key);
      else throw Error(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
  }
};

/// A 2D-2D correspondence used for keyframe evaluation; map point id when known.
struct TrackedMatch {
  std::optional<std::uint64_t> map_point;
  Vec2 previous = Vec2::Zero();
  Vec2 current = Vec2::Zero();
  int current_corner = -1;
};

using LocalMatches = std::vector<TrackedMatch>;

enum class Branch { Init, Flow, Descriptor, Recovery, Lost };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::Init: return "init";
    case Branch::Flow: return "flow";
    case Branch::Descriptor: return "descriptor";
    case Branch::Recovery: return "recovery";
    case Branch::Lost: return "lost";
  }
  return "?";
}

struct FrameStats {
  std::uint64_t frame_id = 0;
  double timestamp = 0.0;
  double time_ms = 0.0;
  Branch branch = Branch::Init;
  bool keyframe = false;
  int matches = 0;
  bool constant_velocity = false;  // IMU did not cover the interval
};

struct TrackStats {
  std::vector<FrameStats> frames;
  int init_extractions = 0;
  int frame_extractions = 0;     // full mode: every frame
  int keyframe_extractions = 0;  // keyframes promoted without descriptors
  int recovery_extractions = 0;  // includes failed attempts
  int keyframes = 0;             // promoted after initialization
  int recoveries = 0;            // successful
  int constant_velocity_frames = 0;
  std::optional<std::uint64_t> lost_at_frame;
  double total_ms = 0.0;

  int total_extractions() const {
    return init_extractions + frame_extractions + keyframe_extractions + recovery_extractions;
  }
  double mean_ms() const { return frames.empty() ? 0.0 : total_ms / static_cast<double>(frames.size()); }
};

}  // namespace hsvio
