#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "hsvio/direct_align.hpp"
#include "hsvio/error.hpp"
#include "hsvio/geometry/camera.hpp"
#include "hsvio/geometry/epipolar.hpp"
#include "hsvio/imaging/features.hpp"
#include "hsvio/imaging/optical_flow.hpp"
#include "hsvio/imu.hpp"
#include "hsvio/tracking/pose_solver.hpp"
#include "hsvio/tracking/types.hpp"

namespace hsvio {

inline Frame make_frame(std::uint64_t id, double timestamp, GrayImage image, const TrackerConfig& cfg) {
  Frame f;
  f.id = id;
  f.timestamp = timestamp;
  f.pyramid = build_pyramid(image, cfg.pyramid_levels);
  f.image = std::move(image);
  return f;
}

/// FAST corners plus BRIEF descriptors for every retained corner.
inline void extract_features(Frame& f, const TrackerConfig& cfg) {
  FastOptions fo;
  fo.border = kBriefMargin + 1;
  f.corners = detect_fast(f.image, cfg.fast_threshold, static_cast<std::size_t>(cfg.max_features), fo);
  f.descriptors = describe_brief(f.image, f.corners);
  f.descriptors_available = true;
}

inline ReprojectionOptions reprojection_options(const TrackerConfig& cfg) {
  ReprojectionOptions o;
  o.max_iterations = cfg.gn_max_iterations;
  o.min_update = cfg.gn_min_update;
  o.huber_delta = cfg.reprojection_huber;
  return o;
}

inline FusionOptions fusion_options(const TrackerConfig& cfg) {
  FusionOptions o;
  o.levels = cfg.pyramid_levels;
  o.min_points = cfg.min_matches;
  o.huber_delta = cfg.photometric_huber;
  return o;
}

/// Two-pass robust pose solve: fit, drop residuals above the threshold, refit.
struct RobustPose {
  Pose camera_from_world;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

inline RobustPose solve_pose_with_outlier_rejection(std::span<const Vec2> obs, std::span<const Vec3> pts,
                                                    const Pose& init_cw, const CameraIntrinsics& k,
                                                    const TrackerConfig& cfg) {
  RobustPose out;
  out.camera_from_world = init_cw;
  out.inliers.assign(obs.size(), false);
  if (obs.size() < 3) return out;
  const auto opts = reprojection_options(cfg);
  auto first = solve_pose_reprojection(obs, pts, init_cw, k, opts);
  std::vector<Vec2> o2;
  std::vector<Vec3> p2;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (first.residuals[i] <= cfg.reprojection_threshold) {
      o2.push_back(obs[i]);
      p2.push_back(pts[i]);
      idx.push_back(i);
    }
  }
  out.camera_from_world = first.camera_from_world;
  if (o2.size() < 3) return out;
  const auto second = solve_pose_reprojection(o2, p2, first.camera_from_world, k, opts);
  out.camera_from_world = second.camera_from_world;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (second.residuals[j] <= cfg.reprojection_threshold) {
      out.inliers[idx[j]] = true;
      ++out.inlier_count;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Map initialization

struct InitResult {
  WorldMap map;
  Pose world_from_camera2;  // camera 1 is the map origin
  int matches = 0;
  int inliers = 0;
  double reprojection_rms = 0.0;
};

/**
 * Descriptor matching, LK refinement of the second-view positions, RANSAC
 * fundamental matrix, essential decomposition, triangulation. The baseline
 * norm is `baseline` when given (IMU), else 1.
 */
inline InitResult initialize_map(const Frame& f1, const Frame& f2, const CameraIntrinsics& k, const TrackerConfig& cfg,
                                 std::optional<double> baseline = std::nullopt) {
  if (!f1.descriptors_available || !f2.descriptors_available) {
    throw Error(ErrorCode::InitFailed, "initialization needs descriptors in both frames");
  }
  const auto fail = [](const std::string& why) { throw Error(ErrorCode::InitFailed, why); };
  const MatchSet matches = match_descriptors(f1.descriptors, f2.descriptors, cfg.max_descriptor_distance);
  if (static_cast<int>(matches.size()) < std::max(8, cfg.min_matches)) fail("too few descriptor matches");

  std::vector<Vec2> p1;
  std::vector<Vec2> seeds;
  for (const auto& m : matches) {
    p1.push_back(f1.corners[static_cast<std::size_t>(m.query)].position);
    seeds.push_back(f2.corners[static_cast<std::size_t>(m.train)].position);
  }
  const auto flow = lk_flow(f1.pyramid, f2.pyramid, p1, seeds);
  std::vector<PixelPair> pairs;
  std::vector<std::size_t> match_index;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (!flow[i].converged || (flow[i].position - seeds[i]).norm() > 2.0) continue;
    if (!patch_fits(f2.pyramid.level(0), flow[i].position)) continue;
    pairs.push_back({p1[i], flow[i].position});
    match_index.push_back(i);
  }
  if (static_cast<int>(pairs.size()) < std::max(8, cfg.min_matches)) fail("too few refined matches");

  RelativeMotion motion;
  FundamentalEstimate fe;
  try {
    RansacOptions ro;
    ro.seed = static_cast<std::uint32_t>(cfg.seed);
    fe = estimate_fundamental(pairs, ro);
    std::vector<PixelPair> inl;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (fe.inliers[i]) inl.push_back(pairs[i]);
    }
    motion = decompose_essential(essential_from_fundamental(fe.fundamental, k), inl, k);
  } catch (const Error& e) {
    fail(std::string("two-view geometry failed: ") + e.what());
  }
  const double scale = baseline && *baseline > 0.0 ? *baseline : 1.0;
  const Pose cam2_from_cam1(motion.rotation, motion.translation * scale);

  InitResult out;
  out.matches = static_cast<int>(matches.size());
  Frame k1 = f1;
  Frame k2 = f2;
  k1.pose = Pose::identity();
  k2.pose = cam2_from_cam1.inverse();
  k1.tracks.clear();
  k2.tracks.clear();
  const auto id1 = out.map.add_keyframe(std::move(k1));
  const auto id2 = out.map.add_keyframe(std::move(k2));
  TriangulationOptions to;
  to.min_parallax_deg = cfg.min_parallax_deg;
  double sq = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!fe.inliers[i]) continue;
    Vec3 x;
    try {
      x = triangulate(pairs[i].first, pairs[i].second, Pose::identity(), cam2_from_cam1, k, to);
    } catch (const Error&) {
      continue;
    }
    const Vec3 c2 = cam2_from_cam1 * x;
    if (x.z() <= kMinDepth || c2.z() <= kMinDepth) continue;
    const double e1 = (project_camera_point(k, x) - pairs[i].first).norm();
    const double e2 = (project_camera_point(k, c2) - pairs[i].second).norm();
    if (e1 > cfg.reprojection_threshold || e2 > cfg.reprojection_threshold) continue;
    const auto& m = matches[match_index[i]];
    const auto pid = out.map.add_point(x, id2, static_cast<std::size_t>(m.train), pairs[i].second);
    out.map.add_observation(id1, pid, static_cast<std::size_t>(m.query));
    out.map.keyframe(id2).frame.tracks[pid] = pairs[i].second;
    sq += e1 * e1 + e2 * e2;
    ++out.inliers;
  }
  if (out.inliers < cfg.min_matches) fail("only " + std::to_string(out.inliers) + " triangulated points");
  out.reprojection_rms = std::sqrt(sq / (2.0 * out.inliers));
  out.world_from_camera2 = cam2_from_cam1.inverse();
  return out;
}

// ---------------------------------------------------------------------------
// Current-frame tracking

struct FrameTracking {
  Pose world_from_camera;
  Pose predicted_world_from_camera;
  LocalMatches matches;  // inlier 2D-3D correspondences
  AlignmentResult alignment;
  int inliers = 0;
};

/// Gathers every map point's reference patch and position (map order).
inline void collect_map_patches(const WorldMap& map, std::vector<PatchResidual>& patches, std::vector<Vec3>& points) {
  patches.clear();
  points.clear();
  for (const auto& [id, p] : map.points()) {
    patches.push_back(p.patch);
    points.push_back(p.position);
  }
}

/**
 * IMU-predicted pose, fusion feature matching against the map points'
 * reference patches, then a robust reprojection solve on the refined
 * correspondences.
 */
inline FrameTracking track_frame(const Frame& prev, const Frame& cur, const WorldMap& map, const ImuPrediction& imu,
                                 const Pose& body_from_camera, const CameraIntrinsics& k, const TrackerConfig& cfg) {
  if (!prev.pose) throw Error(ErrorCode::ConfigInvalid, "previous frame has no pose");
  FrameTracking out;
  out.predicted_world_from_camera = predict_pose(*prev.pose, imu, body_from_camera);
  std::vector<PatchResidual> patches;
  std::vector<Vec3> points;
  collect_map_patches(map, patches, points);
  try {
    out.alignment = fusion_feature_matching(patches, points, cur.pyramid, out.predicted_world_from_camera.inverse(), k,
                                            fusion_options(cfg));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::TooFewPoints) throw Error(ErrorCode::TrackingLost, e.what());
    throw;
  }
  const auto& corr = out.alignment.correspondences;
  std::vector<Vec2> obs;
  std::vector<Vec3> pts;
  for (const auto& c : corr) {
    obs.push_back(c.position);
    pts.push_back(map.point(c.map_point_id).position);
  }
  if (static_cast<int>(obs.size()) < cfg.min_matches) {
    throw Error(ErrorCode::TrackingLost, std::to_string(obs.size()) + " converged correspondences");
  }
  const auto pose = solve_pose_with_outlier_rejection(obs, pts, out.alignment.camera_from_world, k, cfg);
  out.inliers = pose.inlier_count;
  if (out.inliers < cfg.min_matches) {
    throw Error(ErrorCode::TrackingLost, std::to_string(out.inliers) + " reprojection inliers");
  }
  out.world_from_camera = pose.camera_from_world.inverse();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (!pose.inliers[i]) continue;
    TrackedMatch m;
    m.map_point = corr[i].map_point_id;
    const auto it = prev.tracks.find(corr[i].map_point_id);
    m.previous = it != prev.tracks.end() ? it->second : corr[i].initial;
    m.current = corr[i].position;
    out.matches.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local-map tracking

/// Distance of `second` from the epipolar line of `first` given the pose of view 2 w.r.t. view 1.
inline double pose_epipolar_distance(const Pose& cam2_from_cam1, const CameraIntrinsics& k, const Vec2& first,
                                     const Vec2& second) {
  const Mat3 r = cam2_from_cam1.rotation().matrix();
  const Vec3 t = cam2_from_cam1.translation();
  const Mat3 kinv = k.inverse_matrix();
  if (t.norm() < 1e-9) {
    // No baseline: compare against the rotation-only transfer.
    const Vec3 x = k.matrix() * r * kinv * Vec3(first.x(), first.y(), 1.0);
    return (x.head<2>() / x.z() - second).norm();
  }
  const Mat3 f = kinv.transpose() * skew(t) * r * kinv;
  return epipolar_line_distance(f, {first, second});
}

/**
 * Without descriptors the previous frame's tracked positions are followed by
 * pyramidal LK (seeded with this frame's fused positions). With descriptors
 * the frame is matched against the latest keyframe and the matches are gated
 * by the pose-implied epipolar geometry.
 */
inline LocalMatches track_local_map(const Frame& prev, const Frame& cur, const WorldMap& map,
                                    const CameraIntrinsics& k, const TrackerConfig& cfg) {
  LocalMatches out;
  if (!cur.pose) throw Error(ErrorCode::ConfigInvalid, "current frame has no pose");
  if (!cur.descriptors_available) {
    std::vector<std::uint64_t> ids;
    std::vector<Vec2> from;
    std::vector<Vec2> seeds;
    for (const auto& [id, px] : prev.tracks) {
      ids.push_back(id);
      from.push_back(px);
      const auto it = cur.tracks.find(id);
      seeds.push_back(it != cur.tracks.end() ? it->second : px);
    }
    LkOptions lo;
    const auto flow = lk_flow(prev.pyramid, cur.pyramid, from, seeds, lo);
    for (std::size_t i = 0; i < flow.size(); ++i) {
      if (!flow[i].converged) continue;
      out.push_back({ids[i], from[i], flow[i].position, -1});
    }
    return out;
  }
  if (map.keyframes().empty()) return out;
  const Keyframe& kf = map.keyframes().rbegin()->second;
  const MatchSet matches = match_descriptors(cur.descriptors, kf.frame.descriptors, cfg.max_descriptor_distance);
  const Pose cur_from_kf = cur.pose->inverse() * kf.pose();
  for (const auto& m : matches) {
    const Vec2& pk = kf.frame.corners[static_cast<std::size_t>(m.train)].position;
    const Vec2& pc = cur.corners[static_cast<std::size_t>(m.query)].position;
    if (pose_epipolar_distance(cur_from_kf, k, pk, pc) >= cfg.epipolar_threshold) continue;
    TrackedMatch tm;
    tm.map_point = kf.corner_points[static_cast<std::size_t>(m.train)];
    tm.current = pc;
    tm.current_corner = m.query;
    tm.previous = pc;
    // Parallax is measured frame to frame, so the previous frame's position is used when known.
    if (tm.map_point) {
      const auto it = prev.tracks.find(*tm.map_point);
      if (it != prev.tracks.end()) tm.previous = it->second;
    }
    out.push_back(tm);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Keyframe selection

struct KeyframeCriteria {
  double pose_change = 0.0;
  double parallax = 0.0;
  int count = 0;
  bool pose_triggered = false;
  bool parallax_triggered = false;
  bool count_triggered = false;

  bool any() const { return pose_triggered || parallax_triggered || count_triggered; }
};

inline KeyframeCriteria evaluate_keyframe_criteria(const Pose& current, const Pose& previous,
                                                   const LocalMatches& matches, const TrackerConfig& cfg) {
  KeyframeCriteria c;
  c.pose_change = pose_change_frobenius(current, previous);
  double sum = 0.0;
  for (const auto& m : matches) sum += (m.previous - m.current).norm();
  c.parallax = matches.empty() ? 0.0 : sum / static_cast<double>(matches.size());
  c.count = static_cast<int>(matches.size());
  c.pose_triggered = c.pose_change > cfg.frobenius_threshold;
  c.parallax_triggered = c.parallax > cfg.parallax_threshold;
  c.count_triggered = c.count < cfg.min_matches;
  return c;
}

/// True when the pose change, the mean parallax or the match shortage crosses its threshold.
inline bool keyframe_decision(const Frame& cur, const Pose& previous_pose, const LocalMatches& matches,
                              const TrackerConfig& cfg) {
  if (!cur.pose) throw Error(ErrorCode::ConfigInvalid, "current frame has no pose");
  return evaluate_keyframe_criteria(*cur.pose, previous_pose, matches, cfg).any();
}

struct PromotionResult {
  std::uint64_t keyframe_id = 0;
  bool extracted = false;
  int observations = 0;
  int new_points = 0;
};

/**
 * Extracts descriptors when missing, registers the tracked map points on the
 * nearest corners, triangulates new points from unmatched corners against
 * the previous keyframe and inserts the keyframe.
 */
inline PromotionResult promote_keyframe(Frame cur, WorldMap& map, const CameraIntrinsics& k, const TrackerConfig& cfg) {
  if (!cur.pose) throw Error(ErrorCode::ConfigInvalid, "keyframe candidate has no pose");
  PromotionResult out;
  if (!cur.descriptors_available) {
    extract_features(cur, cfg);
    out.extracted = true;
  }
  const std::optional<std::uint64_t> prev_id =
      map.keyframes().empty() ? std::nullopt : std::optional<std::uint64_t>(map.keyframes().rbegin()->first);
  const auto tracks = cur.tracks;
  out.keyframe_id = map.add_keyframe(std::move(cur));
  Keyframe& kf = map.keyframe(out.keyframe_id);

  std::vector<bool> taken(kf.frame.corners.size(), false);
  for (const auto& [pid, px] : tracks) {
    if (!map.has_point(pid)) continue;
    int best = -1;
    double best_d = 2.0;
    for (std::size_t c = 0; c < kf.frame.corners.size(); ++c) {
      if (taken[c]) continue;
      const double d = (kf.frame.corners[c].position - px).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    std::optional<std::size_t> corner;
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      corner = static_cast<std::size_t>(best);
    }
    map.add_observation(out.keyframe_id, pid, corner);
    ++out.observations;
  }
  if (!prev_id) return out;

  // New points: unmatched corners of both keyframes.
  const Keyframe& pk = map.keyframe(*prev_id);
  std::vector<std::size_t> cur_idx;
  std::vector<std::size_t> prev_idx;
  std::vector<Descriptor> cur_desc;
  std::vector<Descriptor> prev_desc;
  for (std::size_t c = 0; c < kf.frame.corners.size(); ++c) {
    if (!kf.corner_points[c]) {
      cur_idx.push_back(c);
      cur_desc.push_back(kf.frame.descriptors[c]);
    }
  }
  for (std::size_t c = 0; c < pk.frame.corners.size(); ++c) {
    if (!pk.corner_points[c]) {
      prev_idx.push_back(c);
      prev_desc.push_back(pk.frame.descriptors[c]);
    }
  }
  const MatchSet matches = match_descriptors(prev_desc, cur_desc, cfg.max_descriptor_distance);
  const Pose prev_cw = pk.pose().inverse();
  const Pose cur_cw = kf.pose().inverse();
  const Pose cur_from_prev = cur_cw * pk.pose();
  std::vector<Vec2> from;
  std::vector<Vec2> seeds;
  std::vector<const DescriptorMatch*> gated;
  for (const auto& m : matches) {
    const Vec2& a = pk.frame.corners[prev_idx[static_cast<std::size_t>(m.query)]].position;
    const Vec2& b = kf.frame.corners[cur_idx[static_cast<std::size_t>(m.train)]].position;
    if (pose_epipolar_distance(cur_from_prev, k, a, b) >= cfg.epipolar_threshold) continue;
    from.push_back(a);
    seeds.push_back(b);
    gated.push_back(&m);
  }
  const auto flow = lk_flow(pk.frame.pyramid, kf.frame.pyramid, from, seeds);
  TriangulationOptions to;
  to.min_parallax_deg = cfg.min_parallax_deg;
  const auto pk_id = *prev_id;
  for (std::size_t i = 0; i < gated.size(); ++i) {
    if (!flow[i].converged || (flow[i].position - seeds[i]).norm() > 2.0) continue;
    const Vec2 b = flow[i].position;
    if (!patch_fits(kf.frame.pyramid.level(0), b)) continue;
    Vec3 x;
    try {
      x = triangulate(from[i], b, prev_cw, cur_cw, k, to);
    } catch (const Error&) {
      continue;
    }
    const Vec3 c1 = prev_cw * x;
    const Vec3 c2 = cur_cw * x;
    if (c1.z() <= kMinDepth || c2.z() <= kMinDepth) continue;
    if ((project_camera_point(k, c1) - from[i]).norm() > cfg.reprojection_threshold) continue;
    if ((project_camera_point(k, c2) - b).norm() > cfg.reprojection_threshold) continue;
    const std::size_t cc = cur_idx[static_cast<std::size_t>(gated[i]->train)];
    const std::size_t pc = prev_idx[static_cast<std::size_t>(gated[i]->query)];
    const auto pid = map.add_point(x, out.keyframe_id, cc, b);
    map.add_observation(pk_id, pid, pc);
    map.keyframe(out.keyframe_id).frame.tracks[pid] = b;
    ++out.new_points;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recovery

/// Keyframe corners with map points as patches anchored at the corner pixel with the point's depth.
inline void keyframe_patches(const Keyframe& kf, const WorldMap& map, const CameraIntrinsics& k,
                             std::vector<PatchResidual>& patches, std::vector<Vec3>& points) {
  patches.clear();
  points.clear();
  const Pose cw = kf.pose().inverse();
  for (std::size_t c = 0; c < kf.corner_points.size(); ++c) {
    if (!kf.corner_points[c] || !map.has_point(*kf.corner_points[c])) continue;
    const Vec2& px = kf.frame.corners[c].position;
    const double depth = (cw * map.point(*kf.corner_points[c]).position).z();
    if (depth <= kMinDepth || !patch_fits(kf.frame.pyramid.level(0), px)) continue;
    patches.push_back(make_patch_residual(kf.frame.pyramid, px, c, *kf.corner_points[c]));
    points.push_back(kf.pose() * (k.unproject(px) * depth));
  }
}

/// Patches whose level-0 RMSE at the pose is at most `max_rmse`.
inline int photometric_inliers(const Pyramid& cur, std::span<const PatchResidual> patches, std::span<const Vec3> points,
                               const Pose& camera_from_world, const CameraIntrinsics& k, double max_rmse) {
  int n = 0;
  const FloatImage& img = cur.level(0);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Vec3 pc = camera_from_world * points[i];
    if (pc.z() <= kMinDepth || patches[i].levels.empty() || !patches[i].levels[0].valid) continue;
    const Vec2 q = project_camera_point(k, pc);
    if (!patch_fits(img, q)) continue;
    if (detail::patch_rmse(img, patches[i].levels[0], q) <= max_rmse) ++n;
  }
  return n;
}

struct RecoveryResult {
  Pose world_from_camera;
  std::uint64_t keyframe_id = 0;
  int stage = 0;
  int inliers = 0;
  bool extracted = false;
};

namespace detail {

struct PhotometricCandidate {
  Pose camera_from_world;
  double cost = std::numeric_limits<double>::infinity();
  int inliers = 0;
  bool ok = false;
};

inline PhotometricCandidate align_to_keyframe(const Frame& cur, const Keyframe& kf, const WorldMap& map,
                                              const Pose& seed_cw, const CameraIntrinsics& k,
                                              const TrackerConfig& cfg) {
  PhotometricCandidate out;
  out.camera_from_world = seed_cw;
  std::vector<PatchResidual> patches;
  std::vector<Vec3> points;
  keyframe_patches(kf, map, k, patches, points);
  if (static_cast<int>(patches.size()) < cfg.min_matches) return out;
  PhotometricOptions po;
  po.levels = cfg.pyramid_levels;
  po.huber_delta = cfg.photometric_huber;
  try {
    const auto r = refine_pose_photometric(cur.pyramid, patches, points, seed_cw, k, po);
    out.camera_from_world = r.camera_from_world;
    out.inliers = photometric_inliers(cur.pyramid, patches, points, r.camera_from_world, k, FusionOptions{}.max_patch_rmse);
    out.cost = r.active_points > 0 ? r.cost / r.active_points : out.cost;
    out.ok = out.inliers >= cfg.min_matches;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TooFewPoints && e.code() != ErrorCode::IllConditioned) throw;
  }
  return out;
}

}  // namespace detail

/**
 * Stage 1: descriptor matching against the most recent keyframes, robust
 * reprojection solve, then direct alignment to the best keyframe's image.
 * Stage 2: direct alignment seeded at every keyframe pose; the lowest-cost
 * solution passing the inlier gate wins.
 */
inline RecoveryResult recover(Frame& cur, const WorldMap& map, const CameraIntrinsics& k, const TrackerConfig& cfg) {
  RecoveryResult out;
  if (map.keyframes().empty()) throw Error(ErrorCode::RecoveryFailed, "no keyframes");
  if (!cur.descriptors_available) {
    extract_features(cur, cfg);
    out.extracted = true;
  }
  // Stage 1
  std::optional<std::uint64_t> best_kf;
  std::vector<Vec2> best_obs;
  std::vector<Vec3> best_pts;
  int seen = 0;
  for (auto it = map.keyframes().rbegin(); it != map.keyframes().rend() && seen < cfg.recovery_keyframes; ++it, ++seen) {
    const Keyframe& kf = it->second;
    const MatchSet m = match_descriptors(cur.descriptors, kf.frame.descriptors, cfg.max_descriptor_distance);
    std::vector<Vec2> obs;
    std::vector<Vec3> pts;
    for (const auto& mm : m) {
      const auto& pid = kf.corner_points[static_cast<std::size_t>(mm.train)];
      if (!pid || !map.has_point(*pid)) continue;
      obs.push_back(cur.corners[static_cast<std::size_t>(mm.query)].position);
      pts.push_back(map.point(*pid).position);
    }
    if (obs.size() > best_obs.size()) {
      best_kf = it->first;
      best_obs = std::move(obs);
      best_pts = std::move(pts);
    }
  }
  if (best_kf && static_cast<int>(best_obs.size()) >= cfg.min_matches) {
    const Keyframe& kf = map.keyframe(*best_kf);
    const auto pose = solve_pose_with_outlier_rejection(best_obs, best_pts, kf.pose().inverse(), k, cfg);
    if (pose.inlier_count >= cfg.min_matches) {
      out.stage = 1;
      out.keyframe_id = *best_kf;
      out.inliers = pose.inlier_count;
      out.world_from_camera = pose.camera_from_world.inverse();
      const auto direct = detail::align_to_keyframe(cur, kf, map, pose.camera_from_world, k, cfg);
      if (direct.ok) {
        out.world_from_camera = direct.camera_from_world.inverse();
        out.inliers = direct.inliers;
      }
      return out;
    }
  }
  // Stage 2
  detail::PhotometricCandidate best;
  for (const auto& [id, kf] : map.keyframes()) {
    const auto c = detail::align_to_keyframe(cur, kf, map, kf.pose().inverse(), k, cfg);
    if (c.ok && c.cost < best.cost) {
      best = c;
      out.keyframe_id = id;
    }
  }
  if (!best.ok) throw Error(ErrorCode::RecoveryFailed, "no keyframe aligns with the lost frame");
  out.stage = 2;
  out.inliers = best.inliers;
  out.world_from_camera = best.camera_from_world.inverse();
  return out;
}

}  // namespace hsvio
