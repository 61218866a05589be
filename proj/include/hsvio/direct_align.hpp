#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "hsvio/error.hpp"
#include "hsvio/geometry/camera.hpp"
#include "hsvio/geometry/lie.hpp"
#include "hsvio/imaging/pyramid.hpp"

namespace hsvio {

inline constexpr int kPatchSize = 4;
inline constexpr int kPatchArea = kPatchSize * kPatchSize;
// Pixel-centre offsets of a 4x4 patch around a subpixel position.
inline constexpr std::array<double, kPatchSize> kPatchOffsets{-1.5, -0.5, 0.5, 1.5};
// A patch plus the one-pixel gradient stencil must fit inside the image.
inline constexpr double kPatchMargin = 1.5 + 1.0;

using Vec6Row = Eigen::Matrix<double, 1, 6>;

struct PatchLevel {
  std::array<float, kPatchArea> intensity{};
  std::array<float, kPatchArea> gx{};
  std::array<float, kPatchArea> gy{};
  bool valid = false;
};

/// Reference appearance of one map point, cached on every pyramid level.
struct PatchResidual {
  std::uint64_t feature_id = 0;
  std::uint64_t map_point_id = 0;
  Vec2 reference_px = Vec2::Zero();  // level-0 position in the reference image
  std::vector<PatchLevel> levels;
};

inline bool patch_fits(const FloatImage& img, const Vec2& p) {
  return p.x() - kPatchMargin >= 0.0 && p.y() - kPatchMargin >= 0.0 && p.x() + kPatchMargin <= img.width() - 1 &&
         p.y() + kPatchMargin <= img.height() - 1;
}

/// Samples the 4x4 patch (and gradients) around a level-0 position on every level.
inline PatchResidual make_patch_residual(const Pyramid& reference, const Vec2& px, std::uint64_t feature_id = 0,
                                         std::uint64_t map_point_id = 0) {
  if (reference.num_levels() == 0 || !patch_fits(reference.level(0), px)) {
    throw Error(ErrorCode::PatchOutOfBounds, "reference patch leaves the image");
  }
  PatchResidual out;
  out.feature_id = feature_id;
  out.map_point_id = map_point_id;
  out.reference_px = px;
  out.levels.resize(static_cast<std::size_t>(reference.num_levels()));
  for (int l = 0; l < reference.num_levels(); ++l) {
    const FloatImage& img = reference.level(l);
    const Vec2 q = Pyramid::to_level(px, l);
    PatchLevel& pl = out.levels[static_cast<std::size_t>(l)];
    if (!patch_fits(img, q)) continue;
    int k = 0;
    for (double dy : kPatchOffsets) {
      for (double dx : kPatchOffsets) {
        const double x = q.x() + dx;
        const double y = q.y() + dy;
        pl.intensity[static_cast<std::size_t>(k)] = static_cast<float>(sample_bilinear_unchecked(img, x, y));
        pl.gx[static_cast<std::size_t>(k)] = static_cast<float>(
            0.5 * (sample_bilinear_unchecked(img, x + 1.0, y) - sample_bilinear_unchecked(img, x - 1.0, y)));
        pl.gy[static_cast<std::size_t>(k)] = static_cast<float>(
            0.5 * (sample_bilinear_unchecked(img, x, y + 1.0) - sample_bilinear_unchecked(img, x, y - 1.0)));
        ++k;
      }
    }
    pl.valid = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-feature alignment

struct FusionOptions {
  int levels = 4;
  int max_iterations = 10;   // per level
  double epsilon = 0.01;     // level-0 px
  double max_step = 11.0;    // level-0 px; a larger single update counts as divergence
  double max_patch_rmse = 20.0;
  // A level "increases the cost" when its final patch RMSE exceeds ratio * start + 0.05.
  // Inverse-compositional fixed points sit slightly off the forward SSD minimum, hence the slack.
  double cost_increase_ratio = 1.1;
  double min_eigen = 1.0;    // structure-tensor minimum eigenvalue / patch area
  int min_points = 30;       // visible map points needed to attempt alignment
  bool refine_pose = true;   // run the photometric pose solve on the converged set
  double huber_delta = 10.0; // photometric pose solve
};

struct FeatureCorrespondence {
  std::uint64_t feature_id = 0;
  std::uint64_t map_point_id = 0;
  Vec2 initial = Vec2::Zero();   // IMU-predicted projection
  Vec2 position = Vec2::Zero();  // refined level-0 position
  double rmse = 0.0;
  bool converged = false;
};

struct AlignmentResult {
  std::vector<FeatureCorrespondence> correspondences;  // converged only
  Pose camera_from_world;
  std::vector<int> iterations_per_level;  // summed over features, index = level
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int visible = 0;
};

namespace detail {

struct PatchAlignOutcome {
  Vec2 position;
  double rmse = 0.0;
  bool converged = false;
};

inline double patch_rmse(const FloatImage& img, const PatchLevel& t, const Vec2& q) {
  double ssd = 0.0;
  int k = 0;
  for (double dy : kPatchOffsets) {
    for (double dx : kPatchOffsets) {
      const double r = sample_bilinear_unchecked(img, q.x() + dx, q.y() + dy) - t.intensity[static_cast<std::size_t>(k++)];
      ssd += r * r;
    }
  }
  return std::sqrt(ssd / kPatchArea);
}

inline bool patch_samples_fit(const FloatImage& img, const Vec2& q) {
  return q.x() - 1.5 >= 0.0 && q.y() - 1.5 >= 0.0 && q.x() + 1.5 <= img.width() - 1 &&
         q.y() + 1.5 <= img.height() - 1;
}

/**
 * Coarse-to-fine inverse-compositional translation alignment of one patch,
 * starting from a level-0 estimate. Out-of-bounds on a coarse level skips
 * that level; at level 0 it is a failure.
 */
inline PatchAlignOutcome align_patch(const Pyramid& cur, const PatchResidual& patch, const Vec2& start,
                                     const FusionOptions& opts, std::vector<int>* iterations) {
  PatchAlignOutcome out{start, 0.0, false};
  const int top = std::min({opts.levels, cur.num_levels(), static_cast<int>(patch.levels.size())}) - 1;
  Vec2 p0 = start;
  int worse_in_a_row = 0;
  for (int l = top; l >= 0; --l) {
    const PatchLevel& t = patch.levels[static_cast<std::size_t>(l)];
    const FloatImage& img = cur.level(l);
    const double scale = static_cast<double>(1 << l);
    if (!t.valid) {
      if (l == 0) return out;
      continue;
    }
    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    for (int k = 0; k < kPatchArea; ++k) {
      const double gx = t.gx[static_cast<std::size_t>(k)];
      const double gy = t.gy[static_cast<std::size_t>(k)];
      h(0, 0) += gx * gx;
      h(0, 1) += gx * gy;
      h(1, 1) += gy * gy;
    }
    h(1, 0) = h(0, 1);
    const double tr = h.trace();
    const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * h.determinant())));
    if (min_eig / kPatchArea < opts.min_eigen) {
      if (l == 0) return out;
      continue;
    }
    const Eigen::Matrix2d h_inv = h.inverse();

    Vec2 q = Pyramid::to_level(p0, l);
    if (!patch_samples_fit(img, q)) {
      if (l == 0) return out;
      continue;
    }
    const Vec2 q_start = q;
    const double cost_start = patch_rmse(img, t, q);
    bool small_update = false;
    for (int it = 0; it < opts.max_iterations; ++it) {
      if (iterations) ++(*iterations)[static_cast<std::size_t>(l)];
      Vec2 b = Vec2::Zero();
      int k = 0;
      for (double dy : kPatchOffsets) {
        for (double dx : kPatchOffsets) {
          const double r =
              sample_bilinear_unchecked(img, q.x() + dx, q.y() + dy) - t.intensity[static_cast<std::size_t>(k)];
          b.x() += t.gx[static_cast<std::size_t>(k)] * r;
          b.y() += t.gy[static_cast<std::size_t>(k)] * r;
          ++k;
        }
      }
      const Vec2 delta = h_inv * b;
      if (delta.norm() * scale > opts.max_step) {
        // Runaway step: fatal on the finest level, otherwise the level is discarded.
        if (l == 0) return out;
        q = q_start;
        break;
      }
      q -= delta;
      if (!patch_samples_fit(img, q)) {
        if (l == 0) return out;
        break;
      }
      if (delta.norm() * scale < opts.epsilon) {
        small_update = true;
        break;
      }
    }
    if (!patch_samples_fit(img, q)) continue;
    const double cost_end = patch_rmse(img, t, q);
    if (cost_end > opts.cost_increase_ratio * cost_start + 0.05) {
      if (++worse_in_a_row >= 2) return out;
      // A coarse level that made the match worse does not move the estimate.
      if (l > 0) q = q_start;
    } else {
      worse_in_a_row = 0;
    }
    p0 = Pyramid::from_level(q, l);
    if (l == 0) {
      out.position = p0;
      out.rmse = cost_end;
      out.converged = small_update && cost_end <= opts.max_patch_rmse;
    }
  }
  return out;
}

}  // namespace detail

/**
 * Refines each patch from its initial level-0 estimate. The output keeps the
 * input order and includes non-converged entries (flagged).
 */
inline std::vector<FeatureCorrespondence> align_features(const Pyramid& cur, std::span<const PatchResidual> patches,
                                                         std::span<const Vec2> initial,
                                                         const FusionOptions& opts = {},
                                                         std::vector<int>* iterations = nullptr) {
  if (initial.size() != patches.size()) throw Error(ErrorCode::ConfigInvalid, "one initial estimate per patch");
  if (iterations) iterations->assign(static_cast<std::size_t>(std::max(1, cur.num_levels())), 0);
  std::vector<FeatureCorrespondence> out(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto r = detail::align_patch(cur, patches[i], initial[i], opts, iterations);
    out[i] = {patches[i].feature_id, patches[i].map_point_id, initial[i], r.position, r.rmse, r.converged};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Photometric pose refinement

/// Bilinear image with central-difference gradients, the sampler used at runtime.
struct ImageSampler {
  const FloatImage* image = nullptr;
  double value(double x, double y) const { return sample_bilinear_unchecked(*image, x, y); }
  Vec2 gradient(double x, double y) const {
    return {0.5 * (value(x + 1.0, y) - value(x - 1.0, y)), 0.5 * (value(x, y + 1.0) - value(x, y - 1.0))};
  }
};

/// Intensity seen at patch offset `offset` (level pixels) around the projection of X on `level`.
template <typename Sampler>
double photometric_sample(const Sampler& img, const CameraIntrinsics& k, const Pose& camera_from_world,
                          const Vec3& world_point, const Vec2& offset, int level) {
  const Vec2 q = Pyramid::to_level(project_camera_point(k, camera_from_world * world_point), level) + offset;
  return img.value(q.x(), q.y());
}

/**
 * d(intensity)/d(twist) for a left perturbation exp(xi) * T_cw with
 * xi = (rho, phi): image gradient times level scale times the projection
 * Jacobian times [I | -[Xc]x].
 */
template <typename Sampler>
Vec6Row photometric_jacobian(const Sampler& img, const CameraIntrinsics& k, const Pose& camera_from_world,
                             const Vec3& world_point, const Vec2& offset, int level) {
  const Vec3 pc = camera_from_world * world_point;
  const Vec2 q = Pyramid::to_level(project_camera_point(k, pc), level) + offset;
  const Vec2 g = img.gradient(q.x(), q.y()) / static_cast<double>(1 << level);
  const Eigen::Matrix<double, 1, 3> gp = g.transpose() * projection_jacobian(k, pc);
  Vec6Row j;
  j.head<3>() = gp;
  j.tail<3>() = -gp * skew(pc);
  return j;
}

struct PhotometricOptions {
  int levels = 4;
  int max_iterations = 20;  // per level
  double min_update = 1e-6;
  double huber_delta = 10.0;
  double max_condition = 1e12;
  int min_points = 10;
};

struct PhotometricResult {
  Pose camera_from_world;
  double initial_cost = 0.0;  // level 0, before its first step
  double cost = 0.0;
  int iterations = 0;
  int active_points = 0;  // on level 0
};

namespace detail {

inline double huber_cost(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

inline double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

inline bool projection_on_level(const CameraIntrinsics& k, const Pose& t_cw, const Vec3& x, int level, Vec2& q) {
  const Vec3 pc = t_cw * x;
  if (pc.z() <= kMinDepth) return false;
  q = Pyramid::to_level(project_camera_point(k, pc), level);
  return true;
}

// Robust cost over the active set; +inf when any active patch leaves the image.
inline double photometric_cost(const FloatImage& img, std::span<const PatchResidual> residuals,
                               std::span<const Vec3> points, const std::vector<std::size_t>& active,
                               const CameraIntrinsics& k, const Pose& t_cw, int level, double delta) {
  double cost = 0.0;
  for (std::size_t i : active) {
    Vec2 q;
    if (!projection_on_level(k, t_cw, points[i], level, q) || !patch_fits(img, q)) {
      return std::numeric_limits<double>::infinity();
    }
    const PatchLevel& t = residuals[i].levels[static_cast<std::size_t>(level)];
    int n = 0;
    for (double dy : kPatchOffsets) {
      for (double dx : kPatchOffsets) {
        const double r = sample_bilinear_unchecked(img, q.x() + dx, q.y() + dy) - t.intensity[static_cast<std::size_t>(n++)];
        cost += huber_cost(r, delta);
      }
    }
  }
  return cost;
}

}  // namespace detail

/**
 * Gauss-Newton on the 6-DoF pose minimizing Huber-robust patch intensity
 * residuals, coarse to fine. A step that raises the cost is retried with
 * Levenberg damping; accepted steps never increase the cost.
 */
inline PhotometricResult refine_pose_photometric(const Pyramid& cur, std::span<const PatchResidual> residuals,
                                                 std::span<const Vec3> points, const Pose& initial_camera_from_world,
                                                 const CameraIntrinsics& k, const PhotometricOptions& opts = {}) {
  if (points.size() != residuals.size()) throw Error(ErrorCode::ConfigInvalid, "one world point per residual");
  if (static_cast<int>(residuals.size()) < opts.min_points) {
    throw Error(ErrorCode::TooFewPoints, "photometric pose refinement needs at least " +
                                             std::to_string(opts.min_points) + " residuals");
  }
  PhotometricResult result;
  result.camera_from_world = initial_camera_from_world;
  Pose t_cw = initial_camera_from_world;
  const int top = std::min(opts.levels, cur.num_levels()) - 1;
  for (int l = top; l >= 0; --l) {
    const FloatImage& img = cur.level(l);
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
      if (static_cast<int>(residuals[i].levels.size()) <= l || !residuals[i].levels[static_cast<std::size_t>(l)].valid) {
        continue;
      }
      Vec2 q;
      // Keep a pixel of slack so small pose updates do not push patches off the image.
      if (detail::projection_on_level(k, t_cw, points[i], l, q) && q.x() >= kPatchMargin + 1.0 &&
          q.y() >= kPatchMargin + 1.0 && q.x() <= img.width() - 2.0 - kPatchMargin &&
          q.y() <= img.height() - 2.0 - kPatchMargin) {
        active.push_back(i);
      }
    }
    if (l == 0) result.active_points = static_cast<int>(active.size());
    if (static_cast<int>(active.size()) < opts.min_points) {
      if (l == 0) throw Error(ErrorCode::TooFewPoints, "too few patches inside the current image");
      continue;
    }
    double cost = detail::photometric_cost(img, residuals, points, active, k, t_cw, l, opts.huber_delta);
    if (l == 0) result.initial_cost = cost;
    const ImageSampler sampler{&img};
    double lambda = 0.0;
    for (int it = 0; it < opts.max_iterations; ++it) {
      ++result.iterations;
      Mat6 h = Mat6::Zero();
      Vec6 g = Vec6::Zero();
      for (std::size_t i : active) {
        const PatchLevel& t = residuals[i].levels[static_cast<std::size_t>(l)];
        int n = 0;
        for (double dy : kPatchOffsets) {
          for (double dx : kPatchOffsets) {
            const Vec2 off(dx, dy);
            const double r = photometric_sample(sampler, k, t_cw, points[i], off, l) - t.intensity[static_cast<std::size_t>(n++)];
            const Vec6Row j = photometric_jacobian(sampler, k, t_cw, points[i], off, l);
            const double w = detail::huber_weight(r, opts.huber_delta);
            h.noalias() += w * j.transpose() * j;
            g.noalias() += w * r * j.transpose();
          }
        }
      }
      if (it == 0 && l == 0) {
        const Eigen::SelfAdjointEigenSolver<Mat6> es(h, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues()(0);
        const double hi = es.eigenvalues()(5);
        if (!(lo > 0.0) || hi / lo > opts.max_condition) {
          throw Error(ErrorCode::IllConditioned, "photometric normal equations are ill-conditioned");
        }
      }
      bool accepted = false;
      Vec6 step = Vec6::Zero();
      for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
        Mat6 a = h;
        a.diagonal() += lambda * h.diagonal();
        step = -a.ldlt().solve(g);
        if (!step.allFinite()) break;
        const Pose candidate = Pose::exp(step) * t_cw;
        const double c = detail::photometric_cost(img, residuals, points, active, k, candidate, l, opts.huber_delta);
        if (c <= cost) {
          t_cw = candidate;
          cost = c;
          accepted = true;
          lambda = lambda > 1e-6 ? lambda * 0.1 : 0.0;
        } else {
          lambda = lambda > 0.0 ? lambda * 10.0 : 1e-4;
        }
      }
      if (!accepted || step.norm() < opts.min_update) break;
    }
    result.cost = cost;
  }
  result.camera_from_world = t_cw;
  return result;
}

// ---------------------------------------------------------------------------
// Two-stage fusion matching

/**
 * Stage I projects every map point through the IMU-predicted pose; stage II
 * refines each visible point coarse to fine against its reference patch.
 * Only converged correspondences are returned. With `refine_pose` the pose
 * is then solved photometrically over the converged set.
 */
inline AlignmentResult fusion_feature_matching(std::span<const PatchResidual> patches, std::span<const Vec3> points,
                                               const Pyramid& cur, const Pose& predicted_camera_from_world,
                                               const CameraIntrinsics& k, const FusionOptions& opts = {}) {
  if (points.size() != patches.size()) throw Error(ErrorCode::ConfigInvalid, "one world point per patch");
  std::vector<PatchResidual> visible;
  std::vector<Vec3> visible_points;
  std::vector<Vec2> initial;
  const FloatImage& base = cur.level(0);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto px = project(k, predicted_camera_from_world, points[i]);
    if (!px || !detail::patch_samples_fit(base, *px)) continue;
    visible.push_back(patches[i]);
    visible_points.push_back(points[i]);
    initial.push_back(*px);
  }
  AlignmentResult result;
  result.camera_from_world = predicted_camera_from_world;
  result.visible = static_cast<int>(visible.size());
  if (result.visible < opts.min_points) {
    throw Error(ErrorCode::TooFewPoints, std::to_string(result.visible) + " visible map points");
  }
  const auto aligned = align_features(cur, visible, initial, opts, &result.iterations_per_level);
  std::vector<PatchResidual> kept;
  std::vector<Vec3> kept_points;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    if (!aligned[i].converged) continue;
    result.correspondences.push_back(aligned[i]);
    kept.push_back(visible[i]);
    kept_points.push_back(visible_points[i]);
  }
  if (opts.refine_pose && static_cast<int>(kept.size()) >= PhotometricOptions{}.min_points) {
    PhotometricOptions po;
    po.levels = opts.levels;
    po.huber_delta = opts.huber_delta;
    try {
      const auto r = refine_pose_photometric(cur, kept, kept_points, predicted_camera_from_world, k, po);
      result.camera_from_world = r.camera_from_world;
      result.initial_cost = r.initial_cost;
      result.final_cost = r.cost;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::IllConditioned && e.code() != ErrorCode::TooFewPoints) throw;
    }
  }
  return result;
}

}  // namespace hsvio
