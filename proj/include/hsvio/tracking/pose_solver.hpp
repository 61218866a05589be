#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hsvio/error.hpp"
#include "hsvio/geometry/camera.hpp"
#include "hsvio/geometry/lie.hpp"

namespace hsvio {

struct ReprojectionOptions {
  int max_iterations = 15;
  double min_update = 1e-10;
  double huber_delta = 1.0;  // px
};

struct ReprojectionResult {
  Pose camera_from_world;
  std::vector<double> residuals;  // px, per observation at the solution; +inf when behind the camera
  double cost = 0.0;
  int iterations = 0;
};

namespace detail {

inline double reprojection_cost(std::span<const Vec2> observations, std::span<const Vec3> points, const Pose& t_cw,
                                const CameraIntrinsics& k, double delta) {
  double cost = 0.0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Vec3 pc = t_cw * points[i];
    if (pc.z() <= kMinDepth) return std::numeric_limits<double>::infinity();
    const double r = (project_camera_point(k, pc) - observations[i]).norm();
    cost += r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
  }
  return cost;
}

}  // namespace detail

/**
 * Pose-only Gauss-Newton on Huber-weighted reprojection error, left
 * perturbation of the world-to-camera pose. Steps that raise the cost are
 * retried with Levenberg damping.
 */
inline ReprojectionResult solve_pose_reprojection(std::span<const Vec2> observations, std::span<const Vec3> points,
                                                  const Pose& initial_camera_from_world, const CameraIntrinsics& k,
                                                  const ReprojectionOptions& opts = {}) {
  if (observations.size() != points.size()) throw Error(ErrorCode::ConfigInvalid, "one observation per point");
  if (observations.size() < 3) throw Error(ErrorCode::TooFewPoints, "pose solve needs at least 3 points");
  Pose t_cw = initial_camera_from_world;
  double cost = detail::reprojection_cost(observations, points, t_cw, k, opts.huber_delta);
  double lambda = 0.0;
  ReprojectionResult out;
  for (int it = 0; it < opts.max_iterations; ++it) {
    ++out.iterations;
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t i = 0; i < observations.size(); ++i) {
      const Vec3 pc = t_cw * points[i];
      if (pc.z() <= kMinDepth) continue;
      const Vec2 r = project_camera_point(k, pc) - observations[i];
      const Eigen::Matrix<double, 2, 3> jp = projection_jacobian(k, pc);
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = jp;
      j.rightCols<3>() = -jp * skew(pc);
      const double n = r.norm();
      const double w = n <= opts.huber_delta ? 1.0 : opts.huber_delta / n;
      h.noalias() += w * j.transpose() * j;
      g.noalias() += w * j.transpose() * r;
    }
    bool accepted = false;
    Vec6 step = Vec6::Zero();
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
      Mat6 a = h;
      a.diagonal() += lambda * h.diagonal() + Vec6::Constant(1e-12);
      step = -a.ldlt().solve(g);
      if (!step.allFinite()) break;
      const Pose candidate = Pose::exp(step) * t_cw;
      const double c = detail::reprojection_cost(observations, points, candidate, k, opts.huber_delta);
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
  out.camera_from_world = t_cw;
  out.cost = cost;
  out.residuals.reserve(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Vec3 pc = t_cw * points[i];
    out.residuals.push_back(pc.z() <= kMinDepth ? std::numeric_limits<double>::infinity()
                                                : (project_camera_point(k, pc) - observations[i]).norm());
  }
  return out;
}

}  // namespace hsvio
