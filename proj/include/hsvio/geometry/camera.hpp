#pragma once

#include <optional>
#include <string>

#include "hsvio/error.hpp"
#include "hsvio/geometry/lie.hpp"

namespace hsvio {

/// Points with camera-frame depth at or below this are treated as out of view.
inline constexpr double kMinDepth = 1e-6;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  Mat3 inverse_matrix() const {
    Mat3 k;
    k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return k;
  }

  /// Pixel to normalized image plane coordinates (z = 1).
  Vec3 unproject(const Vec2& px) const { return {(px.x() - cx) / fx, (px.y() - cy) / fy, 1.0}; }

  bool in_bounds(const Vec2& px, double margin = 0.0) const {
    return px.x() >= margin && px.y() >= margin && px.x() < width - margin &&
           px.y() < height - margin;
  }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::ConfigInvalid, "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::ConfigInvalid, "image size must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
      throw Error(ErrorCode::ConfigInvalid, "principal point outside the image");
    }
  }
};

/// Pinhole projection of a camera-frame point, no bounds test.
inline Vec2 project_camera_point(const CameraIntrinsics& k, const Vec3& pc) {
  return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
}

/// d(pixel)/d(camera point), 2x3.
inline Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraIntrinsics& k, const Vec3& pc) {
  const double iz = 1.0 / pc.z();
  const double iz2 = iz * iz;
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx * iz, 0.0, -k.fx * pc.x() * iz2,
       0.0, k.fy * iz, -k.fy * pc.y() * iz2;
  return j;
}

/**
 * Projects a world point through a world-to-camera pose.
 *
 * Returns std::nullopt when the point is behind the camera (depth <= kMinDepth)
 * or the pixel falls outside [0, width) x [0, height).
 */
inline std::optional<Vec2> project(const CameraIntrinsics& k, const Pose& camera_from_world,
                                   const Vec3& world_point) {
  const Vec3 pc = camera_from_world * world_point;
  if (pc.z() <= kMinDepth) return std::nullopt;
  const Vec2 px = project_camera_point(k, pc);
  if (!k.in_bounds(px)) return std::nullopt;
  return px;
}

}  // namespace hsvio
