#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hsvio/error.hpp"
#include "hsvio/geometry/camera.hpp"
#include "hsvio/geometry/lie.hpp"

namespace hsvio {

/// A 2D-2D correspondence: pixel in the first view, pixel in the second view.
struct PixelPair {
  Vec2 first;
  Vec2 second;
};

struct RansacOptions {
  double inlier_threshold_px = 1.0;  // on the Sampson distance
  double confidence = 0.99;
  int max_iterations = 500;
  std::uint32_t seed = 42;
};

struct FundamentalEstimate {
  Mat3 fundamental = Mat3::Zero();
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
};

/// Relative motion x_second = R x_first + t with ||t|| = 1.
struct RelativeMotion {
  Rotation rotation;
  Vec3 translation = Vec3::UnitZ();
};

/// Squared Sampson distance of a correspondence to F (pixels^2).
inline double sampson_distance_sq(const Mat3& f, const PixelPair& m) {
  const Vec3 x1(m.first.x(), m.first.y(), 1.0);
  const Vec3 x2(m.second.x(), m.second.y(), 1.0);
  const Vec3 fx1 = f * x1;
  const Vec3 ftx2 = f.transpose() * x2;
  const double num = x2.dot(fx1);
  const double den = fx1.head<2>().squaredNorm() + ftx2.head<2>().squaredNorm();
  if (den <= std::numeric_limits<double>::min()) return std::numeric_limits<double>::infinity();
  return num * num / den;
}

/// Algebraic epipolar residual x2^T F x1.
inline double epipolar_residual(const Mat3& f, const PixelPair& m) {
  return Vec3(m.second.x(), m.second.y(), 1.0).dot(f * Vec3(m.first.x(), m.first.y(), 1.0));
}

/// Distance (px) of the second pixel from the epipolar line of the first.
inline double epipolar_line_distance(const Mat3& f, const PixelPair& m) {
  const Vec3 line = f * Vec3(m.first.x(), m.first.y(), 1.0);
  const double n = line.head<2>().norm();
  if (n <= std::numeric_limits<double>::min()) return std::numeric_limits<double>::infinity();
  return std::abs(line.dot(Vec3(m.second.x(), m.second.y(), 1.0))) / n;
}

namespace detail {

// Hartley normalization: centroid to origin, mean distance sqrt(2).
inline bool normalizing_transform(std::span<const Vec2> pts, Mat3& t) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 1e-12)) return false;
  const double s = std::numbers::sqrt2 / mean_dist;
  t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
  return true;
}

// Normalized 8-point (least squares when more than 8 pairs); throws on degenerate input.
inline Mat3 eight_point(std::span<const PixelPair> matches) {
  const auto n = matches.size();
  if (n < 8) throw Error(ErrorCode::DegenerateGeometry, "need at least 8 correspondences");
  std::vector<Vec2> p1(n), p2(n);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i] = matches[i].first;
    p2[i] = matches[i].second;
  }
  Mat3 t1, t2;
  if (!normalizing_transform(p1, t1) || !normalizing_transform(p2, t2)) {
    throw Error(ErrorCode::DegenerateGeometry, "coincident points");
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(std::max<std::size_t>(n, 9)), 9);
  a.setZero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x1 = t1 * Vec3(p1[i].x(), p1[i].y(), 1.0);
    const Vec3 x2 = t2 * Vec3(p2[i].x(), p2[i].y(), 1.0);
    const auto r = static_cast<Eigen::Index>(i);
    a.row(r) << x2.x() * x1.x(), x2.x() * x1.y(), x2.x(), x2.y() * x1.x(), x2.y() * x1.y(),
        x2.y(), x1.x(), x1.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A one-dimensional null space needs rank 8.
  if (!(sv(7) > 1e-10 * sv(0))) {
    throw Error(ErrorCode::DegenerateGeometry, "rank-deficient eight-point system (collinear or repeated points)");
  }
  const Eigen::Matrix<double, 9, 1> f = svd.matrixV().col(8);
  Mat3 fn;
  fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  Eigen::JacobiSVD<Mat3> fsvd(fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = fsvd.singularValues();
  s(2) = 0.0;
  fn = fsvd.matrixU() * s.asDiagonal() * fsvd.matrixV().transpose();
  Mat3 out = t2.transpose() * fn * t1;
  return out / out.norm();
}

}  // namespace detail

/**
 * Fundamental matrix from pixel correspondences: normalized 8-point inside a
 * deterministic RANSAC loop, then a least-squares refit on the consensus set.
 * F satisfies second^T F first = 0 and has rank 2.
 */
inline FundamentalEstimate estimate_fundamental(std::span<const PixelPair> matches,
                                                const RansacOptions& opts = {}) {
  const std::size_t n = matches.size();
  if (n < 8) throw Error(ErrorCode::DegenerateGeometry, "need at least 8 correspondences");

  const double thr_sq = opts.inlier_threshold_px * opts.inlier_threshold_px;
  auto score = [&](const Mat3& f, std::vector<bool>& mask) {
    std::size_t count = 0;
    mask.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      if (sampson_distance_sq(f, matches[i]) < thr_sq) {
        mask[i] = true;
        ++count;
      }
    }
    return count;
  };

  std::mt19937 rng(opts.seed);
  FundamentalEstimate best;
  std::vector<bool> mask;
  std::array<std::size_t, 8> idx{};
  std::array<PixelPair, 8> sample;
  int required = opts.max_iterations;
  for (int it = 0; it < std::min(required, opts.max_iterations); ++it) {
    if (n == 8) {
      for (std::size_t k = 0; k < 8; ++k) idx[k] = k;
    } else {
      for (std::size_t k = 0; k < 8; ++k) {
        std::size_t candidate;
        do {
          candidate = static_cast<std::size_t>(rng() % n);
        } while (std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), candidate) !=
                 idx.begin() + static_cast<std::ptrdiff_t>(k));
        idx[k] = candidate;
      }
    }
    for (std::size_t k = 0; k < 8; ++k) sample[k] = matches[idx[k]];
    Mat3 f;
    try {
      f = detail::eight_point(sample);
    } catch (const Error&) {
      continue;
    }
    const std::size_t count = score(f, mask);
    if (count > best.inlier_count) {
      best.fundamental = f;
      best.inliers = mask;
      best.inlier_count = count;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_fail = 1.0 - std::pow(w, 8.0);
      if (p_fail <= 0.0) {
        required = it + 1;
      } else {
        const double k = std::log(1.0 - opts.confidence) / std::log(p_fail);
        required = static_cast<int>(std::min<double>(std::ceil(k), opts.max_iterations));
      }
    }
    if (n == 8) break;
  }
  if (best.inlier_count < 8) throw Error(ErrorCode::DegenerateGeometry, "fewer than 8 RANSAC inliers");

  // Refit on the consensus set until it stops changing.
  for (int round = 0; round < 3; ++round) {
    std::vector<PixelPair> inl;
    inl.reserve(best.inlier_count);
    for (std::size_t i = 0; i < n; ++i) {
      if (best.inliers[i]) inl.push_back(matches[i]);
    }
    Mat3 f;
    try {
      f = detail::eight_point(inl);
    } catch (const Error&) {
      break;
    }
    const std::size_t count = score(f, mask);
    if (count < best.inlier_count) break;
    const bool same = mask == best.inliers;
    best.fundamental = f;
    best.inliers = mask;
    best.inlier_count = count;
    if (same) break;
  }
  return best;
}

/// E = K^T F K projected onto the essential manifold (singular values (s, s, 0)).
inline Mat3 essential_from_fundamental(const Mat3& f, const CameraIntrinsics& k) {
  const Mat3 e = k.matrix().transpose() * f * k.matrix();
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  const double sigma = 0.5 * (s(0) + s(1));
  return svd.matrixU() * Vec3(sigma, sigma, 0.0).asDiagonal() * svd.matrixV().transpose();
}

namespace detail {

// Linear triangulation from normalized image coordinates. Returns false at infinity.
inline bool triangulate_normalized(const Vec3& x1, const Vec3& x2, const Mat3& r1, const Vec3& t1,
                                   const Mat3& r2, const Vec3& t2, Vec3& out) {
  Eigen::Matrix4d a;
  a.row(0) << x1.x() * r1.row(2) - r1.row(0), x1.x() * t1.z() - t1.x();
  a.row(1) << x1.y() * r1.row(2) - r1.row(1), x1.y() * t1.z() - t1.y();
  a.row(2) << x2.x() * r2.row(2) - r2.row(0), x2.x() * t2.z() - t2.x();
  a.row(3) << x2.y() * r2.row(2) - r2.row(1), x2.y() * t2.z() - t2.y();
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) < 1e-12 * h.head<3>().norm() || h(3) == 0.0) return false;
  out = h.head<3>() / h(3);
  return out.allFinite();
}

}  // namespace detail

/**
 * Recovers (R, t) from an essential matrix. Of the four SVD candidates the one
 * with a strict majority of correspondences in front of both cameras wins.
 */
inline RelativeMotion decompose_essential(const Mat3& e, std::span<const PixelPair> matches,
                                          const CameraIntrinsics& k) {
  if (matches.empty()) throw Error(ErrorCode::CheiralityAmbiguous, "no correspondences");
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Mat3 w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Mat3 ra = u * w * v.transpose();
  const Mat3 rb = u * w.transpose() * v.transpose();
  const Vec3 t = u.col(2);
  const std::array<std::pair<Mat3, Vec3>, 4> candidates{
      {{ra, t}, {ra, -t}, {rb, t}, {rb, -t}}};

  std::vector<Vec3> n1, n2;
  n1.reserve(matches.size());
  n2.reserve(matches.size());
  for (const auto& m : matches) {
    n1.push_back(k.unproject(m.first));
    n2.push_back(k.unproject(m.second));
  }

  std::array<std::size_t, 4> counts{};
  for (std::size_t c = 0; c < 4; ++c) {
    const auto& [r, tc] = candidates[c];
    for (std::size_t i = 0; i < matches.size(); ++i) {
      Vec3 x;
      if (!detail::triangulate_normalized(n1[i], n2[i], Mat3::Identity(), Vec3::Zero(), r, tc, x)) continue;
      if (x.z() > 0.0 && (r * x + tc).z() > 0.0) ++counts[c];
    }
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return counts[a] > counts[b]; });
  const std::size_t best = counts[order[0]];
  if (best == 0 || best == counts[order[1]] || 2 * best <= matches.size()) {
    throw Error(ErrorCode::CheiralityAmbiguous, "no decomposition wins a strict majority");
  }
  const auto& [r, tc] = candidates[order[0]];
  return {Rotation::from_matrix(r), tc.normalized()};
}

struct TriangulationOptions {
  double min_parallax_deg = 0.5;
};

/**
 * Two-view DLT triangulation followed by one Gauss-Newton step on the pixel
 * reprojection error. Poses map world to camera.
 */
inline Vec3 triangulate(const Vec2& p1, const Vec2& p2, const Pose& camera1_from_world,
                        const Pose& camera2_from_world, const CameraIntrinsics& k,
                        const TriangulationOptions& opts = {}) {
  const Mat3 r1 = camera1_from_world.rotation().matrix();
  const Mat3 r2 = camera2_from_world.rotation().matrix();
  const Vec3 t1 = camera1_from_world.translation();
  const Vec3 t2 = camera2_from_world.translation();
  const Vec3 x1 = k.unproject(p1);
  const Vec3 x2 = k.unproject(p2);

  const Vec3 ray1 = r1.transpose() * x1;
  const Vec3 ray2 = r2.transpose() * x2;
  const double cos_angle = std::clamp(ray1.dot(ray2) / (ray1.norm() * ray2.norm()), -1.0, 1.0);
  const double parallax_deg = std::acos(cos_angle) * 180.0 / std::numbers::pi;
  const Vec3 c1 = -(r1.transpose() * t1);
  const Vec3 c2 = -(r2.transpose() * t2);
  if (parallax_deg < opts.min_parallax_deg || (c1 - c2).norm() < 1e-12) {
    throw Error(ErrorCode::LowParallax, "ray angle below the parallax floor");
  }

  Vec3 x;
  if (!detail::triangulate_normalized(x1, x2, r1, t1, r2, t2, x)) {
    throw Error(ErrorCode::LowParallax, "triangulated point at infinity");
  }

  // One Gauss-Newton step on the 4-vector of pixel residuals.
  Eigen::Matrix<double, 4, 3> j;
  Eigen::Vector4d res;
  const Vec3 pc1 = r1 * x + t1;
  const Vec3 pc2 = r2 * x + t2;
  if (pc1.z() > kMinDepth && pc2.z() > kMinDepth) {
    res.head<2>() = project_camera_point(k, pc1) - p1;
    res.tail<2>() = project_camera_point(k, pc2) - p2;
    j.topRows<2>() = projection_jacobian(k, pc1) * r1;
    j.bottomRows<2>() = projection_jacobian(k, pc2) * r2;
    const Mat3 h = j.transpose() * j;
    const Vec3 delta = h.ldlt().solve(-j.transpose() * res);
    if (delta.allFinite()) x += delta;
  }
  return x;
}

}  // namespace hsvio
