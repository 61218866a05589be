#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace hsvio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Element of se(3) stored as (rho, phi): translational part first, rotation vector last.
using Twist = Vec6;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/**
 * SO(3) element backed by a unit quaternion.
 *
 * The quaternion is renormalized after every composition so long products of
 * small increments stay on the manifold.
 */
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) { canonicalize(); }

  static Rotation identity() { return Rotation(); }

  static Rotation from_matrix(const Mat3& m) {
    // Project onto SO(3) first so that slightly non-orthonormal inputs are accepted.
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
      Mat3 u = svd.matrixU();
      u.col(2) *= -1.0;
      r = u * svd.matrixV().transpose();
    }
    return Rotation(Eigen::Quaterniond(r));
  }

  static Rotation from_axis_angle(const Vec3& axis, double angle) {
    return exp(axis.normalized() * angle);
  }

  /// Exponential map from a rotation vector.
  static Rotation exp(const Vec3& phi) {
    const double theta_sq = phi.squaredNorm();
    const double theta = std::sqrt(theta_sq);
    double w;
    double k;  // sin(theta/2)/theta
    if (theta < 1e-6) {
      w = 1.0 - theta_sq / 8.0;
      k = 0.5 - theta_sq / 48.0;
    } else {
      w = std::cos(0.5 * theta);
      k = std::sin(0.5 * theta) / theta;
    }
    return Rotation(Eigen::Quaterniond(w, k * phi.x(), k * phi.y(), k * phi.z()));
  }

  /// Rotation vector with angle in [0, pi].
  Vec3 log() const {
    const Vec3 v = q_.vec();
    const double s = v.norm();
    const double w = q_.w();
    if (s < 1e-10) {
      // theta ~ 2 s / w; first-order series keeps full precision near identity.
      return (2.0 / w - 2.0 * s * s / (3.0 * w * w * w)) * v;
    }
    const double theta = 2.0 * std::atan2(s, w);
    return (theta / s) * v;
  }

  double angle() const { return log().norm(); }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  Rotation inverse() const { return Rotation(q_.conjugate()); }

  Rotation operator*(const Rotation& other) const { return Rotation(q_ * other.q_); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

 private:
  void canonicalize() {
    if (q_.w() < 0.0) q_.coeffs() *= -1.0;
  }

  Eigen::Quaterniond q_;
};

namespace detail {

// V(phi) = I + (1 - cos)/theta^2 [phi]x + (theta - sin)/theta^3 [phi]x^2
inline Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta_sq = phi.squaredNorm();
  const Mat3 w = skew(phi);
  double a;
  double b;
  if (theta_sq < 1e-10) {
    a = 0.5 - theta_sq / 24.0;
    b = 1.0 / 6.0 - theta_sq / 120.0;
  } else {
    const double theta = std::sqrt(theta_sq);
    const double half_sin = std::sin(0.5 * theta);
    a = 2.0 * half_sin * half_sin / theta_sq;  // (1 - cos) without cancellation
    b = (theta - std::sin(theta)) / (theta_sq * theta);
  }
  return Mat3::Identity() + a * w + b * w * w;
}

inline Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
  const double theta_sq = phi.squaredNorm();
  const Mat3 w = skew(phi);
  double c;
  if (theta_sq < 1e-10) {
    c = 1.0 / 12.0 + theta_sq / 720.0;
  } else {
    const double theta = std::sqrt(theta_sq);
    // Half-angle cotangent; the 1 - cos form loses most digits for small angles.
    c = (1.0 - 0.5 * theta * std::cos(0.5 * theta) / std::sin(0.5 * theta)) / theta_sq;
  }
  return Mat3::Identity() - 0.5 * w + c * w * w;
}

}  // namespace detail

/// Rigid transform x -> R x + t.
class Pose {
 public:
  Pose() : translation_(Vec3::Zero()) {}
  Pose(const Rotation& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose identity() { return Pose(); }
  static Pose from_translation(const Vec3& t) { return Pose(Rotation(), t); }
  static Pose from_matrix(const Mat4& m) {
    return Pose(Rotation::from_matrix(m.topLeftCorner<3, 3>()), m.topRightCorner<3, 1>());
  }

  static Pose exp(const Twist& xi) {
    const Vec3 rho = xi.head<3>();
    const Vec3 phi = xi.tail<3>();
    return Pose(Rotation::exp(phi), detail::so3_left_jacobian(phi) * rho);
  }

  Twist log() const {
    const Vec3 phi = rotation_.log();
    Twist xi;
    xi.head<3>() = detail::so3_left_jacobian_inverse(phi) * translation_;
    xi.tail<3>() = phi;
    return xi;
  }

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_.matrix();
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Pose inverse() const {
    const Rotation r_inv = rotation_.inverse();
    return Pose(r_inv, -(r_inv * translation_));
  }

  Pose operator*(const Pose& other) const {
    return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
  }

  Vec3 operator*(const Vec3& point) const { return rotation_ * point + translation_; }

 private:
  Rotation rotation_;
  Vec3 translation_;
};

/// ||as_matrix(inverse(current) * previous) - I||_F, the keyframe motion criterion.
inline double pose_change_frobenius(const Pose& current, const Pose& previous) {
  return ((current.inverse() * previous).matrix() - Mat4::Identity()).norm();
}

}  // namespace hsvio
