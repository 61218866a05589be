#pragma once

// Brute-force trajectory error evaluation on plain 4x4 matrices. Shares no code with the
// metrics header: the logarithm is computed from matrix entries rather than quaternions.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace hsvio::test::oracle {

using M4 = Eigen::Matrix4d;
using M3 = Eigen::Matrix3d;
using V3 = Eigen::Vector3d;
using V6 = Eigen::Matrix<double, 6, 1>;

inline M3 hat(const V3& v) {
  M3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// (rho, phi) of an SE(3) matrix, for rotation angles below pi.
inline V6 se3_log(const M4& t) {
  const M3 r = t.block<3, 3>(0, 0);
  const V3 w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * w.norm();          // sin(theta)
  const double c = 0.5 * (r.trace() - 1.0); // cos(theta)
  const double theta = std::atan2(s, c);
  const V3 phi = theta < 1e-10 ? V3(0.5 * w) : V3(w * (theta / (2.0 * s)));
  // Solve V rho = t with V = I + (1 - cos)/theta^2 phi^ + (theta - sin)/theta^3 phi^^2.
  const M3 p = hat(phi);
  double a;
  double b;
  if (theta < 1e-4) {
    a = 0.5 - theta * theta / 24.0;
    b = 1.0 / 6.0 - theta * theta / 120.0;
  } else {
    a = s * s / ((1.0 + c) * theta * theta);  // 1 - cos = sin^2 / (1 + cos)
    b = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  const M3 v = M3::Identity() + a * p + b * p * p;
  V6 out;
  out.head<3>() = v.partialPivLu().solve(V3(t.block<3, 1>(0, 3)));
  out.tail<3>() = phi;
  return out;
}

inline M4 inverse(const M4& t) {
  M4 out = M4::Identity();
  out.block<3, 3>(0, 0) = t.block<3, 3>(0, 0).transpose();
  out.block<3, 1>(0, 3) = -out.block<3, 3>(0, 0) * t.block<3, 1>(0, 3);
  return out;
}

struct Result {
  double ate = 0.0;
  double rpe = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

/// Absolute, relative (gap `delta`) errors and the S.D. of the absolute series.
inline Result evaluate(const std::vector<M4>& gt, const std::vector<M4>& est, int delta, bool translation_only) {
  const auto err = [&](const M4& e) {
    return translation_only ? e.block<3, 1>(0, 3).norm() : se3_log(e).norm();
  };
  const std::size_t n = gt.size();
  Result r;
  std::vector<double> e(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = translation_only ? (gt[i].block<3, 1>(0, 3) - est[i].block<3, 1>(0, 3)).norm()
                            : err(inverse(gt[i]) * est[i]);
    sq += e[i] * e[i];
    r.mean += e[i];
  }
  r.ate = std::sqrt(sq / static_cast<double>(n));
  r.mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : e) var += (x - r.mean) * (x - r.mean);
  r.sd = std::sqrt(var / static_cast<double>(n));
  const auto d = static_cast<std::size_t>(delta);
  double rsq = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i + d < n; ++i, ++m) {
    const M4 rel_gt = inverse(gt[i]) * gt[i + d];
    const M4 rel_est = inverse(est[i]) * est[i + d];
    const double x = err(inverse(rel_gt) * rel_est);
    rsq += x * x;
  }
  r.rpe = m > 0 ? std::sqrt(rsq / static_cast<double>(m)) : 0.0;
  return r;
}

}  // namespace hsvio::test::oracle
