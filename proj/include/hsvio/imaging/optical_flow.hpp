#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hsvio/imaging/pyramid.hpp"

namespace hsvio {

struct LkOptions {
  int window = 11;
  int max_iterations = 30;
  double epsilon = 0.01;  // px, convergence on the update norm
  // Minimum eigenvalue of the structure tensor divided by the window area.
  double min_eigen = 1e-3;
};

struct FlowResult {
  Vec2 position = Vec2::Zero();
  bool converged = false;
};

namespace detail {

struct LkLevelOutcome {
  bool ran = false;
  bool converged = false;
  bool lost = false;
};

// Inverse-compositional translation alignment of one window on one level.
inline LkLevelOutcome lk_track_level(const FloatImage& prev, const FloatImage& cur, const Vec2& p,
                                     Vec2& flow, const LkOptions& opts) {
  LkLevelOutcome out;
  const int half = opts.window / 2;
  // Template and its gradient need a 1 px margin around the window.
  if (p.x() - half < 1.0 || p.y() - half < 1.0 || p.x() + half > prev.width() - 2 ||
      p.y() + half > prev.height() - 2) {
    return out;
  }
  const int n = opts.window * opts.window;
  std::vector<double> tmpl(static_cast<std::size_t>(n));
  std::vector<double> gx(static_cast<std::size_t>(n));
  std::vector<double> gy(static_cast<std::size_t>(n));
  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
  int k = 0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx, ++k) {
      const double x = p.x() + dx;
      const double y = p.y() + dy;
      tmpl[static_cast<std::size_t>(k)] = sample_bilinear_unchecked(prev, x, y);
      const double ggx = 0.5 * (sample_bilinear_unchecked(prev, x + 1.0, y) - sample_bilinear_unchecked(prev, x - 1.0, y));
      const double ggy = 0.5 * (sample_bilinear_unchecked(prev, x, y + 1.0) - sample_bilinear_unchecked(prev, x, y - 1.0));
      gx[static_cast<std::size_t>(k)] = ggx;
      gy[static_cast<std::size_t>(k)] = ggy;
      h(0, 0) += ggx * ggx;
      h(0, 1) += ggx * ggy;
      h(1, 1) += ggy * ggy;
    }
  }
  h(1, 0) = h(0, 1);
  const double tr = h.trace();
  const double det = h.determinant();
  const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
  out.ran = true;
  if (min_eig / n < opts.min_eigen) {
    out.lost = true;
    return out;
  }
  const Eigen::Matrix2d h_inv = h.inverse();

  for (int it = 0; it < opts.max_iterations; ++it) {
    const Vec2 q = p + flow;
    if (q.x() - half < 0.0 || q.y() - half < 0.0 || q.x() + half > cur.width() - 1 ||
        q.y() + half > cur.height() - 1) {
      out.lost = true;
      return out;
    }
    Vec2 b = Vec2::Zero();
    k = 0;
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx, ++k) {
        const double e = sample_bilinear_unchecked(cur, q.x() + dx, q.y() + dy) - tmpl[static_cast<std::size_t>(k)];
        b.x() += gx[static_cast<std::size_t>(k)] * e;
        b.y() += gy[static_cast<std::size_t>(k)] * e;
      }
    }
    const Vec2 delta = h_inv * b;
    flow -= delta;
    if (delta.norm() < opts.epsilon) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace detail

/**
 * Pyramidal inverse-compositional Lucas-Kanade. `init` (same length as
 * `points`, or empty) seeds the level-0 position estimate for each point.
 * Returns new positions p + dp with a per-point convergence flag.
 */
inline std::vector<FlowResult> lk_flow(const Pyramid& prev, const Pyramid& cur, std::span<const Vec2> points,
                                       std::span<const Vec2> init = {}, const LkOptions& opts = {}) {
  std::vector<FlowResult> out(points.size());
  const int top = std::min(prev.num_levels(), cur.num_levels()) - 1;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec2 start = init.size() == points.size() ? init[i] : points[i];
    Vec2 flow0 = start - points[i];
    Vec2 flow = flow0 / static_cast<double>(1 << top);
    bool ok = false;
    for (int level = top; level >= 0; --level) {
      const Vec2 pl = Pyramid::to_level(points[i], level);
      const auto r = detail::lk_track_level(prev.level(level), cur.level(level), pl, flow, opts);
      if (level == 0) {
        ok = r.ran && r.converged && !r.lost;
      } else if (r.lost) {
        // Coarse-level failure: restart the finer level from the seed.
        flow = flow0 / static_cast<double>(1 << level);
      }
      if (level > 0) flow *= 2.0;
    }
    out[i].position = points[i] + flow;
    out[i].converged = ok;
  }
  return out;
}

}  // namespace hsvio
