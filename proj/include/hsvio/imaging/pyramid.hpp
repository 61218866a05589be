#pragma once

#include <vector>

#include "hsvio/error.hpp"
#include "hsvio/imaging/image.hpp"

namespace hsvio {

inline constexpr int kMinPyramidLevelSize = 16;

/**
 * Image pyramid with scale factor 0.5 per level; level 0 is full resolution.
 *
 * Level k+1 pixel (i, j) is the mean of the 2x2 block starting at (2i, 2j) in
 * level k, so pixel centres map as x_{k+1} = (x_k - 0.5) / 2.
 */
class Pyramid {
 public:
  Pyramid() = default;
  explicit Pyramid(std::vector<FloatImage> levels) : levels_(std::move(levels)) {}

  int num_levels() const { return static_cast<int>(levels_.size()); }
  const FloatImage& level(int k) const { return levels_.at(static_cast<std::size_t>(k)); }
  const std::vector<FloatImage>& levels() const { return levels_; }
  double scale(int k) const { return 1.0 / static_cast<double>(1 << k); }

  /// Level-0 pixel coordinates to level-k coordinates.
  static Vec2 to_level(const Vec2& p0, int k) {
    const double s = 1.0 / static_cast<double>(1 << k);
    return {(p0.x() + 0.5) * s - 0.5, (p0.y() + 0.5) * s - 0.5};
  }

  static Vec2 from_level(const Vec2& pk, int k) {
    const double s = static_cast<double>(1 << k);
    return {(pk.x() + 0.5) * s - 0.5, (pk.y() + 0.5) * s - 0.5};
  }

 private:
  std::vector<FloatImage> levels_;
};

inline FloatImage downsample_box2(const FloatImage& src) {
  const int w = src.width() / 2;
  const int h = src.height() / 2;
  FloatImage dst(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      dst(x, y) = 0.25f * (src(2 * x, 2 * y) + src(2 * x + 1, 2 * y) + src(2 * x, 2 * y + 1) +
                           src(2 * x + 1, 2 * y + 1));
    }
  }
  return dst;
}

inline Pyramid build_pyramid(FloatImage base, int levels) {
  if (levels < 1) throw Error(ErrorCode::TooSmall, "pyramid needs at least one level");
  const int shrink = 1 << (levels - 1);
  if (base.width() / shrink < kMinPyramidLevelSize || base.height() / shrink < kMinPyramidLevelSize) {
    throw Error(ErrorCode::TooSmall, "coarsest pyramid level would be smaller than 16x16");
  }
  std::vector<FloatImage> out;
  out.reserve(static_cast<std::size_t>(levels));
  out.push_back(std::move(base));
  for (int k = 1; k < levels; ++k) out.push_back(downsample_box2(out.back()));
  return Pyramid(std::move(out));
}

inline Pyramid build_pyramid(const GrayImage& img, int levels) { return build_pyramid(to_float(img), levels); }

}  // namespace hsvio
