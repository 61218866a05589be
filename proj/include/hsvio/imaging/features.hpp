#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "hsvio/error.hpp"
#include "hsvio/imaging/brief_pattern.hpp"
#include "hsvio/imaging/image.hpp"

namespace hsvio {

// ---------------------------------------------------------------------------
// FAST-9

struct Corner {
  Vec2 position = Vec2::Zero();  // subpixel, level coordinates
  double score = 0.0;            // sum-of-absolute-differences response
  int level = 0;
};

struct FastOptions {
  int border = 3;       // minimum distance of a candidate from the image border
  int grid_cells = 8;   // buckets per axis for spatial retention
};

namespace detail {

inline constexpr std::array<std::array<int, 2>, 16> kFastCircle{{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};

inline bool has_arc(std::uint32_t mask) {
  // Nine contiguous set bits on a 16-bit ring.
  const std::uint32_t ring = mask | (mask << 16);
  std::uint32_t run = ring;
  for (int i = 1; i < 9; ++i) run &= ring >> i;
  return run != 0;
}

// SAD response of the brighter / darker arc, whichever is larger.
inline double fast_sad(const GrayImage& img, int x, int y, int threshold) {
  const int c = img(x, y);
  int bright = 0;
  int dark = 0;
  for (const auto& o : kFastCircle) {
    const int v = img(x + o[0], y + o[1]);
    if (v > c + threshold) bright += v - c - threshold;
    else if (v < c - threshold) dark += c - v - threshold;
  }
  return static_cast<double>(std::max(bright, dark));
}

inline bool fast_segment_test(const GrayImage& img, int x, int y, int threshold) {
  const int c = img(x, y);
  const int hi = c + threshold;
  const int lo = c - threshold;
  int nb = 0, nd = 0;
  for (int k = 0; k < 16; k += 4) {
    const int v = img(x + kFastCircle[k][0], y + kFastCircle[k][1]);
    nb += v > hi;
    nd += v < lo;
  }
  if (nb < 2 && nd < 2) return false;
  std::uint32_t bm = 0, dm = 0;
  for (int k = 0; k < 16; ++k) {
    const int v = img(x + kFastCircle[k][0], y + kFastCircle[k][1]);
    if (v > hi) bm |= 1u << k;
    else if (v < lo) dm |= 1u << k;
  }
  return has_arc(bm) || has_arc(dm);
}

inline double parabola_offset(double left, double centre, double right) {
  const double den = left - 2.0 * centre + right;
  if (!(den < 0.0)) return 0.0;
  return std::clamp(0.5 * (left - right) / den, -0.5, 0.5);
}

}  // namespace detail

/**
 * FAST-9 on the 16-pixel Bresenham circle with 3x3 non-maximum suppression on
 * the SAD score and grid-bucketed retention of at most `max_corners`.
 * Positions are refined to subpixel by a parabola fit of the score.
 * Output is ordered by (score desc, y, x).
 */
inline std::vector<Corner> detect_fast(const GrayImage& img, int threshold, std::size_t max_corners,
                                       const FastOptions& opts = {}) {
  if (threshold <= 0) throw Error(ErrorCode::ConfigInvalid, "FAST threshold must be positive");
  // One extra pixel so the subpixel fit can score the neighbours.
  const int border = std::max(4, opts.border);
  const int w = img.width();
  const int h = img.height();
  std::vector<Corner> out;
  if (w <= 2 * border || h <= 2 * border || max_corners == 0) return out;

  Image<float> score(w, h, 0.0f);
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      if (detail::fast_segment_test(img, x, y, threshold)) {
        score(x, y) = static_cast<float>(detail::fast_sad(img, x, y, threshold));
      }
    }
  }

  struct Candidate {
    int x, y;
    float s;
  };
  std::vector<Candidate> kept;
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      const float s = score(x, y);
      if (s <= 0.0f) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const float n = score(x + dx, y + dy);
          // Ties go to the first pixel in raster order.
          const bool before = dy < 0 || (dy == 0 && dx < 0);
          if (n > s || (before && n == s)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) kept.push_back({x, y, s});
    }
  }

  auto by_rank = [](const Candidate& a, const Candidate& b) {
    if (a.s != b.s) return a.s > b.s;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  };

  if (kept.size() > max_corners) {
    const int cells = std::max(1, opts.grid_cells);
    std::vector<std::vector<Candidate>> buckets(static_cast<std::size_t>(cells * cells));
    for (const auto& c : kept) {
      const int cx = std::min(cells - 1, c.x * cells / w);
      const int cy = std::min(cells - 1, c.y * cells / h);
      buckets[static_cast<std::size_t>(cy * cells + cx)].push_back(c);
    }
    for (auto& b : buckets) std::sort(b.begin(), b.end(), by_rank);
    std::vector<Candidate> selected;
    selected.reserve(max_corners);
    for (std::size_t rank = 0; selected.size() < max_corners; ++rank) {
      std::vector<Candidate> round;
      for (const auto& b : buckets) {
        if (rank < b.size()) round.push_back(b[rank]);
      }
      if (round.empty()) break;
      std::sort(round.begin(), round.end(), by_rank);
      for (const auto& c : round) {
        if (selected.size() == max_corners) break;
        selected.push_back(c);
      }
    }
    kept = std::move(selected);
  }
  std::sort(kept.begin(), kept.end(), by_rank);

  out.reserve(kept.size());
  for (const auto& c : kept) {
    const double sc = detail::fast_sad(img, c.x, c.y, threshold);
    const double dx = detail::parabola_offset(detail::fast_sad(img, c.x - 1, c.y, threshold), sc,
                                              detail::fast_sad(img, c.x + 1, c.y, threshold));
    const double dy = detail::parabola_offset(detail::fast_sad(img, c.x, c.y - 1, threshold), sc,
                                              detail::fast_sad(img, c.x, c.y + 1, threshold));
    out.push_back({Vec2(c.x + dx, c.y + dy), static_cast<double>(c.s), 0});
  }
  return out;
}

// ---------------------------------------------------------------------------
// BRIEF

inline constexpr int kBriefPatchSize = 31;
inline constexpr int kBriefSmoothingSize = 9;
/// Distance from the corner to the border needed by describe_brief.
inline constexpr int kBriefMargin = kBriefPatchSize / 2 + kBriefSmoothingSize / 2;

struct Descriptor {
  std::array<std::uint64_t, 4> bits{};

  bool test(int i) const { return (bits[static_cast<std::size_t>(i >> 6)] >> (i & 63)) & 1u; }
  friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

inline int hamming_distance(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < 4; ++i) d += std::popcount(a.bits[i] ^ b.bits[i]);
  return d;
}

/// Summed-area table with one row/column of zero padding.
class IntegralImage {
 public:
  explicit IntegralImage(const GrayImage& img)
      : width_(img.width()), height_(img.height()),
        sums_(static_cast<std::size_t>(img.width() + 1) * static_cast<std::size_t>(img.height() + 1), 0) {
    const std::size_t stride = static_cast<std::size_t>(width_ + 1);
    for (int y = 0; y < height_; ++y) {
      std::int64_t row = 0;
      for (int x = 0; x < width_; ++x) {
        row += img(x, y);
        sums_[static_cast<std::size_t>(y + 1) * stride + static_cast<std::size_t>(x + 1)] =
            sums_[static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x + 1)] + row;
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }

  /// Sum over the square [x - r, x + r] x [y - r, y + r].
  std::int64_t box_sum(int x, int y, int r) const {
    const std::size_t stride = static_cast<std::size_t>(width_ + 1);
    const auto at = [&](int xx, int yy) {
      return sums_[static_cast<std::size_t>(yy) * stride + static_cast<std::size_t>(xx)];
    };
    return at(x + r + 1, y + r + 1) - at(x - r, y + r + 1) - at(x + r + 1, y - r) + at(x - r, y - r);
  }

 private:
  int width_;
  int height_;
  std::vector<std::int64_t> sums_;
};

inline bool brief_patch_fits(int width, int height, const Vec2& position) {
  const int cx = static_cast<int>(std::lround(position.x()));
  const int cy = static_cast<int>(std::lround(position.y()));
  return cx - kBriefMargin >= 0 && cy - kBriefMargin >= 0 && cx + kBriefMargin < width &&
         cy + kBriefMargin < height;
}

/// 256 comparisons of 9x9 box means at the fixed test pattern around the corner.
inline Descriptor describe_brief(const IntegralImage& integral, const Corner& corner) {
  if (!brief_patch_fits(integral.width(), integral.height(), corner.position)) {
    throw Error(ErrorCode::PatchOutOfBounds, "BRIEF patch leaves the image");
  }
  const int cx = static_cast<int>(std::lround(corner.position.x()));
  const int cy = static_cast<int>(std::lround(corner.position.y()));
  constexpr int r = kBriefSmoothingSize / 2;
  Descriptor d;
  for (std::size_t i = 0; i < detail::kBriefPattern.size(); ++i) {
    const auto& t = detail::kBriefPattern[i];
    const auto a = integral.box_sum(cx + t.x1, cy + t.y1, r);
    const auto b = integral.box_sum(cx + t.x2, cy + t.y2, r);
    if (a < b) d.bits[i >> 6] |= std::uint64_t{1} << (i & 63);
  }
  return d;
}

inline Descriptor describe_brief(const GrayImage& img, const Corner& corner) {
  return describe_brief(IntegralImage(img), corner);
}

inline std::vector<Descriptor> describe_brief(const GrayImage& img, std::span<const Corner> corners) {
  const IntegralImage integral(img);
  std::vector<Descriptor> out;
  out.reserve(corners.size());
  for (const auto& c : corners) out.push_back(describe_brief(integral, c));
  return out;
}

// ---------------------------------------------------------------------------
// Matching

struct DescriptorMatch {
  int query = -1;
  int train = -1;
  int distance = 0;
};

using MatchSet = std::vector<DescriptorMatch>;

inline constexpr int kDefaultMaxDescriptorDistance = 64;

/**
 * Brute-force Hamming matching with a mandatory mutual-best cross-check.
 * Ties resolve to the lowest index. Output is ordered by query index.
 */
inline MatchSet match_descriptors(std::span<const Descriptor> query, std::span<const Descriptor> train,
                                  int max_distance = kDefaultMaxDescriptorDistance) {
  MatchSet out;
  if (query.empty() || train.empty()) return out;
  std::vector<int> dist(query.size() * train.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    for (std::size_t t = 0; t < train.size(); ++t) {
      dist[q * train.size() + t] = hamming_distance(query[q], train[t]);
    }
  }
  std::vector<int> best_query_for_train(train.size(), -1);
  for (std::size_t t = 0; t < train.size(); ++t) {
    int best = std::numeric_limits<int>::max();
    for (std::size_t q = 0; q < query.size(); ++q) {
      if (dist[q * train.size() + t] < best) {
        best = dist[q * train.size() + t];
        best_query_for_train[t] = static_cast<int>(q);
      }
    }
  }
  for (std::size_t q = 0; q < query.size(); ++q) {
    int best = std::numeric_limits<int>::max();
    int best_t = -1;
    for (std::size_t t = 0; t < train.size(); ++t) {
      if (dist[q * train.size() + t] < best) {
        best = dist[q * train.size() + t];
        best_t = static_cast<int>(t);
      }
    }
    if (best_t >= 0 && best <= max_distance &&
        best_query_for_train[static_cast<std::size_t>(best_t)] == static_cast<int>(q)) {
      out.push_back({static_cast<int>(q), best_t, best});
    }
  }
  return out;
}

}  // namespace hsvio
