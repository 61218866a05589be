#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hsvio/error.hpp"
#include "hsvio/geometry/lie.hpp"

namespace hsvio {

/// Row-major single-channel image.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 0 || height < 0) throw Error(ErrorCode::OutOfBounds, "negative image size");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }
  const std::vector<T>& samples() const { return data_; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Image<std::uint8_t>;
using FloatImage = Image<float>;

inline FloatImage to_float(const GrayImage& img) {
  FloatImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = static_cast<float>(img.data()[i]);
  return out;
}

/// True when bilinear sampling at p needs no pixels outside the image.
template <typename T>
bool can_sample(const Image<T>& img, const Vec2& p) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= img.width() - 1 && p.y() <= img.height() - 1;
}

/// Bilinear interpolation of the four neighbours of p.
template <typename T>
double sample_bilinear(const Image<T>& img, const Vec2& p) {
  if (!can_sample(img, p)) throw Error(ErrorCode::OutOfBounds, "bilinear sample outside the image");
  const int x0 = static_cast<int>(std::floor(p.x()));
  const int y0 = static_cast<int>(std::floor(p.y()));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double ax = p.x() - x0;
  const double ay = p.y() - y0;
  const double top = (1.0 - ax) * img(x0, y0) + ax * img(x1, y0);
  const double bottom = (1.0 - ax) * img(x0, y1) + ax * img(x1, y1);
  return (1.0 - ay) * top + ay * bottom;
}

/// Unchecked variant for inner loops whose bounds were validated up front.
template <typename T>
inline double sample_bilinear_unchecked(const Image<T>& img, double x, double y) {
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1.0 - ax) * img(x0, y0) + ax * img(x1, y0);
  const double bottom = (1.0 - ax) * img(x0, y1) + ax * img(x1, y1);
  return (1.0 - ay) * top + ay * bottom;
}

template <typename T>
bool can_take_gradient(const Image<T>& img, const Vec2& p) {
  return p.x() >= 1.0 && p.y() >= 1.0 && p.x() <= img.width() - 2 && p.y() <= img.height() - 2;
}

/// Central differences of bilinear samples, in intensity per pixel.
template <typename T>
Vec2 gradient(const Image<T>& img, const Vec2& p) {
  if (!can_take_gradient(img, p)) throw Error(ErrorCode::OutOfBounds, "gradient needs a 1 px border");
  return {0.5 * (sample_bilinear_unchecked(img, p.x() + 1.0, p.y()) -
                 sample_bilinear_unchecked(img, p.x() - 1.0, p.y())),
          0.5 * (sample_bilinear_unchecked(img, p.x(), p.y() + 1.0) -
                 sample_bilinear_unchecked(img, p.x(), p.y() - 1.0))};
}

// ---------------------------------------------------------------------------
// Binary PGM (P5, maxval 255)

namespace detail {

inline std::string next_pgm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      tok.push_back(c);
      break;
    }
  }
  while (in.get(c)) {
    if (std::isspace(static_cast<unsigned char>(c))) break;
    tok.push_back(c);
  }
  return tok;
}

}  // namespace detail

inline GrayImage decode_pgm(std::istream& in) {
  if (detail::next_pgm_token(in) != "P5") throw Error(ErrorCode::IoError, "not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::next_pgm_token(in));
    h = std::stoi(detail::next_pgm_token(in));
    maxval = std::stoi(detail::next_pgm_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::IoError, "malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorCode::IoError, "unsupported PGM header");
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.size())) {
    throw Error(ErrorCode::IoError, "truncated PGM payload");
  }
  return img;
}

inline void encode_pgm(std::ostream& out, const GrayImage& img) {
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path);
  return decode_pgm(in);
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  encode_pgm(out, img);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace hsvio
