#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "hsvio/error.hpp"

namespace hsvio {

inline double ns_to_seconds(std::int64_t ns) { return static_cast<double>(ns) / 1e9; }

inline std::int64_t seconds_to_ns(double s) { return static_cast<std::int64_t>(std::llround(s * 1e9)); }

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

/**
 * Line-oriented reader for comma-separated files. Blank lines and lines
 * starting with '#' are skipped; parse failures report the line number.
 */
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string name, char separator = ',')
      : in_(in), name_(std::move(name)), separator_(separator) {}

  bool next(std::vector<std::string_view>& fields) {
    fields.clear();
    while (std::getline(in_, line_)) {
      ++line_number_;
      const std::string_view view = trim(line_);
      if (view.empty() || view.front() == '#') continue;
      std::size_t start = 0;
      while (true) {
        const std::size_t pos = view.find(separator_, start);
        if (pos == std::string_view::npos) {
          fields.push_back(trim(view.substr(start)));
          break;
        }
        fields.push_back(trim(view.substr(start, pos - start)));
        start = pos + 1;
      }
      return true;
    }
    return false;
  }

  std::size_t line_number() const { return line_number_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::MalformedCsv, name_ + " line " + std::to_string(line_number_) + ": " + what);
  }

  std::int64_t to_int64(std::string_view s) const {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("bad integer '" + std::string(s) + "'");
    return v;
  }

  double to_double(std::string_view s) const {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("bad number '" + std::string(s) + "'");
    return v;
  }

 private:
  std::istream& in_;
  std::string name_;
  char separator_;
  std::string line_;
  std::size_t line_number_ = 0;
};

}  // namespace hsvio
