#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hsvio/error.hpp"
#include "hsvio/geometry/lie.hpp"
#include "hsvio/io/csv.hpp"

namespace hsvio {

/**
 * Ordered `key = value` store. One entry per line; '#' starts a comment.
 * Later duplicates overwrite earlier ones.
 */
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, const std::string& name = "config") {
    KeyValueFile out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const auto hash = line.find('#');
      std::string_view view = trim(std::string_view(line).substr(0, hash));
      if (view.empty()) continue;
      const auto eq = view.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorCode::ConfigInvalid, name + " line " + std::to_string(number) + ": expected key = value");
      }
      const std::string key(trim(view.substr(0, eq)));
      if (key.empty()) throw Error(ErrorCode::ConfigInvalid, name + " line " + std::to_string(number) + ": empty key");
      out.set(key, std::string(trim(view.substr(eq + 1))));
    }
    return out;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path);
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  }

 private:
  std::map<std::string, std::string> values_;
};

inline double parse_double(std::string_view s, const std::string& key) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ConfigInvalid, key + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

inline std::int64_t parse_int(std::string_view s, const std::string& key) {
  s = trim(s);
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ConfigInvalid, key + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

inline bool parse_bool(std::string_view s, const std::string& key) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorCode::ConfigInvalid, key + ": bad boolean '" + std::string(s) + "'");
}

inline std::vector<double> parse_doubles(std::string_view s, const std::string& key) {
  std::vector<double> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, key));
  return out;
}

inline Vec3 parse_vec3(std::string_view s, const std::string& key) {
  const auto v = parse_doubles(s, key);
  if (v.size() != 3) throw Error(ErrorCode::ConfigInvalid, key + ": expected 3 numbers");
  return {v[0], v[1], v[2]};
}

inline std::string format_vec3(const Vec3& v) {
  return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
}

/// Pose as "tx ty tz qx qy qz qw".
inline Pose parse_pose(std::string_view s, const std::string& key) {
  const auto v = parse_doubles(s, key);
  if (v.size() != 7) throw Error(ErrorCode::ConfigInvalid, key + ": expected tx ty tz qx qy qz qw");
  return Pose(Rotation(Eigen::Quaterniond(v[6], v[3], v[4], v[5])), Vec3(v[0], v[1], v[2]));
}

inline std::string format_pose(const Pose& p) {
  const auto& q = p.rotation().quaternion();
  return format_vec3(p.translation()) + " " + format_double(q.x()) + " " + format_double(q.y()) + " " +
         format_double(q.z()) + " " + format_double(q.w());
}

}  // namespace hsvio
