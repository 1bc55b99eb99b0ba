#pragma once

// Planar workspace with convex obstacles and a simulated range scanner.
//
// Maps load from a strict JSON schema: unknown keys and malformed
// geometry are hard errors with file:line positions where possible.
// Scans are cast from world-frame origins over a full fan of rays,
// each range clamped to the scanner ceiling: an entry strictly below
// max_range is a genuine return.

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace cbfnav {

struct MapFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when the simulated plant reaches a physically invalid state.
struct SimulationFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/* ------------------------------------------------------------ shapes */

struct Circle {
  Eigen::Vector2d center;
  double radius = 0.0;
};

// Vertices wind counter-clockwise and must be strictly convex.
struct ConvexPolygon {
  std::vector<Eigen::Vector2d> vertices;
};

using Shape = std::variant<Circle, ConvexPolygon>;

struct WorkspaceBounds {
  Eigen::Vector2d lo{0.0, 0.0};
  Eigen::Vector2d hi{0.0, 0.0};

  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() &&
           p.y() <= hi.y();
  }
};

struct EnvironmentMap {
  std::string name;
  WorkspaceBounds bounds;
  std::vector<Shape> obstacles;
};

inline bool point_in_circle(const Eigen::Vector2d& p, const Circle& c) {
  return (p - c.center).squaredNorm() <= c.radius * c.radius;
}

inline bool point_in_polygon(const Eigen::Vector2d& p,
                             const ConvexPolygon& poly) {
  const std::size_t n = poly.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = poly.vertices[i];
    const Eigen::Vector2d e = poly.vertices[(i + 1) % n] - a;
    if (e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x()) < 0.0) return false;
  }
  return true;
}

inline bool point_in_shape(const Eigen::Vector2d& p, const Shape& s) {
  if (const Circle* c = std::get_if<Circle>(&s)) return point_in_circle(p, *c);
  return point_in_polygon(p, std::get<ConvexPolygon>(s));
}

inline bool point_in_obstacle(const Eigen::Vector2d& p,
                              const EnvironmentMap& map) {
  for (const Shape& s : map.obstacles) {
    if (point_in_shape(p, s)) return true;
  }
  return false;
}

/* ------------------------------------------------------ ray casting */

// Smallest t >= 0 with origin + t dir on the circle; dir is unit.
// A grazing tangent counts as a hit.  From inside, the exit point.
inline std::optional<double> ray_circle_intersection(
    const Eigen::Vector2d& origin, const Eigen::Vector2d& dir,
    const Circle& c) {
  const Eigen::Vector2d w = origin - c.center;
  const double b = 2.0 * dir.dot(w);
  const double c0 = w.squaredNorm() - c.radius * c.radius;
  const double disc = b * b - 4.0 * c0;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  double t = (-b - sq) / 2.0;
  if (t < 0.0) t = (-b + sq) / 2.0;
  if (t < 0.0) return std::nullopt;
  return t;
}

inline std::optional<double> ray_polygon_intersection(
    const Eigen::Vector2d& origin, const Eigen::Vector2d& dir,
    const ConvexPolygon& poly) {
  std::optional<double> best;
  const std::size_t n = poly.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& p = poly.vertices[i];
    const Eigen::Vector2d e = poly.vertices[(i + 1) % n] - p;
    const double den = dir.x() * e.y() - dir.y() * e.x();
    if (std::abs(den) < 1e-14) continue;  // ray parallel to this edge
    const Eigen::Vector2d w = p - origin;
    const double t = (w.x() * e.y() - w.y() * e.x()) / den;
    const double s = -(dir.x() * w.y() - dir.y() * w.x()) / den;
    if (t >= 0.0 && s >= -1e-12 && s <= 1.0 + 1e-12) {
      if (!best || t < *best) best = t;
    }
  }
  return best;
}

inline std::optional<double> ray_shape_intersection(
    const Eigen::Vector2d& origin, const Eigen::Vector2d& dir,
    const Shape& s) {
  if (const Circle* c = std::get_if<Circle>(&s)) {
    return ray_circle_intersection(origin, dir, *c);
  }
  return ray_polygon_intersection(origin, dir, std::get<ConvexPolygon>(s));
}

/* ---------------------------------------------------------- scanner */

struct LidarConfig {
  double max_range = 5.0;
  int ray_count = 100;
  double fov = 2.0 * std::numbers::pi;
};

struct RawScan {
  Eigen::Vector2d origin{0.0, 0.0};
  double max_range = 0.0;
  std::vector<double> bearings;  // world-frame ray angles
  std::vector<double> ranges;    // clamped; < max_range means a return
};

inline RawScan cast_scan(const EnvironmentMap& map, const LidarConfig& lidar,
                         const Eigen::Vector2d& origin) {
  if (lidar.ray_count < 1 || lidar.max_range <= 0.0 || lidar.fov <= 0.0) {
    throw std::invalid_argument("cast_scan: bad scanner configuration");
  }
  if (!map.bounds.contains(origin)) {
    throw SimulationFault("scan origin left the workspace");
  }
  if (point_in_obstacle(origin, map)) {
    throw SimulationFault("scan origin is inside an obstacle");
  }
  RawScan scan;
  scan.origin = origin;
  scan.max_range = lidar.max_range;
  scan.bearings.resize(lidar.ray_count);
  scan.ranges.resize(lidar.ray_count);
  for (int j = 0; j < lidar.ray_count; ++j) {
    const double ang = lidar.fov * j / lidar.ray_count;
    const Eigen::Vector2d dir(std::cos(ang), std::sin(ang));
    double r = lidar.max_range;
    for (const Shape& s : map.obstacles) {
      if (auto t = ray_shape_intersection(origin, dir, s); t && *t < r) {
        r = *t;
      }
    }
    scan.bearings[j] = ang;
    scan.ranges[j] = r;
  }
  return scan;
}

/* ------------------------------------------------------- map loading */

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

// Strict key check: everything present must be listed.
inline void require_keys(const nlohmann::json& obj,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional,
                         const std::string& where) {
  for (const char* key : required) {
    if (!obj.contains(key)) {
      throw MapFormatError(where + ": missing key \"" + key + "\"");
    }
  }
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    auto known = [&](std::initializer_list<const char*> list) {
      for (const char* k : list) {
        if (key == k) return true;
      }
      return false;
    };
    if (!known(required) && !known(optional)) {
      throw MapFormatError(where + ": unknown key \"" + key + "\"");
    }
  }
}

inline Eigen::Vector2d parse_vec2(const nlohmann::json& arr,
                                  const std::string& where) {
  if (!arr.is_array() || arr.size() != 2 || !arr[0].is_number() ||
      !arr[1].is_number()) {
    throw MapFormatError(where + ": expected a pair of numbers");
  }
  return {arr[0].get<double>(), arr[1].get<double>()};
}

inline void validate_polygon(const ConvexPolygon& poly,
                             const std::string& where) {
  const std::size_t n = poly.vertices.size();
  if (n < 3) {
    throw MapFormatError(where + ": polygon needs at least 3 vertices");
  }
  int negative = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d a = poly.vertices[(i + 1) % n] - poly.vertices[i];
    const Eigen::Vector2d b =
        poly.vertices[(i + 2) % n] - poly.vertices[(i + 1) % n];
    const double cross = a.x() * b.y() - a.y() * b.x();
    if (cross < 1e-12) ++negative;
  }
  if (negative == static_cast<int>(n)) {
    throw MapFormatError(where + ": vertices wind clockwise");
  }
  if (negative > 0) {
    throw MapFormatError(where + ": polygon is not strictly convex");
  }
}

}  // namespace detail

inline EnvironmentMap load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MapFormatError("cannot open map file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw MapFormatError(path + ":" +
                         std::to_string(detail::line_of_offset(text, err.byte)) +
                         ": " + err.what());
  }
  if (!doc.is_object()) throw MapFormatError(path + ": expected an object");
  detail::require_keys(doc, {"workspace", "obstacles"}, {"name"}, path);

  EnvironmentMap map;
  map.name = doc.value("name", std::string{});

  const nlohmann::json& ws = doc["workspace"];
  detail::require_keys(ws, {"min", "max"}, {}, path + ": workspace");
  map.bounds.lo = detail::parse_vec2(ws["min"], path + ": workspace.min");
  map.bounds.hi = detail::parse_vec2(ws["max"], path + ": workspace.max");
  if (!(map.bounds.lo.x() < map.bounds.hi.x()) ||
      !(map.bounds.lo.y() < map.bounds.hi.y())) {
    throw MapFormatError(path + ": workspace min must be below max");
  }

  if (!doc["obstacles"].is_array()) {
    throw MapFormatError(path + ": obstacles must be an array");
  }
  int index = 0;
  for (const nlohmann::json& item : doc["obstacles"]) {
    const std::string where = path + ": obstacle " + std::to_string(index);
    if (!item.is_object() || !item.contains("type")) {
      throw MapFormatError(where + ": expected an object with a type");
    }
    const std::string type = item["type"].get<std::string>();
    if (type == "circle") {
      detail::require_keys(item, {"type", "center", "radius"}, {}, where);
      Circle c;
      c.center = detail::parse_vec2(item["center"], where + ".center");
      if (!item["radius"].is_number()) {
        throw MapFormatError(where + ".radius: expected a number");
      }
      c.radius = item["radius"].get<double>();
      if (c.radius <= 0.0) {
        throw MapFormatError(where + ".radius: must be positive");
      }
      map.obstacles.emplace_back(c);
    } else if (type == "polygon") {
      detail::require_keys(item, {"type", "vertices"}, {}, where);
      if (!item["vertices"].is_array()) {
        throw MapFormatError(where + ".vertices: expected an array");
      }
      ConvexPolygon poly;
      for (const nlohmann::json& v : item["vertices"]) {
        poly.vertices.push_back(detail::parse_vec2(v, where + ".vertices"));
      }
      detail::validate_polygon(poly, where);
      map.obstacles.emplace_back(std::move(poly));
    } else {
      throw MapFormatError(where + ": unknown type \"" + type + "\"");
    }
    ++index;
  }
  return map;
}

}  // namespace cbfnav
