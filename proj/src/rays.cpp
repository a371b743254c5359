#include "prif/rays.hpp"

#include <cmath>

namespace prif::rays {

std::string_view to_string(EncodingMode mode) {
  switch (mode) {
    case EncodingMode::perp_foot: return "perp_foot";
    case EncodingMode::plucker: return "plucker";
    case EncodingMode::raw: return "raw";
  }
  return "unknown";
}

EncodingMode parse_encoding_mode(std::string_view name) {
  if (name == "perp_foot" || name == "foot") return EncodingMode::perp_foot;
  if (name == "plucker") return EncodingMode::plucker;
  if (name == "raw") return EncodingMode::raw;
  fail(ErrorKind::invalid_argument, "unknown encoding mode '" + std::string(name) + "'");
}

Vec3 checked_unit(const Vec3& d) {
  const double n = d.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTolerance) {
    fail(ErrorKind::non_unit_direction, "direction norm " + std::to_string(n));
  }
  return d / n;
}

Vec3 perpendicular_foot(const Vec3& p, const Vec3& d) {
  const Vec3 u = checked_unit(d);
  return u.cross(p.cross(u));
}

RayEncoding encode_ray(const Ray& ray, EncodingMode mode) {
  const Vec3 d = checked_unit(ray.direction);
  RayEncoding enc;
  enc.mode = mode;
  enc.direction = d;
  switch (mode) {
    case EncodingMode::perp_foot: enc.anchor = d.cross(ray.origin.cross(d)); break;
    case EncodingMode::plucker: enc.anchor = ray.origin.cross(d); break;
    case EncodingMode::raw: enc.anchor = ray.origin; break;
  }
  return enc;
}

Vec3 foot_of(const RayEncoding& enc) {
  const Vec3& d = enc.direction;
  switch (enc.mode) {
    case EncodingMode::perp_foot: return enc.anchor;
    case EncodingMode::plucker: return d.cross(enc.anchor);
    case EncodingMode::raw: return enc.anchor - enc.anchor.dot(d) * d;
  }
  return enc.anchor;
}

Vec3 hit_point(const Vec3& foot, const Vec3& d, double s) { return s * d + foot; }

double signed_displacement(const Vec3& foot, const Vec3& d, const Vec3& h) {
  const Vec3 rel = h - foot;
  const double s = rel.dot(d);
  if ((rel - s * d).norm() >= kOnLineTolerance) {
    fail(ErrorKind::off_line_point, "point is " + std::to_string((rel - s * d).norm()) + " off the ray line");
  }
  return s;
}

}  // namespace prif::rays
