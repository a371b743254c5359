#pragma once

#include "prif/common.hpp"
#include "prif/geometry.hpp"

#include <string>
#include <string_view>

namespace prif::rays {

using geometry::Ray;

/// How a ray is presented to the network. The anchor is the perpendicular
/// foot, the Plücker moment p x d, or the raw origin respectively.
enum class EncodingMode { perp_foot, plucker, raw };

std::string_view to_string(EncodingMode mode);
EncodingMode parse_encoding_mode(std::string_view name);

struct RayEncoding {
  EncodingMode mode = EncodingMode::perp_foot;
  Vec3 anchor = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

inline constexpr double kUnitTolerance = 1e-4;
inline constexpr double kOnLineTolerance = 1e-4;

/// Throws non_unit_direction when |‖d‖ - 1| > kUnitTolerance, otherwise
/// returns d renormalized.
Vec3 checked_unit(const Vec3& d);

/// Closest point to the origin on the line through p along d: d x (p x d).
Vec3 perpendicular_foot(const Vec3& p, const Vec3& d);

RayEncoding encode_ray(const Ray& ray, EncodingMode mode);

/// Recovers the perpendicular foot from any encoding.
Vec3 foot_of(const RayEncoding& enc);

/// h = s·d + f.
Vec3 hit_point(const Vec3& foot, const Vec3& d, double s);

/// (h - f)·d; throws off_line_point when h is not on the line through f.
double signed_displacement(const Vec3& foot, const Vec3& d, const Vec3& h);

}  // namespace prif::rays
