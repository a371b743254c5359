#include "prif/geometry.hpp"

#include <cmath>
#include <numbers>

namespace prif::geometry {

double degrees_to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

double Camera::focal_pixels() const { return 0.5 * height / std::tan(0.5 * fov_y); }

Vec3 Camera::pixel_direction_camera(double px, double py) const {
  const double f = focal_pixels();
  return {(px - 0.5 * width) / f, (py - 0.5 * height) / f, -1.0};
}

Camera look_at(const Vec3& position, const Vec3& target, double fov_y, int width, int height) {
  if (width < 1 || height < 1) fail(ErrorKind::invalid_argument, "camera resolution must be >= 1");
  if (!(fov_y > 0.0 && fov_y < std::numbers::pi)) fail(ErrorKind::invalid_argument, "fov must be in (0, pi)");
  const Vec3 forward = (target - position).normalized();
  const Vec3 up = std::abs(std::abs(forward.z()) - 1.0) < 1e-3 ? Vec3::UnitX() : Vec3::UnitZ();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 true_up = right.cross(forward);
  Camera cam;
  cam.position = position;
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = -true_up;
  cam.rotation.col(2) = -forward;
  cam.fov_y = fov_y;
  cam.width = width;
  cam.height = height;
  return cam;
}

std::vector<Camera> fibonacci_camera_rig(int n, double radius, double fov_y, int width, int height) {
  if (n < 1) fail(ErrorKind::invalid_argument, "rig needs at least one camera");
  if (!(radius > 0.0)) fail(ErrorKind::invalid_argument, "rig radius must be positive");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Camera> rig;
  rig.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double ring = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = i * golden_angle;
    const Vec3 dir(ring * std::cos(phi), ring * std::sin(phi), z);
    rig.push_back(look_at(radius * dir.normalized(), Vec3::Zero(), fov_y, width, height));
  }
  return rig;
}

Ray camera_ray(const Camera& cam, int px, int py) {
  if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) {
    fail(ErrorKind::out_of_range, "pixel (" + std::to_string(px) + ", " + std::to_string(py) + ") outside " +
                                      std::to_string(cam.width) + "x" + std::to_string(cam.height));
  }
  const Vec3 local = cam.pixel_direction_camera(px + 0.5, py + 0.5);
  return {cam.position, (cam.rotation * local).normalized()};
}

}  // namespace prif::geometry
