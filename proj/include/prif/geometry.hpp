#pragma once

#include "prif/common.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace prif::geometry {

using Triangle = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  /// Per-vertex rgb in [0,1]; either empty or one entry per vertex.
  std::vector<Vec3> colors;

  bool empty() const { return triangles.empty(); }
  bool has_colors() const { return !colors.empty(); }
  std::uint64_t fingerprint() const;
};

enum class MeshFormat { obj, ply };

struct LoadReport {
  std::size_t degenerate_dropped = 0;
};

/// Loads an ASCII OBJ or PLY file. Polygons are fan-triangulated and zero-area
/// triangles dropped (count reported through `report`).
TriangleMesh load_mesh(const std::string& path, MeshFormat format, LoadReport* report = nullptr);
/// Format picked from the file extension.
TriangleMesh load_mesh(const std::string& path, LoadReport* report = nullptr);

TriangleMesh parse_obj(std::string_view text, LoadReport* report = nullptr);
TriangleMesh parse_ply(std::string_view text, LoadReport* report = nullptr);

void write_mesh_ply(const std::string& path, const TriangleMesh& mesh);
/// ASCII PLY point cloud; colors (if non-empty) must match points and are
/// written as uchar red/green/blue.
void write_point_cloud_ply(const std::string& path, std::span<const Vec3> points,
                           std::span<const Vec3> colors = {});
std::vector<Vec3> read_point_cloud_ply(const std::string& path, std::vector<Vec3>* colors = nullptr);

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

/// Exact minimum enclosing sphere of a point set (Welzl, move-to-front).
Sphere min_enclosing_sphere(std::span<const Vec3> points);

struct Normalized {
  TriangleMesh mesh;
  double scale = 1.0;
  Vec3 center = Vec3::Zero();
};

/// Uniformly scales about the bounding-sphere center so the farthest vertex
/// lands at `target_radius`. Original = normalized / scale + center.
Normalized normalize_mesh(const TriangleMesh& mesh, double target_radius = 0.9);

struct Ray {
  Vec3 origin;
  Vec3 direction;

  Vec3 at(double t) const { return origin + t * direction; }
};

struct Hit {
  double t = 0.0;
  Vec3 point;
  std::uint32_t triangle = 0;
  /// Barycentric weights of vertices 1 and 2.
  double u = 0.0;
  double v = 0.0;
};

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  /// Ray slab test; returns entry distance or nullopt when the box is missed
  /// within [0, t_max].
  std::optional<double> intersect(const Ray& ray, const Vec3& inv_dir, double t_max) const;
  double squared_distance(const Vec3& p) const;
};

/// Median-split bounding volume hierarchy over a mesh's triangles.
class Bvh {
 public:
  static constexpr std::size_t kMaxLeafSize = 8;

  struct Node {
    Aabb box;
    /// Leaf: range [first, first + count) into the triangle permutation.
    /// Interior: children at `first` and `first + 1`, count = 0.
    std::uint32_t first = 0;
    std::uint32_t count = 0;

    bool is_leaf() const { return count > 0; }
  };

  explicit Bvh(const TriangleMesh& mesh);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& permutation() const { return order_; }

 private:
  void build(std::uint32_t node, std::uint32_t first, std::uint32_t count,
             const std::vector<Vec3>& centroids, const std::vector<Aabb>& boxes);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

Bvh build_bvh(const TriangleMesh& mesh);

/// Möller–Trumbore with inclusive edges; t must exceed kMinHitT.
std::optional<Hit> intersect_triangle(const TriangleMesh& mesh, std::uint32_t tri, const Ray& ray);
inline constexpr double kMinHitT = 1e-6;

/// Nearest hit; ties at equal t resolve to the lowest triangle id.
std::optional<Hit> cast_ray(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray);
std::optional<Hit> cast_ray_brute_force(const TriangleMesh& mesh, const Ray& ray);

/// All intersections along the ray (unordered). Used for parity tests.
std::vector<Hit> all_hits(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray);

struct ClosestPoint {
  double squared_distance = 0.0;
  Vec3 point;
  std::uint32_t triangle = 0;
};

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
ClosestPoint closest_point(const Bvh& bvh, const TriangleMesh& mesh, const Vec3& p);
ClosestPoint closest_point_brute_force(const TriangleMesh& mesh, const Vec3& p);

double triangle_area(const TriangleMesh& mesh, std::uint32_t tri);

/// Area-weighted uniform surface samples; deterministic for a fixed seed.
/// When `colors_out` is set and the mesh has vertex colors, the interpolated
/// color of each sample is appended.
std::vector<Vec3> sample_surface_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                                        std::vector<Vec3>* colors_out = nullptr);

/// Barycentric interpolation of vertex colors at a hit.
Vec3 color_at(const TriangleMesh& mesh, const Hit& hit);

struct Camera {
  Vec3 position = Vec3::Zero();
  /// Camera-to-world; columns are the camera x (right), y (down) and z (backward) axes.
  Mat3 rotation = Mat3::Identity();
  double fov_y = 0.0;
  int width = 1;
  int height = 1;

  /// Unit-free pinhole focal length in pixels.
  double focal_pixels() const;
  /// Direction in camera coordinates (x right, y down, looking along -z), not normalized.
  Vec3 pixel_direction_camera(double px, double py) const;
};

inline constexpr double kDefaultTargetRadius = 0.9;
inline constexpr double kDefaultRigRadius = 2.5;
/// Vertical field of view; wide enough for a 0.9-radius object seen from 2.5.
inline constexpr double kDefaultFovDegrees = 50.0;

/// Builds a camera at `position` looking at `target`. Up is +z unless the view
/// axis is within 1e-3 of +-z, then +x.
Camera look_at(const Vec3& position, const Vec3& target, double fov_y, int width, int height);

/// Cameras on a Fibonacci lattice of the given radius, all facing the origin.
std::vector<Camera> fibonacci_camera_rig(int n, double radius, double fov_y, int width, int height);

/// Pinhole ray through the center of pixel (px, py).
Ray camera_ray(const Camera& cam, int px, int py);

double degrees_to_radians(double deg);

}  // namespace prif::geometry
