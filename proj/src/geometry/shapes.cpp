#include "prif/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace prif::geometry {

TriangleMesh make_icosphere(int level, double radius, const Vec3& center) {
  if (level < 0 || level > 8) fail(ErrorKind::invalid_level, "icosphere level must be in [0, 8]");
  if (!(radius > 0.0)) fail(ErrorKind::invalid_argument, "icosphere radius must be positive");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const auto ab = midpoint(tri[0], tri[1]);
      const auto bc = midpoint(tri[1], tri[2]);
      const auto ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  TriangleMesh mesh;
  mesh.vertices.reserve(v.size());
  for (const auto& p : v) mesh.vertices.push_back(center + radius * p);
  mesh.triangles = std::move(f);
  return mesh;
}

TriangleMesh make_step(double height, double half_extent) {
  if (!(half_extent > 0.0)) fail(ErrorKind::invalid_argument, "step extent must be positive");
  const double e = half_extent;
  TriangleMesh mesh;
  mesh.vertices = {{-e, -e, 0}, {0, -e, 0}, {0, e, 0}, {-e, e, 0},
                   {0, -e, height}, {e, -e, height}, {e, e, height}, {0, e, height}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}, {4, 5, 6}, {4, 6, 7}};
  return mesh;
}

TriangleMesh merge_meshes(std::span<const TriangleMesh> parts) {
  TriangleMesh out;
  const bool colors = !parts.empty() && std::all_of(parts.begin(), parts.end(), [](const auto& m) { return m.has_colors(); });
  for (const auto& m : parts) {
    const auto base = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
    if (colors) out.colors.insert(out.colors.end(), m.colors.begin(), m.colors.end());
    for (const auto& t : m.triangles) out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return out;
}

TriangleMesh make_lobed(int level) {
  const TriangleMesh parts[] = {
      make_icosphere(level, 1.0),
      make_icosphere(level, 0.45, Vec3(1.05, 0.0, 0.2)),
      make_icosphere(level, 0.35, Vec3(-0.3, 0.95, -0.35)),
  };
  return merge_meshes(parts);
}

void paint_by_position(TriangleMesh& mesh) {
  double r = 0.0;
  for (const auto& p : mesh.vertices) r = std::max(r, p.cwiseAbs().maxCoeff());
  if (r == 0.0) r = 1.0;
  mesh.colors.clear();
  for (const auto& p : mesh.vertices) mesh.colors.push_back((Vec3::Constant(0.5) + 0.5 * p / r).cwiseMax(0.0).cwiseMin(1.0));
}

}  // namespace prif::geometry
