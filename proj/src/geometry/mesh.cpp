#include "prif/geometry.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <list>
#include <numeric>
#include <random>

namespace prif::geometry {

std::uint64_t TriangleMesh::fingerprint() const {
  auto h = fnv1a(vertices.data(), vertices.size() * sizeof(Vec3));
  h = fnv1a(triangles.data(), triangles.size() * sizeof(Triangle), h);
  return fnv1a(colors.data(), colors.size() * sizeof(Vec3), h);
}

namespace {

bool sphere_contains(const Sphere& s, const Vec3& p) {
  if (s.radius < 0.0) return false;
  const double r2 = s.radius * s.radius;
  return (p - s.center).squaredNorm() <= r2 * (1.0 + 1e-12) + 1e-24;
}

Sphere two_point(const Vec3& a, const Vec3& b) { return {(a + b) * 0.5, (b - a).norm() * 0.5}; }

std::optional<Sphere> circumsphere3(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 n = ab.cross(ac);
  const double n2 = n.squaredNorm();
  if (n2 <= 1e-30 * ab.squaredNorm() * ac.squaredNorm()) return std::nullopt;
  const Vec3 offset = (ac.squaredNorm() * n.cross(ab) + ab.squaredNorm() * ac.cross(n)) / (2.0 * n2);
  return Sphere{a + offset, offset.norm()};
}

std::optional<Sphere> circumsphere4(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  Mat3 m;
  m.row(0) = (b - a).transpose();
  m.row(1) = (c - a).transpose();
  m.row(2) = (d - a).transpose();
  const double det = m.determinant();
  const double scale = (b - a).norm() * (c - a).norm() * (d - a).norm();
  if (std::abs(det) <= 1e-14 * scale) return std::nullopt;
  const Vec3 rhs(0.5 * (b - a).squaredNorm(), 0.5 * (c - a).squaredNorm(), 0.5 * (d - a).squaredNorm());
  const Vec3 offset = m.partialPivLu().solve(rhs);
  return Sphere{a + offset, offset.norm()};
}

/// Smallest sphere with all support points on its boundary; degenerate
/// configurations fall back to the smallest sphere through a subset that still
/// encloses every support point.
Sphere sphere_from_support(const std::vector<Vec3>& r) {
  switch (r.size()) {
    case 0: return {Vec3::Zero(), -1.0};
    case 1: return {r[0], 0.0};
    case 2: return two_point(r[0], r[1]);
    default: break;
  }
  std::optional<Sphere> s = r.size() == 3 ? circumsphere3(r[0], r[1], r[2])
                                          : circumsphere4(r[0], r[1], r[2], r[3]);
  if (s) return *s;
  Sphere best{Vec3::Zero(), std::numeric_limits<double>::infinity()};
  auto consider = [&](const Sphere& cand) {
    if (cand.radius >= best.radius) return;
    for (const auto& p : r) {
      if (!sphere_contains(cand, p)) return;
    }
    best = cand;
  };
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = i + 1; j < r.size(); ++j) {
      consider(two_point(r[i], r[j]));
      for (std::size_t k = j + 1; k < r.size(); ++k) {
        if (auto c = circumsphere3(r[i], r[j], r[k])) consider(*c);
      }
    }
  }
  return best;
}

Sphere move_to_front(std::list<Vec3>& pts, std::list<Vec3>::iterator end, std::vector<Vec3>& support) {
  Sphere s = sphere_from_support(support);
  if (support.size() == 4) return s;
  for (auto it = pts.begin(); it != end;) {
    auto cur = it++;
    if (!sphere_contains(s, *cur)) {
      support.push_back(*cur);
      s = move_to_front(pts, cur, support);
      support.pop_back();
      if (cur != pts.begin()) pts.splice(pts.begin(), pts, cur);
    }
  }
  return s;
}

}  // namespace

Sphere min_enclosing_sphere(std::span<const Vec3> points) {
  if (points.empty()) fail(ErrorKind::empty_mesh, "no points");
  std::vector<Vec3> shuffled(points.begin(), points.end());
  std::mt19937_64 rng(0x5eed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::list<Vec3> pts(shuffled.begin(), shuffled.end());
  std::vector<Vec3> support;
  // One extra pass guards against points rejected by rounding in the last
  // support change.
  Sphere s = move_to_front(pts, pts.end(), support);
  for (const auto& p : points) {
    const double d = (p - s.center).norm();
    if (d > s.radius) s.radius = d;
  }
  return s;
}

Normalized normalize_mesh(const TriangleMesh& mesh, double target_radius) {
  if (mesh.vertices.empty() || mesh.triangles.empty()) fail(ErrorKind::empty_mesh, "cannot normalize an empty mesh");
  if (!(target_radius > 0.0)) fail(ErrorKind::invalid_argument, "target_radius must be positive");
  const Sphere bound = min_enclosing_sphere(mesh.vertices);
  Normalized out;
  out.center = bound.center;
  double max_norm = 0.0;
  for (const auto& v : mesh.vertices) max_norm = std::max(max_norm, (v - bound.center).norm());
  if (max_norm <= 0.0) fail(ErrorKind::empty_mesh, "mesh has zero extent");
  out.scale = target_radius / max_norm;
  out.mesh = mesh;
  for (auto& v : out.mesh.vertices) v = (v - bound.center) * out.scale;
  return out;
}

double triangle_area(const TriangleMesh& mesh, std::uint32_t tri) {
  const auto& t = mesh.triangles[tri];
  const Vec3& a = mesh.vertices[t[0]];
  return 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
}

Vec3 color_at(const TriangleMesh& mesh, const Hit& hit) {
  if (!mesh.has_colors()) return Vec3::Zero();
  const auto& t = mesh.triangles[hit.triangle];
  return (1.0 - hit.u - hit.v) * mesh.colors[t[0]] + hit.u * mesh.colors[t[1]] + hit.v * mesh.colors[t[2]];
}

std::vector<Vec3> sample_surface_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                                        std::vector<Vec3>* colors_out) {
  if (mesh.empty()) fail(ErrorKind::empty_mesh, "cannot sample an empty mesh");
  if (n == 0) fail(ErrorKind::invalid_argument, "sample count must be >= 1");
  std::vector<double> cdf(mesh.triangles.size());
  double total = 0.0;
  for (std::uint32_t i = 0; i < mesh.triangles.size(); ++i) {
    total += triangle_area(mesh, i);
    cdf[i] = total;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double pick = uni(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    const auto tri = static_cast<std::uint32_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), cdf.size() - 1));
    const double r1 = std::sqrt(uni(rng));
    const double r2 = uni(rng);
    const double u = r1 * (1.0 - r2);
    const double v = r1 * r2;
    const auto& t = mesh.triangles[tri];
    const Vec3& a = mesh.vertices[t[0]];
    out.push_back(a + u * (mesh.vertices[t[1]] - a) + v * (mesh.vertices[t[2]] - a));
    if (colors_out && mesh.has_colors()) {
      colors_out->push_back((1.0 - u - v) * mesh.colors[t[0]] + u * mesh.colors[t[1]] + v * mesh.colors[t[2]]);
    }
  }
  return out;
}

}  // namespace prif::geometry
