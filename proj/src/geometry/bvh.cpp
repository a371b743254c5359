#include "prif/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prif::geometry {

std::optional<double> Aabb::intersect(const Ray& ray, const Vec3& inv_dir, double t_max) const {
  double t_near = 0.0;
  double t_far = t_max;
  for (int a = 0; a < 3; ++a) {
    if (ray.direction[a] == 0.0) {
      if (ray.origin[a] < lo[a] || ray.origin[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t0 = (lo[a] - ray.origin[a]) * inv_dir[a];
    double t1 = (hi[a] - ray.origin[a]) * inv_dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  // Slack keeps grazing hits on box faces from being culled by rounding.
  const double slack = 1e-9 * (1.0 + std::abs(t_far));
  if (t_near > t_far + slack) return std::nullopt;
  return t_near;
}

double Aabb::squared_distance(const Vec3& p) const {
  const Vec3 below = (lo - p).cwiseMax(0.0);
  const Vec3 above = (p - hi).cwiseMax(0.0);
  return (below + above).squaredNorm();
}

Bvh::Bvh(const TriangleMesh& mesh) {
  if (mesh.empty()) fail(ErrorKind::empty_mesh, "cannot build a BVH over an empty mesh");
  const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  std::vector<Vec3> centroids(n);
  std::vector<Aabb> boxes(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (auto vi : mesh.triangles[i]) {
      if (vi >= mesh.vertices.size()) fail(ErrorKind::invalid_argument, "triangle index out of range");
      boxes[i].grow(mesh.vertices[vi]);
    }
    centroids[i] = (boxes[i].lo + boxes[i].hi) * 0.5;
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0U);
  nodes_.reserve(2 * n);
  nodes_.emplace_back();
  build(0, 0, n, centroids, boxes);
}

void Bvh::build(std::uint32_t node, std::uint32_t first, std::uint32_t count, const std::vector<Vec3>& centroids,
                const std::vector<Aabb>& boxes) {
  Aabb box;
  Aabb centroid_box;
  for (std::uint32_t i = first; i < first + count; ++i) {
    box.grow(boxes[order_[i]]);
    centroid_box.grow(centroids[order_[i]]);
  }
  nodes_[node].box = box;
  const Vec3 extent = centroid_box.hi - centroid_box.lo;
  if (count <= kMaxLeafSize || extent.maxCoeff() <= 0.0) {
    // Identical centroids cannot be split by position; chop the range instead
    // so leaves still respect the size bound.
    if (count > kMaxLeafSize) {
      const std::uint32_t half = count / 2;
      const auto left = static_cast<std::uint32_t>(nodes_.size());
      nodes_[node].first = left;
      nodes_[node].count = 0;
      nodes_.emplace_back();
      nodes_.emplace_back();
      build(left, first, half, centroids, boxes);
      build(left + 1, first + half, count - half, centroids, boxes);
      return;
    }
    nodes_[node].first = first;
    nodes_[node].count = count;
    return;
  }
  int axis = 0;
  extent.maxCoeff(&axis);
  const std::uint32_t half = count / 2;
  auto begin = order_.begin() + first;
  std::nth_element(begin, begin + half, begin + count, [&](std::uint32_t a, std::uint32_t b) {
    if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
    return a < b;
  });
  const auto left = static_cast<std::uint32_t>(nodes_.size());
  nodes_[node].first = left;
  nodes_[node].count = 0;
  nodes_.emplace_back();
  nodes_.emplace_back();
  build(left, first, half, centroids, boxes);
  build(left + 1, first + half, count - half, centroids, boxes);
}

Bvh build_bvh(const TriangleMesh& mesh) { return Bvh(mesh); }

std::optional<Hit> intersect_triangle(const TriangleMesh& mesh, std::uint32_t tri, const Ray& ray) {
  const auto& t = mesh.triangles[tri];
  const Vec3& a = mesh.vertices[t[0]];
  const Vec3 e1 = mesh.vertices[t[1]] - a;
  const Vec3 e2 = mesh.vertices[t[2]] - a;
  const Vec3 pvec = ray.direction.cross(e2);
  const double det = e1.dot(pvec);
  if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tvec = ray.origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = ray.direction.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double dist = e2.dot(qvec) * inv;
  if (!(dist > kMinHitT)) return std::nullopt;
  return Hit{dist, ray.at(dist), tri, u, v};
}

namespace {

bool closer(const Hit& h, const std::optional<Hit>& best) {
  return !best || h.t < best->t || (h.t == best->t && h.triangle < best->triangle);
}

Vec3 inverse_direction(const Vec3& d) {
  return {d.x() != 0.0 ? 1.0 / d.x() : 0.0, d.y() != 0.0 ? 1.0 / d.y() : 0.0, d.z() != 0.0 ? 1.0 / d.z() : 0.0};
}

}  // namespace

std::optional<Hit> cast_ray(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray) {
  const auto& nodes = bvh.nodes();
  const auto& perm = bvh.permutation();
  const Vec3 inv = inverse_direction(ray.direction);
  std::optional<Hit> best;
  std::uint32_t stack[128];
  int top = 0;
  if (!nodes[0].box.intersect(ray, inv, std::numeric_limits<double>::infinity())) return std::nullopt;
  stack[top++] = 0;
  while (top > 0) {
    const auto& node = nodes[stack[--top]];
    if (node.is_leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        if (auto h = intersect_triangle(mesh, perm[i], ray); h && closer(*h, best)) best = h;
      }
      continue;
    }
    const double limit = best ? best->t : std::numeric_limits<double>::infinity();
    const auto l = nodes[node.first].box.intersect(ray, inv, limit);
    const auto r = nodes[node.first + 1].box.intersect(ray, inv, limit);
    // Push the farther child first so the nearer one is visited next.
    if (l && r) {
      if (*l <= *r) {
        stack[top++] = node.first + 1;
        stack[top++] = node.first;
      } else {
        stack[top++] = node.first;
        stack[top++] = node.first + 1;
      }
    } else if (l) {
      stack[top++] = node.first;
    } else if (r) {
      stack[top++] = node.first + 1;
    }
  }
  return best;
}

std::optional<Hit> cast_ray_brute_force(const TriangleMesh& mesh, const Ray& ray) {
  std::optional<Hit> best;
  for (std::uint32_t i = 0; i < mesh.triangles.size(); ++i) {
    if (auto h = intersect_triangle(mesh, i, ray); h && closer(*h, best)) best = h;
  }
  return best;
}

std::vector<Hit> all_hits(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray) {
  const auto& nodes = bvh.nodes();
  const Vec3 inv = inverse_direction(ray.direction);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Hit> hits;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const auto& node = nodes[stack.back()];
    stack.pop_back();
    if (!node.box.intersect(ray, inv, inf)) continue;
    if (node.is_leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        if (auto h = intersect_triangle(mesh, bvh.permutation()[i], ray)) hits.push_back(*h);
      }
    } else {
      stack.push_back(node.first);
      stack.push_back(node.first + 1);
    }
  }
  return hits;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace {

ClosestPoint triangle_closest(const TriangleMesh& mesh, std::uint32_t tri, const Vec3& p) {
  const auto& t = mesh.triangles[tri];
  const Vec3 q = closest_point_on_triangle(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  return {(q - p).squaredNorm(), q, tri};
}

bool better(const ClosestPoint& c, const ClosestPoint& best) {
  return c.squared_distance < best.squared_distance ||
         (c.squared_distance == best.squared_distance && c.triangle < best.triangle);
}

}  // namespace

ClosestPoint closest_point(const Bvh& bvh, const TriangleMesh& mesh, const Vec3& p) {
  const auto& nodes = bvh.nodes();
  ClosestPoint best{std::numeric_limits<double>::infinity(), Vec3::Zero(), 0};
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const auto& node = nodes[stack[--top]];
    if (node.box.squared_distance(p) > best.squared_distance) continue;
    if (node.is_leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto c = triangle_closest(mesh, bvh.permutation()[i], p);
        if (better(c, best)) best = c;
      }
      continue;
    }
    const double dl = nodes[node.first].box.squared_distance(p);
    const double dr = nodes[node.first + 1].box.squared_distance(p);
    if (dl <= dr) {
      stack[top++] = node.first + 1;
      stack[top++] = node.first;
    } else {
      stack[top++] = node.first;
      stack[top++] = node.first + 1;
    }
  }
  return best;
}

ClosestPoint closest_point_brute_force(const TriangleMesh& mesh, const Vec3& p) {
  ClosestPoint best{std::numeric_limits<double>::infinity(), Vec3::Zero(), 0};
  for (std::uint32_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto c = triangle_closest(mesh, i, p);
    if (better(c, best)) best = c;
  }
  return best;
}

}  // namespace prif::geometry
