#include "prif/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace prif::eval {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) fail(ErrorKind::invalid_argument, "too many points");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
}

int KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  return id;
}

void KdTree::search(int node, const Vec3& q, Neighbor& best) const {
  const Node& n = nodes_[node];
  if (n.left < 0) {
    for (auto i = n.begin; i < n.end; ++i) {
      const auto idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) best = {idx, d};
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search(near, q, best);
  // Equal distances may sit on the far side; <= keeps the lowest-index tie-break exact.
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Neighbor KdTree::nearest(const Vec3& q) const {
  if (points_.empty()) fail(ErrorKind::invalid_argument, "nearest neighbor in an empty set");
  Neighbor best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  search(0, q, best);
  return best;
}

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double upper = v[n / 2];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lower + upper);
}

template <typename Nearest>
ChamferReport chamfer_with(std::span<const Vec3> a, std::span<const Vec3> b, Nearest&& nearest_in) {
  if (a.empty() || b.empty()) fail(ErrorKind::invalid_argument, "chamfer distance of an empty point set");
  std::vector<double> pooled(a.size() + b.size());
  parallel_for(a.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) pooled[i] = nearest_in(1, a[i]);
  });
  parallel_for(b.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) pooled[a.size() + i] = nearest_in(0, b[i]);
  });
  ChamferReport r;
  r.count_a = a.size();
  r.count_b = b.size();
  r.a_to_b = std::accumulate(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0) /
             static_cast<double>(a.size());
  r.b_to_a = std::accumulate(pooled.begin() + static_cast<std::ptrdiff_t>(a.size()), pooled.end(), 0.0) /
             static_cast<double>(b.size());
  r.mean = r.a_to_b + r.b_to_a;
  r.median = median_of(std::move(pooled));
  return r;
}

}  // namespace

ChamferReport chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) fail(ErrorKind::invalid_argument, "chamfer distance of an empty point set");
  const KdTree ta(a);
  const KdTree tb(b);
  return chamfer_with(a, b, [&](int side, const Vec3& q) { return (side == 0 ? ta : tb).nearest(q).squared_distance; });
}

ChamferReport chamfer_brute_force(std::span<const Vec3> a, std::span<const Vec3> b) {
  return chamfer_with(a, b, [&](int side, const Vec3& q) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : side == 0 ? a : b) best = std::min(best, (p - q).squaredNorm());
    return best;
  });
}

ChamferReport evaluation_protocol(std::span<const Vec3> cloud, const geometry::TriangleMesh& mesh, std::size_t n_eval,
                                  std::uint64_t seed) {
  if (cloud.empty()) fail(ErrorKind::invalid_argument, "empty point cloud");
  if (n_eval == 0) fail(ErrorKind::invalid_argument, "n_eval must be >= 1");
  std::vector<Vec3> pred(cloud.begin(), cloud.end());
  if (pred.size() > n_eval) {
    std::mt19937_64 rng(seed);
    std::shuffle(pred.begin(), pred.end(), rng);
    pred.resize(n_eval);
  }
  const auto gt = geometry::sample_surface_points(mesh, n_eval, seed + 1);
  return chamfer(pred, gt);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

void write_depth_pgm(const std::string& path, const Image& depth, double t_max) {
  if (!(t_max > 0.0)) fail(ErrorKind::invalid_argument, "t_max must be positive");
  auto out = open_out(path);
  out << "P5\n" << depth.width << ' ' << depth.height << "\n65535\n";
  for (float d : depth.data) {
    const double v = std::clamp(static_cast<double>(d) / t_max, 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

void write_ppm(const std::string& path, int width, int height, std::span<const Vec3> rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    fail(ErrorKind::shape_mismatch, "pixel count does not match the image size");
  }
  auto out = open_out(path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  for (const auto& c : rgb) {
    for (int k = 0; k < 3; ++k) out.put(static_cast<char>(std::lround(std::clamp(c[k], 0.0, 1.0) * 255.0)));
  }
  if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

void write_mask_pgm(const std::string& path, const Image& mask) {
  auto out = open_out(path);
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  for (float v : mask.data) out.put(static_cast<char>(v >= 0.5f ? 255 : 0));
  if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

Image read_pgm_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  auto token = [&]() {
    std::string t;
    while (in) {
      const int c = in.get();
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(c)) {
        if (!t.empty()) break;
      } else if (c != EOF) {
        t.push_back(static_cast<char>(c));
      }
    }
    return t;
  };
  if (token() != "P5") fail(ErrorKind::parse, "'" + path + "' is not a binary PGM");
  Image img;
  long maxval = 0;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    maxval = std::stol(token());
  } catch (const std::exception&) {
    fail(ErrorKind::parse, "'" + path + "': malformed PGM header");
  }
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535) {
    fail(ErrorKind::parse, "'" + path + "': invalid PGM dimensions or maxval");
  }
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) fail(ErrorKind::parse, "'" + path + "': truncated pixel data");
  img.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes == 2 ? (raw[2 * i] << 8 | raw[2 * i + 1]) : raw[i];
    img.data[i] = v != 0 ? 1.0f : 0.0f;
  }
  return img;
}

std::string_view to_string(BenchMethod m) { return m == BenchMethod::prif ? "prif" : "sphere_trace"; }

BenchMethod parse_bench_method(std::string_view s) {
  if (s == "prif") return BenchMethod::prif;
  if (s == "sphere_trace" || s == "sphere-trace") return BenchMethod::sphere_trace;
  fail(ErrorKind::invalid_argument, "unknown bench method '" + std::string(s) + "'");
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

BenchReport benchmark_render(const model::PrifModel& model, const geometry::Camera& camera, double mask_threshold,
                             std::uint16_t shape_id) {
  BenchReport r;
  r.method = BenchMethod::prif;
  const auto rays = model::rig_rays(std::span<const geometry::Camera>(&camera, 1));
  r.rays = rays.size();
  r.depth = {camera.width, camera.height, std::vector<float>(rays.size(), 0.0f)};
  const auto before = model.queries().value();
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::size_t kChunk = 4096;
  std::vector<rays::RayEncoding> enc;
  for (std::size_t start = 0; start < rays.size(); start += kChunk) {
    const std::size_t end = std::min(rays.size(), start + kChunk);
    enc.clear();
    for (std::size_t i = start; i < end; ++i) enc.push_back(rays::encode_ray(rays[i], model.mode()));
    const std::vector<std::uint16_t> ids(enc.size(), shape_id);
    const auto pred = model::prif_forward(model, enc, ids);
    for (std::size_t k = 0; k < enc.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      if (!(pred.a[row] >= mask_threshold)) continue;
      const Vec3 h = rays::hit_point(rays::foot_of(enc[k]), enc[k].direction, pred.s[row]);
      r.depth.data[start + k] = static_cast<float>((h - rays[start + k].origin).dot(enc[k].direction));
      ++r.hits;
    }
  }
  r.wall_seconds = seconds_since(t0);
  r.queries = model.queries().value() - before;
  return r;
}

BenchReport benchmark_render(const sdf::SdfNetwork& net, const geometry::Camera& camera, int max_steps, double eps,
                             double t_max) {
  BenchReport r;
  r.method = BenchMethod::sphere_trace;
  const auto rays = model::rig_rays(std::span<const geometry::Camera>(&camera, 1));
  r.rays = rays.size();
  r.depth = {camera.width, camera.height, std::vector<float>(rays.size(), 0.0f)};
  const auto before = net.queries().value();
  const auto t0 = std::chrono::steady_clock::now();
  const auto traced = sdf::sphere_trace_batch(net, rays, max_steps, eps, t_max);
  for (std::size_t i = 0; i < traced.size(); ++i) {
    if (!traced[i].converged) continue;
    r.depth.data[i] = static_cast<float>(traced[i].t);
    ++r.hits;
  }
  r.wall_seconds = seconds_since(t0);
  r.queries = net.queries().value() - before;
  return r;
}

}  // namespace prif::eval
