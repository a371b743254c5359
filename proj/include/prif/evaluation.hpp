#pragma once

#include "prif/geometry.hpp"
#include "prif/model.hpp"
#include "prif/sdf.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prif::eval {

/// Static 3-d kd-tree over a point set (points are copied).
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  struct Neighbor {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };
  /// Nearest point; ties go to the lowest index.
  Neighbor nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = 0;
    double split = 0.0;
  };
  int build(std::uint32_t begin, std::uint32_t end);
  void search(int node, const Vec3& q, Neighbor& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

struct ChamferReport {
  double mean = 0.0;
  double median = 0.0;
  /// Mean squared distance from each side to the other.
  double a_to_b = 0.0;
  double b_to_a = 0.0;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
};

/// mean = mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2; median over the pooled
/// per-point squared distances of both sides.
ChamferReport chamfer(std::span<const Vec3> a, std::span<const Vec3> b);
ChamferReport chamfer_brute_force(std::span<const Vec3> a, std::span<const Vec3> b);

inline constexpr std::size_t kDefaultEvalPoints = 30000;

/// Subsamples the cloud to n_eval (without replacement), samples n_eval
/// surface points of the mesh, and compares them.
ChamferReport evaluation_protocol(std::span<const Vec3> cloud, const geometry::TriangleMesh& mesh,
                                  std::size_t n_eval = kDefaultEvalPoints, std::uint64_t seed = 0);

struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// 16-bit binary PGM, depth mapped linearly from [0, t_max] to [0, 65535].
void write_depth_pgm(const std::string& path, const Image& depth, double t_max);
/// Binary PPM from rgb rows in [0,1].
void write_ppm(const std::string& path, int width, int height, std::span<const Vec3> rgb);
/// Binary PGM (8 or 16 bit) read as a {0,1} mask: nonzero is foreground.
Image read_pgm_mask(const std::string& path);
void write_mask_pgm(const std::string& path, const Image& mask);

enum class BenchMethod { prif, sphere_trace };
std::string_view to_string(BenchMethod m);
BenchMethod parse_bench_method(std::string_view s);

struct BenchReport {
  BenchMethod method = BenchMethod::prif;
  std::uint64_t queries = 0;
  std::uint64_t rays = 0;
  std::uint64_t hits = 0;
  double wall_seconds = 0.0;
  /// Distance from the camera along each pixel ray; 0 for background.
  Image depth;
};

/// One query per pixel.
BenchReport benchmark_render(const model::PrifModel& model, const geometry::Camera& camera,
                             double mask_threshold = model::kDefaultMaskThreshold, std::uint16_t shape_id = 0);
BenchReport benchmark_render(const sdf::SdfNetwork& net, const geometry::Camera& camera,
                             int max_steps = sdf::kDefaultMaxSteps, double eps = sdf::kDefaultEps,
                             double t_max = sdf::kDefaultTraceMax);

}  // namespace prif::eval
