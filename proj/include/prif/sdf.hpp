#pragma once

#include "prif/geometry.hpp"
#include "prif/model.hpp"
#include "prif/nn.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prif::sdf {

/// True when every edge is shared by exactly two triangles.
bool is_watertight(const geometry::TriangleMesh& mesh);

/// Distance to the nearest triangle, negative inside. The sign comes from
/// crossing parity along a fixed probe direction, re-probed along jittered
/// directions when the probe grazes an edge or vertex.
double sdf_ground_truth(const geometry::TriangleMesh& mesh, const geometry::Bvh& bvh, const Vec3& p);

struct SdfSample {
  Eigen::Vector3f point;
  float sdf = 0.0f;
};

inline constexpr double kSurfaceSigmaWide = 0.01;
inline constexpr double kSurfaceSigmaNarrow = 0.003;
inline constexpr double kUniformRadius = 1.1;

/// 40% surface points + N(0, 0.01^2), 40% + N(0, 0.003^2), 20% uniform in the
/// radius-1.1 ball. The stored sdf is evaluated at the stored float point.
std::vector<SdfSample> sample_sdf_training_set(const geometry::TriangleMesh& mesh, const geometry::Bvh& bvh,
                                               std::size_t n, std::uint64_t seed);

void save_sdf_samples(const std::string& path, std::span<const SdfSample> samples);
std::vector<SdfSample> load_sdf_samples(const std::string& path);

inline constexpr int kDefaultMaxSteps = 100;
inline constexpr double kDefaultEps = 1e-4;
inline constexpr double kDefaultTraceMax = 10.0;

struct SphereTraceResult {
  std::optional<Vec3> hit;
  double t = 0.0;
  int steps = 0;
  bool converged = false;
};

/// t <- t + sdf(p + t d) from t = 0. Every call of `sdf` is one step.
SphereTraceResult sphere_trace(const std::function<double(const Vec3&)>& sdf, const geometry::Ray& ray,
                               int max_steps = kDefaultMaxSteps, double eps = kDefaultEps,
                               double t_max = kDefaultTraceMax);

/// An MLP from a point to its signed distance.
class SdfNetwork {
 public:
  static SdfNetwork create(const nn::MlpSpec& spec, std::uint64_t seed);
  explicit SdfNetwork(nn::Mlp mlp);

  nn::Mlp& mlp() { return mlp_; }
  const nn::Mlp& mlp() const { return mlp_; }
  const model::QueryCounter& queries() const { return queries_; }

  /// One query per point.
  Eigen::VectorXf evaluate(std::span<const Vec3> points) const;

 private:
  nn::Mlp mlp_;
  model::QueryCounter queries_;
};

/// 3 -> 1 network with the given depth and width.
nn::MlpSpec sdf_spec(int depth, int width);

/// Sphere traces many rays, batching the active ones into one network call
/// per iteration. Queries equal the total of steps over rays.
std::vector<SphereTraceResult> sphere_trace_batch(const SdfNetwork& net, std::span<const geometry::Ray> rays,
                                                  int max_steps = kDefaultMaxSteps, double eps = kDefaultEps,
                                                  double t_max = kDefaultTraceMax);

/// L1 regression with the PRIF optimizer and schedule.
std::vector<model::EpochLoss> train_sdf(SdfNetwork& net, std::span<const SdfSample> samples,
                                        const model::TrainConfig& config, const model::ProgressFn& progress = {});

/// Mean |pred - gt|.
double sdf_mean_abs_error(const SdfNetwork& net, std::span<const SdfSample> samples);

void save_sdf_network(const std::string& path, const SdfNetwork& net, const nlohmann::json& extra = {});
SdfNetwork load_sdf_network(const std::string& path, nlohmann::json* header = nullptr);

}  // namespace prif::sdf
