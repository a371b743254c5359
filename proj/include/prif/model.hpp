#pragma once

#include "prif/dataset.hpp"
#include "prif/geometry.hpp"
#include "prif/nn.hpp"
#include "prif/rays.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prif::model {

using data::RayDataset;
using data::RayRecord;
using rays::EncodingMode;
using rays::RayEncoding;

struct ModelConfig {
  EncodingMode mode = EncodingMode::perp_foot;
  int depth = 6;
  int width = 128;
  bool residual = true;
  bool layer_norm = true;
  /// 0 for single-shape models.
  int latent_dim = 0;
  int shape_count = 1;
  /// Mask logits from a second network of the same architecture instead of
  /// a second output of the displacement trunk.
  bool separate_mask = false;
  bool color_head = false;
  std::uint64_t seed = 0;
};

inline constexpr int kRayFeatures = 6;
inline constexpr int kDefaultLatentDim = 128;

/// Counts network evaluations (one per ray row pushed through the trunk).
class QueryCounter {
 public:
  QueryCounter() = default;
  QueryCounter(const QueryCounter& o) : n_(o.n_.load()) {}
  QueryCounter& operator=(const QueryCounter& o) {
    n_ = o.n_.load();
    return *this;
  }
  void add(std::uint64_t k) const { n_ += k; }
  std::uint64_t value() const { return n_.load(); }
  void reset() const { n_ = 0; }

 private:
  mutable std::atomic<std::uint64_t> n_{0};
};

class PrifModel {
 public:
  static PrifModel create(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  EncodingMode mode() const { return config_.mode; }
  int latent_dim() const { return config_.latent_dim; }
  int shape_count() const { return static_cast<int>(latents_.rows()); }
  int input_dim() const { return kRayFeatures + config_.latent_dim; }

  nn::Mlp& trunk() { return trunk_; }
  const nn::Mlp& trunk() const { return trunk_; }
  nn::Mlp* mask_net() { return mask_net_ ? &*mask_net_ : nullptr; }
  const nn::Mlp* mask_net() const { return mask_net_ ? &*mask_net_ : nullptr; }
  nn::Mlp* color_net() { return color_net_ ? &*color_net_ : nullptr; }
  const nn::Mlp* color_net() const { return color_net_ ? &*color_net_ : nullptr; }
  /// shape_count x latent_dim, row-major.
  nn::Matrix& latents() { return latents_; }
  const nn::Matrix& latents() const { return latents_; }

  /// Adds an untrained color network (same architecture, 3 outputs).
  void add_color_head(std::uint64_t seed);

  std::vector<std::string>& shape_names() { return shape_names_; }
  const std::vector<std::string>& shape_names() const { return shape_names_; }

  const QueryCounter& queries() const { return queries_; }

  /// Fingerprint of the geometry networks (trunk and mask net).
  std::uint64_t geometry_hash() const;

  /// Network inputs for a batch: ray features, then the latent code of each
  /// row's shape (or `latent_override` for every row when given).
  nn::Matrix build_inputs(std::span<const RayEncoding> encodings, std::span<const std::uint16_t> shape_ids,
                          const Eigen::RowVectorXf* latent_override = nullptr) const;
  nn::Matrix build_inputs(std::span<const RayRecord> records, const Eigen::RowVectorXf* latent_override = nullptr) const;

 private:
  ModelConfig config_;
  nn::Mlp trunk_;
  std::optional<nn::Mlp> mask_net_;
  std::optional<nn::Mlp> color_net_;
  nn::Matrix latents_;
  std::vector<std::string> shape_names_;
  QueryCounter queries_;
};

/// One geometry evaluation with the tapes needed for input or parameter
/// gradients.
struct GeometryPass {
  Eigen::VectorXf s;
  Eigen::VectorXf logit;
  nn::Tape trunk_tape;
  nn::Tape mask_tape;
};

GeometryPass forward_geometry(const PrifModel& model, const nn::Matrix& inputs, bool keep_tape);

struct GeometryGrads {
  nn::Gradients trunk;
  nn::Gradients mask;
  /// d loss / d inputs, summed over the trunk and mask networks.
  nn::Matrix input;
};

GeometryGrads backward_geometry(const PrifModel& model, const GeometryPass& pass, const Eigen::VectorXf& ds,
                                const Eigen::VectorXf& dlogit, bool param_grads);

struct Prediction {
  Eigen::VectorXf s;
  /// Foreground probability.
  Eigen::VectorXf a;
};

Prediction prif_forward(const PrifModel& model, std::span<const RayEncoding> encodings,
                        std::span<const std::uint16_t> shape_ids = {});

struct Loss {
  double total = 0.0;
  double displacement = 0.0;
  double mask = 0.0;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// L_a: mean cross-entropy over all rays; L_s: mean |s - s_gt| over
/// foreground rays (0 if none); total = L_a + L_s.
Loss prif_loss(const Prediction& pred, std::span<const RayRecord> gt);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 1024;
  double lr_start = 1e-4;
  double lr_end = 1e-7;
  std::uint64_t seed = 0;
  double weight_s = 1.0;
  double weight_a = 1.0;
  double delta = 5.0;
};

struct EpochLoss {
  int epoch = 0;
  double total = 0.0;
  double displacement = 0.0;
  double mask = 0.0;
  double lr = 0.0;
};

using ProgressFn = std::function<void(const EpochLoss&)>;

/// Mini-batch Adam with a cosine schedule over all steps. Latent codes, if
/// any, are optimized jointly with the weights.
std::vector<EpochLoss> train(PrifModel& model, const RayDataset& dataset, const TrainConfig& config,
                             const ProgressFn& progress = {});

/// Second stage: fits the color head on foreground rays with the geometry
/// networks frozen. Mean squared color error per epoch is returned.
std::vector<EpochLoss> train_color(PrifModel& model, const RayDataset& dataset, const TrainConfig& config,
                                   const ProgressFn& progress = {});

/// rgb in [0,1]^3 per ray.
Eigen::MatrixX3f color_forward(const PrifModel& model, std::span<const RayEncoding> encodings,
                               std::span<const std::uint16_t> shape_ids = {});

inline constexpr double kDefaultDelta = 5.0;
inline constexpr double kDefaultMaskThreshold = 0.5;

/// d s / d p for each ray, via (I - d d^T) d s / d f. perp_foot models only.
std::vector<Vec3> displacement_position_gradients(const PrifModel& model, std::span<const geometry::Ray> rays,
                                                  std::span<const std::uint16_t> shape_ids = {});

/// Keeps rays whose |d s / d p| < delta.
std::vector<bool> outlier_filter(const PrifModel& model, std::span<const geometry::Ray> rays, double delta,
                                 std::span<const std::uint16_t> shape_ids = {});

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;
  std::size_t rays = 0;
  std::size_t masked_out = 0;
  std::size_t outliers = 0;
};

struct ExtractOptions {
  double delta = kDefaultDelta;
  double mask_threshold = kDefaultMaskThreshold;
  /// Shape whose latent code is used (multi-shape models).
  std::uint16_t shape_id = 0;
  /// Overrides the latent table when set (auto-decoded codes).
  std::optional<Eigen::RowVectorXf> latent;
  /// Outlier removal applies to perp_foot models; other encodings skip it.
  bool filter_outliers = true;
};

/// One network evaluation per ray; hit points of rays that pass the mask
/// threshold and the outlier filter.
PointCloud extract_points(const PrifModel& model, std::span<const geometry::Ray> rays, const ExtractOptions& options = {});
PointCloud extract_points(const PrifModel& model, std::span<const geometry::Camera> rig,
                          const ExtractOptions& options = {});

std::vector<geometry::Ray> rig_rays(std::span<const geometry::Camera> rig);

struct AutoDecodeConfig {
  int steps = 300;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// Observations used per step; all of them when there are fewer.
  int batch_size = 8192;
};

/// Optimizes one latent code against observations with the networks frozen.
Eigen::RowVectorXf auto_decode(const PrifModel& model, std::span<const RayRecord> observations,
                               const Eigen::RowVectorXf& init, const AutoDecodeConfig& config,
                               std::vector<double>* loss_trace = nullptr);

void save_model(const std::string& path, const PrifModel& model, const nlohmann::json& extra = {});
PrifModel load_model(const std::string& path, nlohmann::json* header = nullptr);

}  // namespace prif::model
