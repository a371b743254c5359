#pragma once

#include "prif/common.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prif::nn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXf;

enum class Activation { relu };

struct MlpSpec {
  int input_dim = 6;
  int output_dim = 2;
  /// Number of linear layers, including the first and the final one.
  int depth = 6;
  int width = 128;
  bool residual = true;
  bool layer_norm = true;
  Activation activation = Activation::relu;

  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

nlohmann::json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);

/// Depth 10, width 512: eight 512x512 hidden blocks.
MlpSpec paper_preset(int input_dim, int output_dim);
/// Depth 6, width 128.
MlpSpec desk_preset(int input_dim, int output_dim);

inline constexpr float kLayerNormEps = 1e-5f;

struct Layer {
  Matrix weight;  // out x in
  RowVector bias;
  /// Empty when the layer carries no layer norm (final layer, or disabled).
  RowVector gain;
  RowVector offset;

  bool has_norm() const { return gain.size() > 0; }
};

/// Per-layer record of a forward pass, enough to run the reverse sweep.
struct LayerTape {
  Matrix input;
  Matrix pre_activation;
  /// Layer-norm output before gain/offset.
  Matrix normalized;
  Eigen::VectorXf inv_std;
};

struct Tape {
  std::vector<LayerTape> layers;
  Eigen::Index rows = 0;
  std::uint64_t network_id = 0;
};

/// Gradients laid out like the network's layers.
struct Gradients {
  std::vector<Layer> layers;
  Matrix input;

  std::vector<std::span<float>> tensors();
};

class Mlp {
 public:
  Mlp() = default;
  /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases, unit gains.
  static Mlp create(const MlpSpec& spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  bool is_residual(std::size_t layer) const;
  bool is_final(std::size_t layer) const { return layer + 1 == layers_.size(); }

  /// Parameters in a fixed order: per layer weight, bias, then gain and
  /// offset when present.
  std::vector<std::span<float>> parameters();
  std::vector<std::span<const float>> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;
  std::uint64_t parameter_hash() const;

  Matrix forward(const Matrix& batch, Tape* tape = nullptr) const;
  /// Reverse sweep for <outputs, output_grads>. Parameter gradients are
  /// skipped when `param_grads` is false (only input gradients returned).
  Gradients backward(const Tape& tape, const Matrix& output_grads, bool param_grads = true) const;

 private:
  MlpSpec spec_;
  std::vector<Layer> layers_;
  std::uint64_t id_ = 0;
};

Mlp mlp_new(const MlpSpec& spec, std::uint64_t seed);

struct AdamState {
  static constexpr float kBeta1 = 0.9f;
  static constexpr float kBeta2 = 0.999f;
  static constexpr float kEpsilon = 1e-8f;

  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::int64_t step = 0;
};

/// Shapes the moment buffers after the given parameter tensors.
AdamState adam_init(std::span<const std::span<float>> params);

/// One bias-corrected Adam update in place.
void adam_step(AdamState& state, std::span<const std::span<float>> params,
               std::span<const std::span<float>> grads, double lr);

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_start, double lr_end);

/// Standalone network checkpoint using the PRIFCKPT container.
void save_mlp(const std::string& path, const Mlp& mlp, const nlohmann::json& extra = {});
Mlp load_mlp(const std::string& path, nlohmann::json* header = nullptr);

}  // namespace prif::nn
