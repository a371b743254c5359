#include "prif/nn.hpp"

#include <atomic>
#include <cmath>
#include <random>

namespace prif::nn {

namespace {
std::atomic<std::uint64_t> g_next_id{1};
}

void MlpSpec::validate() const {
  if (depth < 2) fail(ErrorKind::invalid_spec, "depth must be >= 2, got " + std::to_string(depth));
  if (width < 1) fail(ErrorKind::invalid_spec, "width must be >= 1");
  if (input_dim < 1 || output_dim < 1) fail(ErrorKind::invalid_spec, "input and output dims must be >= 1");
}

nlohmann::json to_json(const MlpSpec& spec) {
  return {{"input_dim", spec.input_dim}, {"output_dim", spec.output_dim}, {"depth", spec.depth},
          {"width", spec.width},         {"residual", spec.residual},     {"layer_norm", spec.layer_norm},
          {"activation", "relu"}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
  MlpSpec s;
  s.input_dim = j.at("input_dim").get<int>();
  s.output_dim = j.at("output_dim").get<int>();
  s.depth = j.at("depth").get<int>();
  s.width = j.at("width").get<int>();
  s.residual = j.value("residual", true);
  s.layer_norm = j.value("layer_norm", true);
  if (j.value("activation", std::string("relu")) != "relu") fail(ErrorKind::invalid_spec, "unsupported activation");
  s.validate();
  return s;
}

MlpSpec paper_preset(int input_dim, int output_dim) { return {input_dim, output_dim, 10, 512, true, true}; }
MlpSpec desk_preset(int input_dim, int output_dim) { return {input_dim, output_dim, 6, 128, true, true}; }

Mlp Mlp::create(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Mlp mlp;
  mlp.spec_ = spec;
  mlp.id_ = g_next_id++;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < spec.depth; ++i) {
    const int in = i == 0 ? spec.input_dim : spec.width;
    const int out = i + 1 == spec.depth ? spec.output_dim : spec.width;
    Layer layer;
    layer.weight.resize(out, in);
    const float bound = std::sqrt(6.0f / static_cast<float>(in));
    std::uniform_real_distribution<float> uni(-bound, bound);
    for (Eigen::Index k = 0; k < layer.weight.size(); ++k) layer.weight.data()[k] = uni(rng);
    layer.bias = RowVector::Zero(out);
    if (spec.layer_norm && i + 1 < spec.depth) {
      layer.gain = RowVector::Ones(out);
      layer.offset = RowVector::Zero(out);
    }
    mlp.layers_.push_back(std::move(layer));
  }
  return mlp;
}

Mlp mlp_new(const MlpSpec& spec, std::uint64_t seed) { return Mlp::create(spec, seed); }

bool Mlp::is_residual(std::size_t layer) const {
  if (!spec_.residual || layer == 0 || is_final(layer)) return false;
  return layers_[layer].weight.rows() == layers_[layer].weight.cols();
}

std::vector<std::span<float>> Mlp::parameters() {
  std::vector<std::span<float>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.weight.data(), l.weight.size());
    out.emplace_back(l.bias.data(), l.bias.size());
    if (l.has_norm()) {
      out.emplace_back(l.gain.data(), l.gain.size());
      out.emplace_back(l.offset.data(), l.offset.size());
    }
  }
  return out;
}

std::vector<std::span<const float>> Mlp::parameters() const {
  std::vector<std::span<const float>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.weight.data(), l.weight.size());
    out.emplace_back(l.bias.data(), l.bias.size());
    if (l.has_norm()) {
      out.emplace_back(l.gain.data(), l.gain.size());
      out.emplace_back(l.offset.data(), l.offset.size());
    }
  }
  return out;
}

std::vector<std::string> Mlp::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto prefix = "layer" + std::to_string(i) + ".";
    names.push_back(prefix + "weight");
    names.push_back(prefix + "bias");
    if (layers_[i].has_norm()) {
      names.push_back(prefix + "gain");
      names.push_back(prefix + "offset");
    }
  }
  return names;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

std::uint64_t Mlp::parameter_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : parameters()) h = fnv1a(t.data(), t.size_bytes(), h);
  return h;
}

std::vector<std::span<float>> Gradients::tensors() {
  std::vector<std::span<float>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weight.data(), l.weight.size());
    out.emplace_back(l.bias.data(), l.bias.size());
    if (l.has_norm()) {
      out.emplace_back(l.gain.data(), l.gain.size());
      out.emplace_back(l.offset.data(), l.offset.size());
    }
  }
  return out;
}

Matrix Mlp::forward(const Matrix& batch, Tape* tape) const {
  if (layers_.empty()) fail(ErrorKind::invalid_spec, "network has no layers");
  if (batch.cols() != spec_.input_dim) {
    fail(ErrorKind::shape_mismatch,
         "expected " + std::to_string(spec_.input_dim) + " input columns, got " + std::to_string(batch.cols()));
  }
  if (!batch.allFinite()) fail(ErrorKind::non_finite, "non-finite network input");
  if (tape) {
    tape->layers.assign(layers_.size(), {});
    tape->rows = batch.rows();
    tape->network_id = id_;
  }
  Matrix x = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    Matrix z(x.rows(), layer.weight.rows());
    z.noalias() = x * layer.weight.transpose();
    z.rowwise() += layer.bias;
    if (is_final(i)) {
      if (tape) tape->layers[i].input = std::move(x);
      x = std::move(z);
      break;
    }
    Matrix y = z.cwiseMax(0.0f);
    if (is_residual(i)) y += x;
    if (tape) tape->layers[i].input = std::move(x);
    if (layer.has_norm()) {
      const float width = static_cast<float>(y.cols());
      Eigen::VectorXf mean = y.rowwise().sum() / width;
      y.colwise() -= mean;
      Eigen::VectorXf inv_std = ((y.array().square().rowwise().sum() / width) + kLayerNormEps).rsqrt().matrix();
      y = inv_std.asDiagonal() * y;
      if (tape) {
        tape->layers[i].normalized = y;
        tape->layers[i].inv_std = std::move(inv_std);
      }
      y = (y.array().rowwise() * layer.gain.array()).rowwise() + layer.offset.array();
    }
    if (tape) tape->layers[i].pre_activation = std::move(z);
    x = std::move(y);
  }
  return x;
}

Gradients Mlp::backward(const Tape& tape, const Matrix& output_grads, bool param_grads) const {
  if (tape.network_id != id_) fail(ErrorKind::stale_tape, "tape was recorded by a different network");
  if (tape.layers.size() != layers_.size() || output_grads.rows() != tape.rows ||
      output_grads.cols() != spec_.output_dim) {
    fail(ErrorKind::stale_tape, "tape does not match this network or gradient shape");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (tape.layers[i].input.cols() != layers_[i].weight.cols() || tape.layers[i].input.rows() != tape.rows) {
      fail(ErrorKind::stale_tape, "tape layer " + std::to_string(i) + " has inconsistent dimensions");
    }
  }
  Gradients grads;
  if (param_grads) grads.layers.resize(layers_.size());
  Matrix g = output_grads;
  for (std::size_t ii = layers_.size(); ii-- > 0;) {
    const Layer& layer = layers_[ii];
    const LayerTape& lt = tape.layers[ii];
    Matrix dz;
    Matrix residual_grad;
    if (is_final(ii)) {
      dz = std::move(g);
    } else {
      Matrix dy;
      if (layer.has_norm()) {
        if (param_grads) {
          grads.layers[ii].gain = (g.array() * lt.normalized.array()).colwise().sum().matrix();
          grads.layers[ii].offset = g.colwise().sum();
        }
        const Matrix dn = (g.array().rowwise() * layer.gain.array()).matrix();
        const float width = static_cast<float>(dn.cols());
        const Eigen::VectorXf sum_dn = dn.rowwise().sum();
        const Eigen::VectorXf sum_dn_n = (dn.array() * lt.normalized.array()).rowwise().sum().matrix();
        dy = (dn * width).colwise() - sum_dn;
        dy -= (lt.normalized.array().colwise() * sum_dn_n.array()).matrix();
        dy = (lt.inv_std / width).asDiagonal() * dy;
      } else {
        dy = std::move(g);
      }
      dz = (lt.pre_activation.array() > 0.0f).select(dy.array(), 0.0f).matrix();
      if (is_residual(ii)) residual_grad = std::move(dy);
    }
    if (param_grads) {
      grads.layers[ii].weight.noalias() = dz.transpose() * lt.input;
      grads.layers[ii].bias = dz.colwise().sum();
    }
    Matrix dx(dz.rows(), layer.weight.cols());
    dx.noalias() = dz * layer.weight;
    if (residual_grad.size() > 0) dx += residual_grad;
    g = std::move(dx);
  }
  grads.input = std::move(g);
  return grads;
}

}  // namespace prif::nn
