#include "prif/model.hpp"

#include "prif/container.hpp"

#include <cmath>
#include <cstring>
#include <random>

namespace prif::model {

namespace {

nn::MlpSpec network_spec(const ModelConfig& c, int output_dim) {
  nn::MlpSpec spec;
  spec.input_dim = kRayFeatures + c.latent_dim;
  spec.output_dim = output_dim;
  spec.depth = c.depth;
  spec.width = c.width;
  spec.residual = c.residual;
  spec.layer_norm = c.layer_norm;
  return spec;
}

}  // namespace

PrifModel PrifModel::create(const ModelConfig& config) {
  if (config.latent_dim < 0) fail(ErrorKind::invalid_spec, "latent_dim must be >= 0");
  if (config.shape_count < 1) fail(ErrorKind::invalid_spec, "shape_count must be >= 1");
  if (config.shape_count > 1 && config.latent_dim == 0) {
    fail(ErrorKind::invalid_spec, "multi-shape models need latent_dim > 0");
  }
  PrifModel m;
  m.config_ = config;
  m.trunk_ = nn::Mlp::create(network_spec(config, config.separate_mask ? 1 : 2), config.seed);
  if (config.separate_mask) m.mask_net_ = nn::Mlp::create(network_spec(config, 1), config.seed + 1);
  m.latents_ = nn::Matrix::Zero(config.shape_count, config.latent_dim);
  if (config.latent_dim > 0) {
    std::mt19937_64 rng(config.seed + 2);
    std::normal_distribution<float> gauss(0.0f, 0.01f);
    for (Eigen::Index i = 0; i < m.latents_.size(); ++i) m.latents_.data()[i] = gauss(rng);
  }
  for (int i = 0; i < config.shape_count; ++i) m.shape_names_.push_back("shape" + std::to_string(i));
  if (config.color_head) m.add_color_head(config.seed + 3);
  return m;
}

void PrifModel::add_color_head(std::uint64_t seed) {
  color_net_ = nn::Mlp::create(network_spec(config_, 3), seed);
  config_.color_head = true;
}

std::uint64_t PrifModel::geometry_hash() const {
  auto h = trunk_.parameter_hash();
  if (mask_net_) h ^= mask_net_->parameter_hash() * 31;
  return h;
}

nn::Matrix PrifModel::build_inputs(std::span<const RayEncoding> encodings, std::span<const std::uint16_t> shape_ids,
                                   const Eigen::RowVectorXf* latent_override) const {
  const auto n = static_cast<Eigen::Index>(encodings.size());
  nn::Matrix x(n, input_dim());
  const bool use_ids = config_.latent_dim > 0 && !latent_override;
  if (use_ids && !shape_ids.empty() && shape_ids.size() != encodings.size()) {
    fail(ErrorKind::shape_mismatch, "shape id count does not match ray count");
  }
  if (latent_override && latent_override->size() != config_.latent_dim) {
    fail(ErrorKind::shape_mismatch, "latent code has the wrong dimension");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = encodings[i];
    if (e.mode != config_.mode) {
      fail(ErrorKind::mode_mismatch, "ray encoded as " + std::string(rays::to_string(e.mode)) + ", model expects " +
                                         std::string(rays::to_string(config_.mode)));
    }
    x.block<1, 3>(i, 0) = e.anchor.cast<float>().transpose();
    x.block<1, 3>(i, 3) = e.direction.cast<float>().transpose();
    if (config_.latent_dim == 0) continue;
    if (latent_override) {
      x.row(i).tail(config_.latent_dim) = *latent_override;
    } else {
      const std::uint16_t id = shape_ids.empty() ? 0 : shape_ids[i];
      if (id >= latents_.rows()) fail(ErrorKind::unknown_shape, "shape id " + std::to_string(id));
      x.row(i).tail(config_.latent_dim) = latents_.row(id);
    }
  }
  return x;
}

nn::Matrix PrifModel::build_inputs(std::span<const RayRecord> records, const Eigen::RowVectorXf* latent_override) const {
  const auto n = static_cast<Eigen::Index>(records.size());
  nn::Matrix x(n, input_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[i];
    x.block<1, 3>(i, 0) = r.anchor.transpose();
    x.block<1, 3>(i, 3) = r.direction.transpose();
    if (config_.latent_dim == 0) continue;
    if (latent_override) {
      x.row(i).tail(config_.latent_dim) = *latent_override;
    } else {
      if (r.shape_id >= latents_.rows()) fail(ErrorKind::unknown_shape, "shape id " + std::to_string(r.shape_id));
      x.row(i).tail(config_.latent_dim) = latents_.row(r.shape_id);
    }
  }
  return x;
}

GeometryPass forward_geometry(const PrifModel& model, const nn::Matrix& inputs, bool keep_tape) {
  GeometryPass pass;
  const nn::Matrix out = model.trunk().forward(inputs, keep_tape ? &pass.trunk_tape : nullptr);
  model.queries().add(static_cast<std::uint64_t>(inputs.rows()));
  pass.s = out.col(0);
  if (const auto* mask = model.mask_net()) {
    pass.logit = mask->forward(inputs, keep_tape ? &pass.mask_tape : nullptr).col(0);
  } else {
    pass.logit = out.col(1);
  }
  return pass;
}

GeometryGrads backward_geometry(const PrifModel& model, const GeometryPass& pass, const Eigen::VectorXf& ds,
                                const Eigen::VectorXf& dlogit, bool param_grads) {
  GeometryGrads g;
  const auto n = pass.s.size();
  if (const auto* mask = model.mask_net()) {
    g.trunk = model.trunk().backward(pass.trunk_tape, ds, param_grads);
    g.mask = mask->backward(pass.mask_tape, dlogit, param_grads);
    g.input = g.trunk.input + g.mask.input;
  } else {
    nn::Matrix out_grad(n, 2);
    out_grad.col(0) = ds;
    out_grad.col(1) = dlogit;
    g.trunk = model.trunk().backward(pass.trunk_tape, out_grad, param_grads);
    g.input = g.trunk.input;
  }
  return g;
}

namespace {

Eigen::VectorXf sigmoid(const Eigen::VectorXf& x) { return (1.0f + (-x.array()).exp()).inverse().matrix(); }

}  // namespace

Prediction prif_forward(const PrifModel& model, std::span<const RayEncoding> encodings,
                        std::span<const std::uint16_t> shape_ids) {
  if (model.latent_dim() > 0 && model.shape_count() > 1 && shape_ids.empty()) {
    fail(ErrorKind::unknown_shape, "shape ids are required for multi-shape models");
  }
  const auto pass = forward_geometry(model, model.build_inputs(encodings, shape_ids), false);
  return {pass.s, sigmoid(pass.logit)};
}

Loss prif_loss(const Prediction& pred, std::span<const RayRecord> gt) {
  if (static_cast<std::size_t>(pred.s.size()) != gt.size() || static_cast<std::size_t>(pred.a.size()) != gt.size()) {
    fail(ErrorKind::shape_mismatch, "prediction and ground-truth batches differ in size");
  }
  Loss loss;
  if (gt.empty()) return loss;
  double ce = 0.0;
  double l1 = 0.0;
  std::size_t fg = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double a = std::clamp(static_cast<double>(pred.a[i]), kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double y = gt[i].a_gt;
    ce += -y * std::log(a) - (1.0 - y) * std::log(1.0 - a);
    if (gt[i].foreground()) {
      l1 += std::abs(static_cast<double>(pred.s[i]) - gt[i].s_gt);
      ++fg;
    }
  }
  loss.mask = ce / static_cast<double>(gt.size());
  loss.displacement = fg > 0 ? l1 / static_cast<double>(fg) : 0.0;
  loss.total = loss.mask + loss.displacement;
  return loss;
}

Eigen::MatrixX3f color_forward(const PrifModel& model, std::span<const RayEncoding> encodings,
                               std::span<const std::uint16_t> shape_ids) {
  const auto* color = model.color_net();
  if (!color) fail(ErrorKind::missing_head, "model has no color head");
  const nn::Matrix logits = color->forward(model.build_inputs(encodings, shape_ids));
  return (1.0f + (-logits.array()).exp()).inverse().matrix();
}

namespace {

void append_tensors(std::vector<std::span<const float>>& tensors, std::vector<std::string>& names,
                    const nn::Mlp& mlp, const std::string& prefix) {
  for (auto t : mlp.parameters()) tensors.push_back(t);
  for (const auto& n : mlp.parameter_names()) names.push_back(prefix + n);
}

void fill_tensors(nn::Mlp& mlp, const std::vector<float>& payload, std::size_t& offset) {
  for (auto t : mlp.parameters()) {
    if (offset + t.size() > payload.size()) fail(ErrorKind::format, "checkpoint payload too short");
    std::memcpy(t.data(), payload.data() + offset, t.size_bytes());
    offset += t.size();
  }
}

}  // namespace

void save_model(const std::string& path, const PrifModel& model, const nlohmann::json& extra) {
  std::vector<std::span<const float>> tensors;
  std::vector<std::string> names;
  append_tensors(tensors, names, model.trunk(), "trunk.");
  if (const auto* m = model.mask_net()) append_tensors(tensors, names, *m, "mask.");
  if (const auto* c = model.color_net()) append_tensors(tensors, names, *c, "color.");
  if (model.latents().size() > 0) {
    tensors.emplace_back(model.latents().data(), model.latents().size());
    names.emplace_back("latents");
  }
  nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
  const auto& c = model.config();
  header["kind"] = "prif";
  header["spec"] = nn::to_json(model.trunk().spec());
  header["encoding_mode"] = rays::to_string(c.mode);
  header["latent_dim"] = c.latent_dim;
  header["shape_ids"] = model.shape_names();
  header["color_head"] = model.color_net() != nullptr;
  header["separate_mask"] = c.separate_mask;
  header["seed"] = c.seed;
  header["tensors"] = names;
  io::write_container(path, "PRIFCKPT", header, io::as_bytes(tensors));
}

PrifModel load_model(const std::string& path, nlohmann::json* header) {
  auto c = io::read_container(path, "PRIFCKPT");
  const auto payload = c.floats();
  const auto& h = c.header;
  if (h.value("kind", std::string()) != "prif") fail(ErrorKind::format, "'" + path + "' is not a PRIF checkpoint");
  ModelConfig cfg;
  try {
    const auto spec = nn::mlp_spec_from_json(h.at("spec"));
    cfg.mode = rays::parse_encoding_mode(h.at("encoding_mode").get<std::string>());
    cfg.depth = spec.depth;
    cfg.width = spec.width;
    cfg.residual = spec.residual;
    cfg.layer_norm = spec.layer_norm;
    cfg.latent_dim = h.at("latent_dim").get<int>();
    cfg.separate_mask = h.value("separate_mask", false);
    cfg.color_head = h.value("color_head", false);
    cfg.seed = h.value("seed", std::uint64_t{0});
    const auto names = h.at("shape_ids").get<std::vector<std::string>>();
    cfg.shape_count = static_cast<int>(std::max<std::size_t>(1, names.size()));
    PrifModel model = PrifModel::create(cfg);
    if (!names.empty()) model.shape_names() = names;
    std::size_t offset = 0;
    fill_tensors(model.trunk(), payload, offset);
    if (auto* m = model.mask_net()) fill_tensors(*m, payload, offset);
    if (auto* col = model.color_net()) fill_tensors(*col, payload, offset);
    const auto latent_size = static_cast<std::size_t>(model.latents().size());
    if (offset + latent_size != payload.size()) fail(ErrorKind::format, "checkpoint payload size mismatch");
    std::memcpy(model.latents().data(), payload.data() + offset, latent_size * sizeof(float));
    if (header) *header = h;
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, "checkpoint header in '" + path + "': " + e.what());
  }
}

}  // namespace prif::model
