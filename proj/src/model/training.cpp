#include "prif/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace prif::model {

namespace {

struct BatchLoss {
  double mask = 0.0;
  double displacement = 0.0;
  Eigen::VectorXf ds;
  Eigen::VectorXf dlogit;
};

/// Loss terms and their gradients with respect to s and the mask logit for
/// one batch. The logit gradient uses the exact sigmoid cross-entropy form.
BatchLoss batch_loss(const GeometryPass& pass, std::span<const RayRecord* const> batch, double weight_s, double weight_a) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  BatchLoss out;
  out.ds = Eigen::VectorXf::Zero(n);
  out.dlogit.resize(n);
  std::size_t fg = 0;
  for (const auto* r : batch) fg += r->foreground();
  double ce = 0.0;
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const RayRecord& r = *batch[i];
    const double logit = pass.logit[i];
    const double a = 1.0 / (1.0 + std::exp(-logit));
    const double ac = std::clamp(a, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double y = r.a_gt;
    ce += -y * std::log(ac) - (1.0 - y) * std::log(1.0 - ac);
    out.dlogit[i] = static_cast<float>(weight_a * (a - y) / static_cast<double>(n));
    if (r.foreground()) {
      const double diff = static_cast<double>(pass.s[i]) - r.s_gt;
      l1 += std::abs(diff);
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      out.ds[i] = static_cast<float>(weight_s * sign / static_cast<double>(fg));
    }
  }
  out.mask = ce / static_cast<double>(n);
  out.displacement = fg > 0 ? l1 / static_cast<double>(fg) : 0.0;
  return out;
}

nn::Matrix gather_inputs(const PrifModel& model, std::span<const RayRecord* const> batch,
                         const Eigen::RowVectorXf* latent) {
  std::vector<RayRecord> rows;
  rows.reserve(batch.size());
  for (const auto* r : batch) rows.push_back(*r);
  return model.build_inputs(rows, latent);
}

void check_dataset(const PrifModel& model, const RayDataset& dataset) {
  if (dataset.mode != model.mode()) {
    fail(ErrorKind::mode_mismatch, "dataset encoded as " + std::string(rays::to_string(dataset.mode)) +
                                       ", model expects " + std::string(rays::to_string(model.mode())));
  }
  for (const auto& r : dataset.records) {
    if (r.shape_id >= model.shape_count()) fail(ErrorKind::unknown_shape, "shape id " + std::to_string(r.shape_id));
  }
}

void check_config(const TrainConfig& c) {
  if (c.epochs < 0 || c.batch_size < 1 || !(c.lr_start > 0.0) || !(c.lr_end > 0.0) || c.lr_end > c.lr_start) {
    fail(ErrorKind::invalid_argument, "invalid training configuration");
  }
}

}  // namespace

std::vector<EpochLoss> train(PrifModel& model, const RayDataset& dataset, const TrainConfig& config,
                             const ProgressFn& progress) {
  check_config(config);
  check_dataset(model, dataset);
  std::vector<EpochLoss> trace;
  const std::size_t n = dataset.records.size();
  if (config.epochs == 0 || n == 0) return trace;

  const auto batch = static_cast<std::size_t>(config.batch_size);
  const auto steps_per_epoch = static_cast<std::int64_t>((n + batch - 1) / batch);
  const std::int64_t total_steps = steps_per_epoch * config.epochs;
  const int latent_dim = model.latent_dim();

  std::vector<std::span<float>> params = model.trunk().parameters();
  if (auto* m = model.mask_net()) {
    auto extra = m->parameters();
    params.insert(params.end(), extra.begin(), extra.end());
  }
  nn::Matrix latent_grad;
  if (latent_dim > 0) {
    params.emplace_back(model.latents().data(), model.latents().size());
    latent_grad = nn::Matrix::Zero(model.latents().rows(), latent_dim);
  }
  nn::AdamState adam = nn::adam_init(params);

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const RayRecord*> rows;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_mask = 0.0;
    double sum_disp = 0.0;
    double lr = config.lr_start;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      rows.clear();
      for (std::size_t k = start; k < end; ++k) rows.push_back(&dataset.records[order[k]]);
      const nn::Matrix inputs = gather_inputs(model, rows, nullptr);
      const GeometryPass pass = forward_geometry(model, inputs, true);
      const BatchLoss bl = batch_loss(pass, rows, config.weight_s, config.weight_a);
      if (!std::isfinite(bl.mask) || !std::isfinite(bl.displacement)) {
        fail(ErrorKind::non_finite, "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
      }
      GeometryGrads g = backward_geometry(model, pass, bl.ds, bl.dlogit, true);
      std::vector<std::span<float>> grads = g.trunk.tensors();
      if (model.mask_net()) {
        auto extra = g.mask.tensors();
        grads.insert(grads.end(), extra.begin(), extra.end());
      }
      if (latent_dim > 0) {
        latent_grad.setZero();
        for (std::size_t i = 0; i < rows.size(); ++i) {
          latent_grad.row(rows[i]->shape_id) += g.input.row(static_cast<Eigen::Index>(i)).tail(latent_dim);
        }
        grads.emplace_back(latent_grad.data(), latent_grad.size());
      }
      lr = nn::cosine_lr(step, total_steps, config.lr_start, config.lr_end);
      nn::adam_step(adam, params, grads, lr);
      ++step;
      const double w = static_cast<double>(end - start);
      sum_mask += bl.mask * w;
      sum_disp += bl.displacement * w;
    }
    EpochLoss e;
    e.epoch = epoch;
    e.mask = sum_mask / static_cast<double>(n);
    e.displacement = sum_disp / static_cast<double>(n);
    e.total = e.mask + e.displacement;
    e.lr = lr;
    trace.push_back(e);
    if (progress) progress(e);
  }
  return trace;
}

std::vector<EpochLoss> train_color(PrifModel& model, const RayDataset& dataset, const TrainConfig& config,
                                   const ProgressFn& progress) {
  check_config(config);
  check_dataset(model, dataset);
  auto* color = model.color_net();
  if (!color) fail(ErrorKind::missing_head, "model has no color head");
  if (!dataset.has_colors()) fail(ErrorKind::invalid_argument, "dataset carries no colors");
  std::vector<std::size_t> fg;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    if (dataset.records[i].foreground()) fg.push_back(i);
  }
  std::vector<EpochLoss> trace;
  if (config.epochs == 0 || fg.empty()) return trace;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const auto steps_per_epoch = static_cast<std::int64_t>((fg.size() + batch - 1) / batch);
  const std::int64_t total_steps = steps_per_epoch * config.epochs;
  auto params = color->parameters();
  nn::AdamState adam = nn::adam_init(params);
  std::mt19937_64 rng(config.seed);
  std::vector<const RayRecord*> rows;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(fg.begin(), fg.end(), rng);
    double sum = 0.0;
    double lr = config.lr_start;
    for (std::size_t start = 0; start < fg.size(); start += batch) {
      const std::size_t end = std::min(fg.size(), start + batch);
      rows.clear();
      for (std::size_t k = start; k < end; ++k) rows.push_back(&dataset.records[fg[k]]);
      const nn::Matrix inputs = gather_inputs(model, rows, nullptr);
      nn::Tape tape;
      const nn::Matrix logits = color->forward(inputs, &tape);
      const nn::Matrix rgb = (1.0f + (-logits.array()).exp()).inverse().matrix();
      const auto m = static_cast<float>(end - start);
      nn::Matrix grad(rgb.rows(), 3);
      double se = 0.0;
      for (Eigen::Index i = 0; i < rgb.rows(); ++i) {
        const auto& target = dataset.colors[fg[start + static_cast<std::size_t>(i)]];
        for (int ch = 0; ch < 3; ++ch) {
          const float diff = rgb(i, ch) - target[ch];
          se += static_cast<double>(diff) * diff;
          grad(i, ch) = 2.0f * diff * rgb(i, ch) * (1.0f - rgb(i, ch)) / (3.0f * m);
        }
      }
      const double mse = se / (3.0 * m);
      if (!std::isfinite(mse)) fail(ErrorKind::non_finite, "non-finite color loss");
      auto g = color->backward(tape, grad, true);
      lr = nn::cosine_lr(step, total_steps, config.lr_start, config.lr_end);
      nn::adam_step(adam, params, g.tensors(), lr);
      ++step;
      sum += mse * m;
    }
    EpochLoss e;
    e.epoch = epoch;
    e.total = sum / static_cast<double>(fg.size());
    e.lr = lr;
    trace.push_back(e);
    if (progress) progress(e);
  }
  return trace;
}

std::vector<geometry::Ray> rig_rays(std::span<const geometry::Camera> rig) {
  std::vector<geometry::Ray> out;
  for (const auto& cam : rig) {
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) out.push_back(geometry::camera_ray(cam, x, y));
    }
  }
  return out;
}

namespace {

constexpr std::size_t kChunk = 4096;

std::vector<RayEncoding> encode_all(std::span<const geometry::Ray> rays, EncodingMode mode) {
  std::vector<RayEncoding> out;
  out.reserve(rays.size());
  for (const auto& r : rays) out.push_back(rays::encode_ray(r, mode));
  return out;
}

/// d s / d p from input gradients of one evaluated chunk.
Vec3 position_gradient(const nn::Matrix& input_grad, Eigen::Index row, const Vec3& d) {
  const Vec3 g_foot = input_grad.block<1, 3>(row, 0).transpose().cast<double>();
  return g_foot - g_foot.dot(d) * d;
}

}  // namespace

std::vector<Vec3> displacement_position_gradients(const PrifModel& model, std::span<const geometry::Ray> rays,
                                                  std::span<const std::uint16_t> shape_ids) {
  if (model.mode() != EncodingMode::perp_foot) {
    fail(ErrorKind::mode_mismatch, "outlier gradients are defined for perp_foot models");
  }
  std::vector<Vec3> out(rays.size());
  for (std::size_t start = 0; start < rays.size(); start += kChunk) {
    const std::size_t end = std::min(rays.size(), start + kChunk);
    const auto enc = encode_all(rays.subspan(start, end - start), model.mode());
    const auto ids = shape_ids.empty() ? shape_ids : shape_ids.subspan(start, end - start);
    const auto pass = forward_geometry(model, model.build_inputs(enc, ids), true);
    const auto n = static_cast<Eigen::Index>(end - start);
    const auto g = backward_geometry(model, pass, Eigen::VectorXf::Ones(n), Eigen::VectorXf::Zero(n), false);
    for (Eigen::Index i = 0; i < n; ++i) out[start + i] = position_gradient(g.input, i, enc[i].direction);
  }
  return out;
}

std::vector<bool> outlier_filter(const PrifModel& model, std::span<const geometry::Ray> rays, double delta,
                                 std::span<const std::uint16_t> shape_ids) {
  const auto grads = displacement_position_gradients(model, rays, shape_ids);
  std::vector<bool> keep(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) keep[i] = grads[i].norm() < delta;
  return keep;
}

PointCloud extract_points(const PrifModel& model, std::span<const geometry::Ray> rays, const ExtractOptions& options) {
  PointCloud cloud;
  cloud.rays = rays.size();
  const bool filter = options.filter_outliers && model.mode() == EncodingMode::perp_foot;
  const Eigen::RowVectorXf* latent = options.latent ? &*options.latent : nullptr;
  for (std::size_t start = 0; start < rays.size(); start += kChunk) {
    const std::size_t end = std::min(rays.size(), start + kChunk);
    const auto enc = encode_all(rays.subspan(start, end - start), model.mode());
    const std::vector<std::uint16_t> ids(enc.size(), options.shape_id);
    const nn::Matrix inputs = model.build_inputs(enc, ids, latent);
    const auto pass = forward_geometry(model, inputs, filter);
    const auto n = static_cast<Eigen::Index>(end - start);
    nn::Matrix input_grad;
    if (filter) {
      input_grad = backward_geometry(model, pass, Eigen::VectorXf::Ones(n), Eigen::VectorXf::Zero(n), false).input;
    }
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = 1.0 / (1.0 + std::exp(-static_cast<double>(pass.logit[i])));
      if (!(a >= options.mask_threshold)) {
        ++cloud.masked_out;
        continue;
      }
      if (filter && !(position_gradient(input_grad, i, enc[i].direction).norm() < options.delta)) {
        ++cloud.outliers;
        continue;
      }
      cloud.points.push_back(rays::hit_point(rays::foot_of(enc[i]), enc[i].direction, pass.s[i]));
      kept.push_back(i);
    }
    if (const auto* color = model.color_net(); color && !kept.empty()) {
      nn::Matrix sub(static_cast<Eigen::Index>(kept.size()), inputs.cols());
      for (std::size_t k = 0; k < kept.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = inputs.row(kept[k]);
      const nn::Matrix logits = color->forward(sub);
      for (Eigen::Index k = 0; k < logits.rows(); ++k) {
        const Eigen::Vector3f rgb = (1.0f + (-logits.row(k).array()).exp()).inverse().matrix().transpose();
        cloud.colors.push_back(rgb.cast<double>());
      }
    }
  }
  return cloud;
}

PointCloud extract_points(const PrifModel& model, std::span<const geometry::Camera> rig, const ExtractOptions& options) {
  const auto rays = rig_rays(rig);
  return extract_points(model, rays, options);
}

Eigen::RowVectorXf auto_decode(const PrifModel& model, std::span<const RayRecord> observations,
                               const Eigen::RowVectorXf& init, const AutoDecodeConfig& config,
                               std::vector<double>* loss_trace) {
  const int dim = model.latent_dim();
  if (dim == 0) fail(ErrorKind::invalid_argument, "auto-decoding needs a latent-conditioned model");
  if (init.size() != dim) fail(ErrorKind::shape_mismatch, "initial latent has the wrong dimension");
  if (config.steps < 0 || !(config.lr > 0.0)) fail(ErrorKind::invalid_argument, "invalid auto-decode configuration");
  Eigen::RowVectorXf latent = init;
  if (config.steps == 0 || observations.empty()) return latent;

  std::vector<std::span<float>> params{std::span<float>(latent.data(), latent.size())};
  nn::AdamState adam = nn::adam_init(params);
  Eigen::RowVectorXf grad(dim);
  std::vector<std::span<float>> grads{std::span<float>(grad.data(), grad.size())};
  std::mt19937_64 rng(config.seed);
  const auto per_step = std::min<std::size_t>(observations.size(), static_cast<std::size_t>(std::max(1, config.batch_size)));
  std::vector<std::size_t> order(observations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const RayRecord*> rows;
  for (int step = 0; step < config.steps; ++step) {
    if (per_step < observations.size()) std::shuffle(order.begin(), order.end(), rng);
    rows.clear();
    for (std::size_t k = 0; k < per_step; ++k) rows.push_back(&observations[order[k]]);
    const nn::Matrix inputs = gather_inputs(model, rows, &latent);
    const auto pass = forward_geometry(model, inputs, true);
    const auto bl = batch_loss(pass, rows, 1.0, 1.0);
    if (!std::isfinite(bl.mask) || !std::isfinite(bl.displacement)) fail(ErrorKind::non_finite, "non-finite auto-decode loss");
    const auto g = backward_geometry(model, pass, bl.ds, bl.dlogit, false);
    grad = g.input.rightCols(dim).colwise().sum();
    nn::adam_step(adam, params, grads, config.lr);
    if (loss_trace) loss_trace->push_back(bl.mask + bl.displacement);
  }
  return latent;
}

}  // namespace prif::model
