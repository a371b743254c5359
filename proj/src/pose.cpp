#include "prif/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace prif::pose {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

constexpr double kSmallAngle = 1e-10;

}  // namespace

Mat3 exp_so3(const Vec3& w) {
  const double theta = w.norm();
  if (theta < kSmallAngle) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

Vec3 log_so3(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Mat3 rotate_jacobian(const Vec3& w, const Vec3& v) {
  const double sq = w.squaredNorm();
  if (sq < kSmallAngle * kSmallAngle) return -skew(v);
  const Mat3 r = exp_so3(w);
  return -r * skew(v) * (w * w.transpose() + (r.transpose() - Mat3::Identity()) * skew(w)) / sq;
}

Vec3 wrap_rotation(const Vec3& w) {
  const double theta = w.norm();
  if (theta < std::numbers::pi) return w;
  return w * (1.0 - 2.0 * std::numbers::pi / theta);
}

geometry::Camera apply_pose(const geometry::Camera& reference, const PoseParams& pose) {
  geometry::Camera cam = reference;
  cam.rotation = exp_so3(pose.rotation) * reference.rotation;
  cam.position = exp_so3(pose.rotation) * reference.position + pose.translation;
  return cam;
}

PoseRays pose_to_rays(const geometry::Camera& reference, const PoseParams& pose, rays::EncodingMode mode) {
  const geometry::Camera cam = apply_pose(reference, pose);
  const Mat3 r = exp_so3(pose.rotation);
  const Vec3& p = cam.position;
  const Mat3 dp_dw = rotate_jacobian(pose.rotation, reference.position);
  const std::size_t n = static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height);
  PoseRays out;
  out.rays.reserve(n);
  out.encodings.reserve(n);
  out.jacobians.reserve(n);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 w = (reference.rotation * cam.pixel_direction_camera(x + 0.5, y + 0.5)).normalized();
      const Vec3 d = r * w;
      const geometry::Ray ray{p, d};
      out.rays.push_back(ray);
      out.encodings.push_back(rays::encode_ray(ray, mode));
      const Mat3 dd_dw = rotate_jacobian(pose.rotation, w);
      Mat3 da_dp;
      Mat3 da_dd;
      switch (mode) {
        case rays::EncodingMode::perp_foot:
          da_dp = Mat3::Identity() - d * d.transpose();
          da_dd = -d.dot(p) * Mat3::Identity() - d * p.transpose();
          break;
        case rays::EncodingMode::plucker:
          da_dp = -skew(d);
          da_dd = skew(p);
          break;
        case rays::EncodingMode::raw:
          da_dp = Mat3::Identity();
          da_dd = Mat3::Zero();
          break;
      }
      Mat6 j = Mat6::Zero();
      j.block<3, 3>(0, 0) = da_dd * dd_dw + da_dp * dp_dw;
      j.block<3, 3>(0, 3) = da_dp;
      j.block<3, 3>(3, 0) = dd_dw;
      out.jacobians.push_back(j);
    }
  }
  return out;
}

SilhouetteLoss silhouette_loss(const eval::Image& predicted, const eval::Image& target) {
  if (predicted.width != target.width || predicted.height != target.height ||
      predicted.data.size() != target.data.size()) {
    fail(ErrorKind::resolution_mismatch, "predicted " + std::to_string(predicted.width) + "x" +
                                             std::to_string(predicted.height) + " vs target " +
                                             std::to_string(target.width) + "x" + std::to_string(target.height));
  }
  SilhouetteLoss out;
  const std::size_t n = predicted.data.size();
  if (n == 0) return out;
  out.gradient.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = static_cast<double>(predicted.data[i]) - static_cast<double>(target.data[i]);
    sum += diff * diff;
    out.gradient[i] = 2.0 * diff / static_cast<double>(n);
  }
  out.loss = sum / static_cast<double>(n);
  return out;
}

namespace {

struct MaskPass {
  eval::Image mask;
  model::GeometryPass pass;
};

MaskPass posed_mask(const model::PrifModel& model, const geometry::Camera& cam, std::span<const rays::RayEncoding> enc,
                    std::uint16_t shape_id, bool keep_tape) {
  const std::vector<std::uint16_t> ids(enc.size(), shape_id);
  MaskPass out;
  out.pass = model::forward_geometry(model, model.build_inputs(enc, ids), keep_tape);
  out.mask = {cam.width, cam.height, std::vector<float>(enc.size())};
  for (std::size_t i = 0; i < enc.size(); ++i) {
    out.mask.data[i] = 1.0f / (1.0f + std::exp(-out.pass.logit[static_cast<Eigen::Index>(i)]));
  }
  return out;
}

}  // namespace

eval::Image mesh_silhouette(const geometry::TriangleMesh& mesh, const geometry::Bvh& bvh, const geometry::Camera& camera) {
  eval::Image img{camera.width, camera.height, std::vector<float>(static_cast<std::size_t>(camera.width) * camera.height)};
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      img.at(x, y) = geometry::cast_ray(bvh, mesh, geometry::camera_ray(camera, x, y)) ? 1.0f : 0.0f;
    }
  }
  return img;
}

eval::Image render_mask(const model::PrifModel& model, const geometry::Camera& camera, std::uint16_t shape_id) {
  const auto rays = model::rig_rays(std::span<const geometry::Camera>(&camera, 1));
  std::vector<rays::RayEncoding> enc;
  enc.reserve(rays.size());
  for (const auto& r : rays) enc.push_back(rays::encode_ray(r, model.mode()));
  return posed_mask(model, camera, enc, shape_id, false).mask;
}

PoseLossGrad pose_loss(const model::PrifModel& model, const eval::Image& target, const geometry::Camera& reference,
                       const PoseParams& pose, std::uint16_t shape_id) {
  if (target.width != reference.width || target.height != reference.height) {
    fail(ErrorKind::resolution_mismatch, "target mask does not match the camera resolution");
  }
  const PoseRays pr = pose_to_rays(reference, pose, model.mode());
  const geometry::Camera cam = apply_pose(reference, pose);
  auto mp = posed_mask(model, cam, pr.encodings, shape_id, true);
  const SilhouetteLoss sl = silhouette_loss(mp.mask, target);
  PoseLossGrad out;
  out.loss = sl.loss;
  if (!std::isfinite(out.loss)) fail(ErrorKind::non_finite, "non-finite silhouette loss");
  const auto n = static_cast<Eigen::Index>(pr.encodings.size());
  Eigen::VectorXf dlogit(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = mp.mask.data[static_cast<std::size_t>(i)];
    dlogit[i] = static_cast<float>(sl.gradient[static_cast<std::size_t>(i)] * a * (1.0 - a));
  }
  const auto g = model::backward_geometry(model, mp.pass, Eigen::VectorXf::Zero(n), dlogit, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Matrix<double, 6, 1> gi = g.input.block<1, 6>(i, 0).transpose().cast<double>();
    out.gradient += pr.jacobians[static_cast<std::size_t>(i)].transpose() * gi;
  }
  return out;
}

PoseResult optimize_pose(const model::PrifModel& model, const eval::Image& target, const geometry::Camera& reference,
                         const PoseParams& init, const PoseOptConfig& config) {
  if (config.steps < 0 || !(config.lr > 0.0) || !(config.lr_end > 0.0) || config.lr_end > config.lr) fail(ErrorKind::invalid_argument, "invalid pose optimizer configuration");
  PoseResult result;
  result.pose = init;
  std::vector<float> params(6);
  std::vector<float> grads(6);
  std::vector<std::span<float>> param_spans{std::span<float>(params)};
  std::vector<std::span<float>> grad_spans{std::span<float>(grads)};
  auto adam = nn::adam_init(param_spans);
  for (int step = 0; step < config.steps; ++step) {
    const PoseLossGrad lg = pose_loss(model, target, reference, result.pose, config.shape_id);
    result.loss_trace.push_back(lg.loss);
    for (int k = 0; k < 3; ++k) {
      params[k] = static_cast<float>(result.pose.rotation[k]);
      params[k + 3] = static_cast<float>(result.pose.translation[k]);
    }
    for (int k = 0; k < 6; ++k) grads[k] = static_cast<float>(lg.gradient[k]);
    nn::adam_step(adam, param_spans, grad_spans, nn::cosine_lr(step, config.steps, config.lr, config.lr_end));
    result.pose.rotation = wrap_rotation(Vec3(params[0], params[1], params[2]));
    result.pose.translation = Vec3(params[3], params[4], params[5]);
  }
  return result;
}

double rotation_error_degrees(const Vec3& a, const Vec3& b) {
  const Mat3 rel = exp_so3(a) * exp_so3(b).transpose();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace prif::pose
