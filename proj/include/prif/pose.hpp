#pragma once

#include "prif/evaluation.hpp"
#include "prif/geometry.hpp"
#include "prif/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace prif::pose {

/// Pose offset from a reference camera. The rotation orbits the camera about
/// the world origin and the translation shifts it:
///   R = Exp(rotation) * R_ref,  c = Exp(rotation) * c_ref + translation.
struct PoseParams {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
};

using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Rodrigues rotation matrix.
Mat3 exp_so3(const Vec3& w);
/// Inverse of exp_so3 (angle in [0, pi]).
Vec3 log_so3(const Mat3& r);

/// d (Exp(w) v) / d w.
Mat3 rotate_jacobian(const Vec3& w, const Vec3& v);

/// Keeps |rotation| < pi by mapping w to the equivalent w (1 - 2 pi / |w|).
Vec3 wrap_rotation(const Vec3& w);

geometry::Camera apply_pose(const geometry::Camera& reference, const PoseParams& pose);

struct PoseRays {
  std::vector<geometry::Ray> rays;
  std::vector<rays::RayEncoding> encodings;
  /// Rows: anchor (3), direction (3). Columns: rotation (3), translation (3).
  std::vector<Mat6> jacobians;
};

/// Row-major pixel rays of the posed camera, their encodings and the
/// Jacobians of each encoding with respect to the pose.
PoseRays pose_to_rays(const geometry::Camera& reference, const PoseParams& pose, rays::EncodingMode mode);

struct SilhouetteLoss {
  double loss = 0.0;
  /// d loss / d predicted probability, per pixel.
  std::vector<double> gradient;
};

/// Mean squared difference between probabilities and a target mask (binary
/// when read from disk, soft when rendered by a model).
SilhouetteLoss silhouette_loss(const eval::Image& predicted, const eval::Image& target);

/// Binary silhouette of a mesh by exact ray casting.
eval::Image mesh_silhouette(const geometry::TriangleMesh& mesh, const geometry::Bvh& bvh, const geometry::Camera& camera);

/// Predicted foreground probability per pixel.
eval::Image render_mask(const model::PrifModel& model, const geometry::Camera& camera, std::uint16_t shape_id = 0);

struct PoseLossGrad {
  double loss = 0.0;
  Eigen::Matrix<double, 6, 1> gradient = Eigen::Matrix<double, 6, 1>::Zero();
};

/// Silhouette loss of the posed render and its gradient with respect to
/// (rotation, translation).
PoseLossGrad pose_loss(const model::PrifModel& model, const eval::Image& target, const geometry::Camera& reference,
                       const PoseParams& pose, std::uint16_t shape_id = 0);

struct PoseOptConfig {
  int steps = 500;
  /// Cosine-decayed from lr to lr_end over the steps.
  double lr = 1e-2;
  double lr_end = 1e-4;
  std::uint16_t shape_id = 0;
};

struct PoseResult {
  PoseParams pose;
  std::vector<double> loss_trace;
};

/// Adam on the six pose parameters; the model is never modified.
PoseResult optimize_pose(const model::PrifModel& model, const eval::Image& target, const geometry::Camera& reference,
                         const PoseParams& init, const PoseOptConfig& config = {});

/// Angle of Exp(a) Exp(b)^T in degrees.
double rotation_error_degrees(const Vec3& a, const Vec3& b);

}  // namespace prif::pose
