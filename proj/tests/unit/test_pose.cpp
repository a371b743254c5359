#include "helpers.hpp"
#include "prif/pose.hpp"
#include "prif/shapes.hpp"

#include <cmath>
#include <numbers>

using namespace prif;
using namespace prif::pose;

namespace {

geometry::Camera reference_camera(int res = 8) {
  return geometry::look_at(Vec3(0.4, -2.3, 0.9), Vec3::Zero(), geometry::degrees_to_radians(50.0), res, res);
}

model::PrifModel small_model() {
  model::ModelConfig cfg;
  cfg.depth = 3;
  cfg.width = 16;
  cfg.seed = 3;
  return model::PrifModel::create(cfg);
}

Eigen::Matrix<double, 6, 1> stack(const rays::RayEncoding& e) {
  Eigen::Matrix<double, 6, 1> v;
  v << e.anchor, e.direction;
  return v;
}

}  // namespace

TEST_CASE("so3 helpers") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 w = testing::random_unit(rng) * (0.1 + 2.9 * (i / 100.0));
    CHECK((log_so3(exp_so3(w)) - w).norm() < 1e-9);
    const Mat3 r = exp_so3(w);
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
  }
  const Vec3 big(0, 0, 1.5 * std::numbers::pi);
  const Vec3 wrapped = wrap_rotation(big);
  CHECK(wrapped.norm() < std::numbers::pi);
  CHECK((exp_so3(wrapped) - exp_so3(big)).norm() < 1e-12);
  CHECK(rotation_error_degrees(Vec3(0, 0, geometry::degrees_to_radians(10.0)), Vec3::Zero()) ==
        doctest::Approx(10.0).epsilon(1e-9));

  // Jacobian of the rotation action against differences.
  for (const Vec3 w : {Vec3(0, 0, 0), Vec3(0.3, -0.2, 0.5), Vec3(1e-12, 0, 0)}) {
    const Vec3 v(0.7, -1.1, 0.4);
    const Mat3 j = rotate_jacobian(w, v);
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = 1e-6;
      const Vec3 num = (exp_so3(w + e) * v - exp_so3(w - e) * v) / 2e-6;
      CHECK((j.col(k) - num).norm() < 1e-7);
    }
  }
}

TEST_CASE("identity pose reproduces the reference rays") {
  const auto cam = reference_camera();
  const auto pr = pose_to_rays(cam, PoseParams{}, rays::EncodingMode::perp_foot);
  REQUIRE(pr.rays.size() == 64);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const auto ray = geometry::camera_ray(cam, x, y);
      const auto& got = pr.rays[static_cast<std::size_t>(y * 8 + x)];
      CHECK((got.origin - ray.origin).norm() < 1e-15);
      CHECK((got.direction - ray.direction).norm() < 1e-15);
    }
  }
}

TEST_CASE("rotation about z rotates every direction about z") {
  const auto cam = reference_camera();
  const double theta = 0.3;
  PoseParams pose;
  pose.rotation = Vec3(0, 0, theta);
  const auto base = pose_to_rays(cam, PoseParams{}, rays::EncodingMode::raw);
  const auto rotated = pose_to_rays(cam, pose, rays::EncodingMode::raw);
  const Mat3 rz = Eigen::AngleAxisd(theta, Vec3::UnitZ()).toRotationMatrix();
  for (std::size_t i : {0u, 7u, 36u, 63u}) {
    CHECK((rotated.rays[i].direction - rz * base.rays[i].direction).norm() < 1e-12);
  }
}

TEST_CASE("pose jacobians match finite differences") {
  const auto cam = reference_camera(4);
  std::mt19937_64 rng(2);
  for (auto mode : {rays::EncodingMode::perp_foot, rays::EncodingMode::plucker, rays::EncodingMode::raw}) {
    PoseParams pose;
    pose.rotation = testing::random_unit(rng) * 0.2;
    pose.translation = testing::random_unit(rng) * 0.1;
    const auto pr = pose_to_rays(cam, pose, mode);
    for (int k = 0; k < 6; ++k) {
      PoseParams plus = pose, minus = pose;
      const double h = 1e-4;
      if (k < 3) {
        plus.rotation[k] += h;
        minus.rotation[k] -= h;
      } else {
        plus.translation[k - 3] += h;
        minus.translation[k - 3] -= h;
      }
      const auto a = pose_to_rays(cam, plus, mode);
      const auto b = pose_to_rays(cam, minus, mode);
      for (std::size_t i = 0; i < pr.encodings.size(); ++i) {
        const Eigen::Matrix<double, 6, 1> num = (stack(a.encodings[i]) - stack(b.encodings[i])) / (2.0 * h);
        const Eigen::Matrix<double, 6, 1> ana = pr.jacobians[i].col(k);
        CHECK((num - ana).norm() <= 1e-2 * std::max(num.norm(), 1e-6));
      }
    }
  }
}

TEST_CASE("silhouette loss") {
  const eval::Image t{2, 2, {0, 1, 1, 0}};
  CHECK(silhouette_loss(t, t).loss == 0.0);
  const eval::Image half{2, 2, {0.5f, 0.5f, 0.5f, 0.5f}};
  CHECK(silhouette_loss(half, t).loss == doctest::Approx(0.25));
  const eval::Image p{2, 2, {0.1f, 0.7f, 0.4f, 0.9f}};
  const auto sl = silhouette_loss(p, t);
  for (std::size_t i = 0; i < 4; ++i) {
    eval::Image up = p, dn = p;
    up.data[i] += 1e-3f;
    dn.data[i] -= 1e-3f;
    const double num = (silhouette_loss(up, t).loss - silhouette_loss(dn, t).loss) /
                       (static_cast<double>(up.data[i]) - dn.data[i]);
    CHECK(std::abs(num - sl.gradient[i]) < 1e-6);
  }
  const eval::Image wrong{3, 1, {0, 0, 0}};
  CHECK(testing::error_kind([&] { silhouette_loss(wrong, t); }) == ErrorKind::resolution_mismatch);
}

TEST_CASE("end-to-end pose gradient") {
  const auto m = small_model();
  const auto cam = reference_camera(24);
  PoseParams truth;
  truth.rotation = Vec3(0.05, -0.02, 0.03);
  const auto target = render_mask(m, apply_pose(cam, truth));
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 8; ++trial) {
    PoseParams pose;
    pose.rotation = testing::random_unit(rng) * 0.1;
    pose.translation = testing::random_unit(rng) * 0.05;
    const auto lg = pose_loss(m, target, cam, pose);
    Eigen::Matrix<double, 6, 1> num;
    for (int k = 0; k < 6; ++k) {
      PoseParams plus = pose, minus = pose;
      const double h = 1e-3;
      if (k < 3) {
        plus.rotation[k] += h;
        minus.rotation[k] -= h;
      } else {
        plus.translation[k - 3] += h;
        minus.translation[k - 3] -= h;
      }
      num[k] = (pose_loss(m, target, cam, plus).loss - pose_loss(m, target, cam, minus).loss) / (2.0 * h);
    }
    CHECK((lg.gradient - num).norm() <= 5e-2 * num.norm());
  }
}

TEST_CASE("optimizer contracts") {
  const auto m = small_model();
  const auto cam = reference_camera(16);
  const auto target = render_mask(m, cam);
  const auto h = m.geometry_hash();
  PoseOptConfig cfg;
  cfg.steps = 10;
  const auto r = optimize_pose(m, target, cam, PoseParams{}, cfg);
  CHECK(r.loss_trace.size() == 10);
  CHECK(r.loss_trace.front() < 1e-12);
  CHECK(r.pose.rotation.norm() < 1e-6);
  CHECK(r.pose.translation.norm() < 1e-6);
  CHECK(m.geometry_hash() == h);

  PoseParams off;
  off.rotation = Vec3(0, 0, 0.05);
  const auto moved = optimize_pose(m, target, cam, off, cfg);
  CHECK(m.geometry_hash() == h);
  CHECK(moved.loss_trace.back() <= moved.loss_trace.front());

  const eval::Image wrong{3, 3, std::vector<float>(9)};
  CHECK(testing::error_kind([&] { pose_loss(m, wrong, cam, PoseParams{}); }) == ErrorKind::resolution_mismatch);
  PoseOptConfig bad;
  bad.lr_end = 1.0;
  CHECK(testing::error_kind([&] { optimize_pose(m, target, cam, PoseParams{}, bad); }) == ErrorKind::invalid_argument);
}

TEST_CASE("mesh silhouette") {
  const auto mesh = geometry::make_icosphere(2, 0.9);
  const auto bvh = geometry::build_bvh(mesh);
  const auto cam = reference_camera(16);
  const auto img = mesh_silhouette(mesh, bvh, cam);
  CHECK(img.at(8, 8) == 1.0f);
  CHECK(img.at(0, 0) == 0.0f);
}
