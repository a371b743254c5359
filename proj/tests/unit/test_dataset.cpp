#include "helpers.hpp"
#include "prif/dataset.hpp"
#include "prif/shapes.hpp"

#include <cmath>

using namespace prif;
using namespace prif::data;
using rays::EncodingMode;

namespace {

struct Scene {
  geometry::TriangleMesh mesh = geometry::make_icosphere(3, 0.9);
  geometry::Bvh bvh{mesh};
  std::vector<geometry::Camera> rig =
      geometry::fibonacci_camera_rig(4, 2.5, geometry::degrees_to_radians(50.0), 36, 30);
};

}  // namespace

TEST_CASE("generated dataset layout and oracle agreement") {
  Scene sc;
  const auto ds = generate_ray_dataset(sc.mesh, sc.bvh, sc.rig, EncodingMode::perp_foot);
  CHECK(ds.size() == 4u * 36u * 30u);
  REQUIRE(ds.shapes.size() == 1);
  std::size_t i = 0;
  std::size_t oracle_hits = 0;
  for (const auto& cam : sc.rig) {
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x, ++i) {
        const auto ray = geometry::camera_ray(cam, x, y);
        const auto hit = geometry::cast_ray(sc.bvh, sc.mesh, ray);
        const auto& r = ds.records[i];
        REQUIRE(r.foreground() == hit.has_value());
        REQUIRE((r.direction.cast<double>() - ray.direction).norm() < 1e-6);
        if (!hit) {
          CHECK(r.s_gt == 0.0f);
          continue;
        }
        ++oracle_hits;
        REQUIRE(r.hit.has_value());
        // The stored (foot, d, s) reproduces the cast hit.
        CHECK((record_hit(r, ds.mode) - hit->point).norm() < 1e-5);
        // Analytic sphere: s from the foot is -sqrt(R^2 - |f|^2) up to facet error.
        const Vec3 f = rays::perpendicular_foot(ray.origin, ray.direction);
        if (f.norm() < 0.85) CHECK(r.s_gt == doctest::Approx(-std::sqrt(0.81 - f.squaredNorm())).epsilon(0.01));
      }
    }
  }
  CHECK(ds.foreground_count() == oracle_hits);
  CHECK(oracle_hits > 100);
}

TEST_CASE("record count for a 50-camera 200x200 rig") {
  // 50 cameras x 200 x 200 = 2,000,000 without building it: the per-camera
  // record count is w*h, checked on a 1-camera rig.
  Scene sc;
  const auto one = geometry::fibonacci_camera_rig(1, 2.5, geometry::degrees_to_radians(50.0), 200, 200);
  CHECK(generate_ray_dataset(sc.mesh, sc.bvh, one, EncodingMode::raw).size() == 40000u);
  CHECK(50u * 40000u == 2000000u);
}

TEST_CASE("save and load reproduce records bitwise") {
  Scene sc;
  testing::TempDir tmp;
  for (auto mode : {EncodingMode::perp_foot, EncodingMode::plucker, EncodingMode::raw}) {
    const auto ds = generate_ray_dataset(sc.mesh, sc.bvh, sc.rig, mode);
    save_dataset(tmp.file("d.bin"), ds);
    const auto back = load_dataset(tmp.file("d.bin"));
    CHECK(back.mode == mode);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) REQUIRE(back.records[i].same_persisted(ds.records[i]));
    CHECK(std::filesystem::file_size(tmp.file("d.bin")) > ds.size() * kRecordBytes);
  }
}

TEST_CASE("corruption") {
  Scene sc;
  const auto ds = generate_ray_dataset(sc.mesh, sc.bvh, sc.rig, EncodingMode::perp_foot);
  const auto same = corrupt(ds, Corruption::noise, 0.0, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) REQUIRE(same.records[i].same_persisted(ds.records[i]));

  const auto a = corrupt(ds, Corruption::noise, 0.05, 3);
  const auto b = corrupt(ds, Corruption::noise, 0.05, 3);
  double mean_shift = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    REQUIRE(a.records[i].same_persisted(b.records[i]));
    if (!a.records[i].foreground()) continue;
    // Round trip still holds against the perturbed point.
    const auto& r = a.records[i];
    REQUIRE(r.hit.has_value());
    CHECK((record_hit(r, a.mode) - r.hit->cast<double>()).norm() < 1e-5);
    mean_shift += (r.hit->cast<double>() - ds.records[i].hit->cast<double>()).squaredNorm();
    ++n;
  }
  // Isotropic N(0, 0.05^2) per axis: E|delta|^2 = 3 * 0.0025.
  CHECK(mean_shift / n == doctest::Approx(3 * 0.0025).epsilon(0.15));

  // Partial: build exactly 1000 foreground records.
  RayDataset fg;
  fg.mode = EncodingMode::perp_foot;
  for (std::size_t i = 0; i < ds.size() && fg.records.size() < 1000; ++i) {
    if (ds.records[i].foreground()) fg.records.push_back(ds.records[i]);
  }
  REQUIRE(fg.records.size() == 1000);
  fg.records.push_back(RayRecord{});
  fg.shapes = {{0, fg.records.size()}};
  const auto half = corrupt(fg, Corruption::partial, 0.5, 4);
  CHECK(half.foreground_count() == 500);
  CHECK(half.size() == 501);
  CHECK(testing::error_kind([&] { corrupt(ds, Corruption::noise, -0.1, 0); }) == ErrorKind::invalid_level);
  CHECK(testing::error_kind([&] { corrupt(ds, Corruption::partial, 0.0, 0); }) == ErrorKind::invalid_level);
  CHECK(testing::error_kind([&] { corrupt(ds, Corruption::partial, 1.5, 0); }) == ErrorKind::invalid_level);
}

TEST_CASE("points to rays") {
  const std::vector<Vec3> pts{Vec3(1, 0, 0)};
  const std::vector<Vec3> views{Vec3(2, 0, 0), Vec3(-5, 0, 0)};
  const auto recs = points_to_rays(pts, views, EncodingMode::perp_foot);
  REQUIRE(recs.size() == 1);
  CHECK((recs[0].direction.cast<double>() - Vec3(-1, 0, 0)).norm() < 1e-7);
  CHECK(recs[0].anchor.norm() < 1e-7);
  CHECK(recs[0].s_gt == doctest::Approx(-1.0));
  CHECK(recs[0].a_gt == 1);

  std::mt19937_64 rng(5);
  std::vector<Vec3> cloud;
  for (int i = 0; i < 200; ++i) cloud.push_back(testing::random_unit(rng) * 0.8);
  const std::vector<Vec3> rig{Vec3(2.5, 0, 0), Vec3(0, 0, 2.5), Vec3(0, -2.5, 0)};
  const auto many = points_to_rays(cloud, rig, EncodingMode::plucker);
  for (std::size_t i = 0; i < cloud.size(); ++i) CHECK((record_hit(many[i], EncodingMode::plucker) - cloud[i]).norm() < 1e-6);

  CHECK(testing::error_kind([&] { points_to_rays(pts, {}, EncodingMode::perp_foot); }) == ErrorKind::invalid_argument);
  const std::vector<Vec3> on{Vec3(2, 0, 0)};
  CHECK(testing::error_kind([&] { points_to_rays(on, views, EncodingMode::perp_foot); }) == ErrorKind::invalid_argument);
}

TEST_CASE("append_shape keeps ids dense") {
  Scene sc;
  RayDataset all;
  for (int k = 0; k < 3; ++k) append_shape(all, generate_ray_dataset(sc.mesh, sc.bvh, sc.rig, EncodingMode::perp_foot));
  CHECK(all.shape_count() == 3);
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = all.shapes[k].begin; i < all.shapes[k].end; ++i) REQUIRE(all.records[i].shape_id == k);
  }
  CHECK(testing::error_kind([&] {
    append_shape(all, generate_ray_dataset(sc.mesh, sc.bvh, sc.rig, EncodingMode::raw));
  }) == ErrorKind::mode_mismatch);
}

TEST_CASE("rig json round trip") {
  const auto rig = geometry::fibonacci_camera_rig(5, 2.5, 0.7, 8, 6);
  const auto back = rig_from_json(rig_to_json(rig));
  REQUIRE(back.size() == rig.size());
  for (std::size_t i = 0; i < rig.size(); ++i) {
    CHECK(back[i].position == rig[i].position);
    CHECK(back[i].rotation == rig[i].rotation);
    CHECK(back[i].width == 8);
    CHECK(back[i].height == 6);
    CHECK(back[i].fov_y == rig[i].fov_y);
  }
}
