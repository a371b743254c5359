#include "helpers.hpp"
#include "prif/sdf.hpp"
#include "prif/shapes.hpp"

#include <cmath>

using namespace prif;
using namespace prif::sdf;

TEST_CASE("ground truth signs and magnitudes") {
  const auto ico = geometry::make_icosphere(4);
  const auto bvh = geometry::build_bvh(ico);
  CHECK(is_watertight(ico));
  CHECK_FALSE(is_watertight(geometry::make_step(0.5)));
  CHECK(sdf_ground_truth(ico, bvh, Vec3::Zero()) == doctest::Approx(-1.0).epsilon(2e-3));
  CHECK(sdf_ground_truth(ico, bvh, Vec3(2, 0, 0)) == doctest::Approx(1.0).epsilon(2e-3));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = testing::random_point(rng, 1.5);
    const double v = sdf_ground_truth(ico, bvh, p);
    REQUIRE(std::abs(std::abs(v) - std::sqrt(geometry::closest_point_brute_force(ico, p).squared_distance)) < 1e-9);
    // Away from the facet band the sign agrees with the analytic sphere.
    if (std::abs(p.norm() - 1.0) > 3e-3) REQUIRE((v < 0) == (p.norm() < 1.0));
  }
  // Along a transversal the sign flips exactly once per crossing.
  int flips = 0;
  double prev = sdf_ground_truth(ico, bvh, Vec3(-1.5, 0.1, 0.2));
  for (int k = 1; k <= 100; ++k) {
    const double v = sdf_ground_truth(ico, bvh, Vec3(-1.5 + 3.0 * k / 100.0, 0.1, 0.2));
    flips += (v < 0) != (prev < 0);
    prev = v;
  }
  CHECK(flips == 2);
}

TEST_CASE("training samples") {
  const auto ico = geometry::make_icosphere(3);
  const auto bvh = geometry::build_bvh(ico);
  const auto s = sample_sdf_training_set(ico, bvh, 2000, 3);
  REQUIRE(s.size() == 2000);
  std::size_t near = 0;
  for (const auto& x : s) {
    REQUIRE(x.sdf == static_cast<float>(sdf_ground_truth(ico, bvh, x.point.cast<double>())));
    REQUIRE(x.point.norm() <= kUniformRadius * 1.0001f + 0.1f);
    near += std::abs(x.sdf) < 0.05f;
  }
  CHECK(near >= 1500);
  const auto again = sample_sdf_training_set(ico, bvh, 2000, 3);
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE((again[i].point == s[i].point && again[i].sdf == s[i].sdf));

  testing::TempDir tmp;
  save_sdf_samples(tmp.file("s.bin"), s);
  const auto back = load_sdf_samples(tmp.file("s.bin"));
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE((back[i].point == s[i].point && back[i].sdf == s[i].sdf));
}

TEST_CASE("sphere tracing an analytic sphere") {
  int calls = 0;
  const auto sphere = [&](const Vec3& p) {
    ++calls;
    return p.norm() - 1.0;
  };
  const auto r = sphere_trace(sphere, {Vec3(2, 0, 0), Vec3(-1, 0, 0)});
  REQUIRE(r.converged);
  REQUIRE(r.hit);
  CHECK((*r.hit - Vec3(1, 0, 0)).norm() < 1e-3);
  CHECK(r.steps == calls);
  CHECK(r.steps >= 2);
  const auto miss = sphere_trace(sphere, {Vec3(2, 0, 0), Vec3(1, 0, 0)}, kDefaultMaxSteps, 1e-4, 10.0);
  CHECK_FALSE(miss.converged);
  CHECK(kDefaultMaxSteps == 100);

  // t never decreases for a true distance field outside the surface.
  double last_t = -1.0;
  const auto watch = [&](const Vec3& p) {
    const double t = (p - Vec3(0, 3, 0)).norm();
    CHECK(t >= last_t);
    last_t = t;
    return p.norm() - 1.0;
  };
  sphere_trace(watch, {Vec3(0, 3, 0), Vec3(0, -1, 0)});
}

TEST_CASE("network tracing counts every query") {
  auto net = SdfNetwork::create(sdf_spec(3, 16), 1);
  std::mt19937_64 rng(2);
  std::vector<geometry::Ray> rays;
  for (int i = 0; i < 50; ++i) rays.push_back({testing::random_unit(rng) * 2.0, testing::random_unit(rng)});
  const auto before = net.queries().value();
  const auto res = sphere_trace_batch(net, rays, 20);
  std::uint64_t steps = 0;
  for (const auto& r : res) {
    CHECK(r.steps <= 20);
    steps += static_cast<std::uint64_t>(r.steps);
  }
  CHECK(net.queries().value() - before == steps);
  CHECK(testing::error_kind([] { SdfNetwork(nn::Mlp::create(nn::desk_preset(6, 2), 0)); }) == ErrorKind::invalid_spec);
}

TEST_CASE("sdf training") {
  const auto ico = geometry::make_icosphere(3, 0.9);
  const auto bvh = geometry::build_bvh(ico);
  const auto samples = sample_sdf_training_set(ico, bvh, 4000, 4);
  auto net = SdfNetwork::create(sdf_spec(3, 32), 0);
  const auto h = net.mlp().parameter_hash();
  model::TrainConfig zero;
  zero.epochs = 0;
  train_sdf(net, samples, zero);
  CHECK(net.mlp().parameter_hash() == h);

  model::TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 256;
  tc.lr_start = 1e-3;
  auto a = SdfNetwork::create(sdf_spec(3, 32), 0);
  auto b = SdfNetwork::create(sdf_spec(3, 32), 0);
  const auto ta = train_sdf(a, samples, tc);
  train_sdf(b, samples, tc);
  CHECK(a.mlp().parameter_hash() == b.mlp().parameter_hash());
  CHECK(ta.back().total < ta.front().total);
  CHECK(sdf_mean_abs_error(a, samples) == doctest::Approx(ta.back().total).epsilon(0.5));

  testing::TempDir tmp;
  save_sdf_network(tmp.file("s.ckpt"), a);
  CHECK(load_sdf_network(tmp.file("s.ckpt")).mlp().parameter_hash() == a.mlp().parameter_hash());
}
