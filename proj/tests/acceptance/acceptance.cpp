// Acceptance suite: one PASS/FAIL line per criterion.
#include "prif/evaluation.hpp"
#include "prif/model.hpp"
#include "prif/pose.hpp"
#include "prif/rays.hpp"
#include "prif/sdf.hpp"
#include "prif/shapes.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#ifndef PRIF_ACCEPTANCE_CACHE
#define PRIF_ACCEPTANCE_CACHE "acceptance_cache"
#endif

namespace fs = std::filesystem;
using namespace prif;
using rays::EncodingMode;

namespace {

std::string g_cache = PRIF_ACCEPTANCE_CACHE;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared desk-scale fixtures

constexpr int kDeskCameras = 10;
constexpr int kDeskRes = 100;
constexpr double kDeskLr = 5e-4;

double desk_fov() { return geometry::degrees_to_radians(geometry::kDefaultFovDegrees); }

std::vector<geometry::Camera> desk_rig(int res = kDeskRes, double radius = geometry::kDefaultRigRadius,
                                       int cameras = kDeskCameras) {
  return geometry::fibonacci_camera_rig(cameras, radius, desk_fov(), res, res);
}

/// Same cameras, a pixel grid offset from the training one: none of its rays
/// were trained on.
std::vector<geometry::Camera> interleaved_rig() { return desk_rig(kDeskRes - 1); }

struct Fixture {
  geometry::TriangleMesh mesh;
  geometry::Bvh bvh;
};

Fixture make_fixture(geometry::TriangleMesh mesh) {
  auto bvh = geometry::build_bvh(mesh);
  return {std::move(mesh), std::move(bvh)};
}

Fixture icosphere_fixture() { return make_fixture(geometry::normalize_mesh(geometry::make_icosphere(4)).mesh); }

model::TrainConfig desk_train() {
  model::TrainConfig tc;
  tc.lr_start = kDeskLr;
  return tc;
}

struct Trained {
  model::PrifModel model;
  std::vector<double> loss_trace;
};

/// Trains, or loads a checkpoint cached under a hash of `key`.
Trained train_cached(const std::string& name, const nlohmann::json& key,
                     const std::function<data::RayDataset()>& make_data, const model::ModelConfig& mc,
                     const model::TrainConfig& tc) {
  const std::string dumped = key.dump();
  const auto h = fnv1a(dumped.data(), dumped.size());
  fs::create_directories(g_cache);
  const fs::path path = fs::path(g_cache) / fmt("%s-%016llx.ckpt", name.c_str(), static_cast<unsigned long long>(h));
  if (fs::exists(path)) {
    nlohmann::json header;
    auto m = model::load_model(path.string(), &header);
    return {std::move(m), header.at("loss_trace").get<std::vector<double>>()};
  }
  const auto ds = make_data();
  Trained t{model::PrifModel::create(mc), {}};
  for (const auto& e : model::train(t.model, ds, tc)) t.loss_trace.push_back(e.total);
  const fs::path tmp = path.string() + ".tmp";
  model::save_model(tmp.string(), t.model, {{"loss_trace", t.loss_trace}, {"cache_key", key}});
  fs::rename(tmp, path);
  return t;
}

Trained icosphere_model(EncodingMode mode, int cameras = kDeskCameras) {
  const auto tc = desk_train();
  model::ModelConfig mc;
  mc.mode = mode;
  const nlohmann::json key = {{"fixture", "icosphere4"}, {"mode", rays::to_string(mode)}, {"cams", cameras},
                              {"res", kDeskRes}, {"lr", tc.lr_start}, {"epochs", tc.epochs}, {"v", 1}};
  auto name = "icosphere-" + std::string(rays::to_string(mode));
  if (cameras != kDeskCameras) name += "-" + std::to_string(cameras) + "cams";
  return train_cached(name, key, [&] {
    const auto fx = icosphere_fixture();
    return data::generate_ray_dataset(fx.mesh, fx.bvh, desk_rig(kDeskRes, geometry::kDefaultRigRadius, cameras), mode);
  }, mc, tc);
}

double chamfer_on_rig(const model::PrifModel& m, const geometry::TriangleMesh& mesh,
                      const std::vector<geometry::Camera>& rig) {
  const auto pc = model::extract_points(m, rig);
  if (pc.points.empty()) return std::numeric_limits<double>::infinity();
  return eval::evaluation_protocol(pc.points, mesh, eval::kDefaultEvalPoints, 0).mean;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome c1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::normal_distribution<double> g;
  double shift_err = 0.0;
  double triple_err = 0.0;
  double trip_err = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const Vec3 d = Vec3(g(rng), g(rng), g(rng)).normalized();
    const double lambda = u(rng) * 3.0;
    const Vec3 f = rays::perpendicular_foot(p, d);
    shift_err = std::max(shift_err, (rays::perpendicular_foot(p + lambda * d, d) - f).norm());
    // Oracle: the cross-product form, evaluated independently.
    triple_err = std::max(triple_err, (d.cross(p.cross(d)) - (p - p.dot(d) * d)).norm());
    triple_err = std::max(triple_err, (f - (p - p.dot(d) * d)).norm());
    const double s = u(rng);
    const Vec3 h = rays::hit_point(f, d, s);
    trip_err = std::max(trip_err, std::abs(rays::signed_displacement(f, d, h) - s));
    trip_err = std::max(trip_err, (rays::hit_point(f, d, rays::signed_displacement(f, d, h)) - h).norm());
    for (auto mode : {EncodingMode::perp_foot, EncodingMode::plucker, EncodingMode::raw}) {
      trip_err = std::max(trip_err, (rays::foot_of(rays::encode_ray({p, d}, mode)) - f).norm());
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = shift_err <= 1e-9 && triple_err <= 1e-12 && trip_err <= 1e-9 && secs < 5.0;
  return {pass, fmt("shift %.1e (<=1e-9), triple %.1e (<=1e-12), round trip %.1e (<=1e-9), %.2fs (<5s)", shift_err,
                    triple_err, trip_err, secs)};
}

Outcome c2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, geometry::TriangleMesh>> meshes = {
      {"icosphere", geometry::make_icosphere(3)},
      {"lobed", geometry::make_lobed(2)},
      {"step", geometry::make_step(0.5)},
  };
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::normal_distribution<double> g;
  std::size_t mismatches = 0;
  std::size_t hits = 0;
  for (const auto& [name, mesh] : meshes) {
    const auto bvh = geometry::build_bvh(mesh);
    for (int i = 0; i < 10000; ++i) {
      // Half the rays aim at the object's neighbourhood, half point anywhere.
      const Vec3 origin = Vec3(u(rng), u(rng), u(rng)) * 2.0;
      const Vec3 aim(u(rng) * 0.7, u(rng) * 0.7, u(rng) * 0.7);
      const Vec3 dir = i % 2 ? Vec3(g(rng), g(rng), g(rng)) : Vec3(aim - origin);
      const geometry::Ray ray{origin, dir.normalized()};
      const auto a = geometry::cast_ray(bvh, mesh, ray);
      const auto b = geometry::cast_ray_brute_force(mesh, ray);
      if (a.has_value() != b.has_value() || (a && (a->t != b->t || a->triangle != b->triangle))) ++mismatches;
      hits += a.has_value();
    }
  }
  // Icosphere against the analytic unit sphere: every hit lies between the
  // nearest face plane and the circumscribed sphere.
  const auto ico = geometry::make_icosphere(4);
  const auto ico_bvh = geometry::build_bvh(ico);
  double inner = 1.0;
  for (const auto& t : ico.triangles) {
    const Vec3 a = ico.vertices[t[0]], b = ico.vertices[t[1]], c = ico.vertices[t[2]];
    inner = std::min(inner, std::abs((b - a).cross(c - a).normalized().dot(a)));
  }
  std::size_t outside_band = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 origin = Vec3(g(rng), g(rng), g(rng)).normalized() * 3.0;
    const Vec3 target(u(rng) * 0.8, u(rng) * 0.8, u(rng) * 0.8);
    const geometry::Ray ray{origin, (target - origin).normalized()};
    const double impact = rays::perpendicular_foot(ray.origin, ray.direction).norm();
    const auto h = geometry::cast_ray(ico_bvh, ico, ray);
    if (impact < inner - 1e-12 && !h) ++outside_band;
    if (impact > 1.0 + 1e-12 && h) ++outside_band;
    if (h && (h->point.norm() < inner - 1e-9 || h->point.norm() > 1.0 + 1e-9)) ++outside_band;
  }
  const double secs = seconds_since(t0);
  const bool pass = mismatches == 0 && outside_band == 0 && hits > 0 && secs < 30.0;
  return {pass, fmt("BVH vs brute force: %zu mismatches over 30000 rays (%zu hits); icosphere vs analytic: %zu rays "
                    "outside tessellation band [%.4f, 1]; %.1fs (<30s)",
                    mismatches, hits, outside_band, inner, secs)};
}

Outcome c3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> depth_d(2, 4), width_d(3, 8), in_d(2, 6), out_d(1, 3), coin(0, 1);
  std::normal_distribution<float> g;
  double worst = 0.0;
  std::size_t kinks = 0, compared = 0;
  for (int net = 0; net < 100; ++net) {
    nn::MlpSpec spec;
    spec.input_dim = in_d(rng);
    spec.output_dim = out_d(rng);
    spec.depth = depth_d(rng);
    spec.width = width_d(rng);
    spec.residual = coin(rng);
    spec.layer_norm = coin(rng);
    auto mlp = nn::Mlp::create(spec, 100 + net);
    // Perturb gains and offsets so layer-norm parameters carry gradient.
    for (auto& layer : mlp.layers()) {
      for (Eigen::Index k = 0; k < layer.gain.size(); ++k) layer.gain[k] += 0.3f * g(rng);
      for (Eigen::Index k = 0; k < layer.offset.size(); ++k) layer.offset[k] += 0.3f * g(rng);
      for (Eigen::Index k = 0; k < layer.bias.size(); ++k) layer.bias[k] += 0.1f * g(rng);
    }
    nn::Matrix x(5, spec.input_dim);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = g(rng);
    nn::Matrix w(5, spec.output_dim);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = g(rng);
    // Loss and the ReLU sign pattern it was evaluated under.
    auto loss = [&](const nn::Matrix& in, std::vector<bool>& pattern) {
      nn::Tape t;
      const nn::Matrix y = mlp.forward(in, &t);
      pattern.clear();
      for (std::size_t l = 0; l + 1 < t.layers.size(); ++l) {
        const auto& z = t.layers[l].pre_activation;
        for (Eigen::Index k = 0; k < z.size(); ++k) pattern.push_back(z.data()[k] > 0.0f);
      }
      return (y.cast<double>().array() * w.cast<double>().array()).sum();
    };
    std::vector<bool> pat_p, pat_m;
    nn::Tape tape;
    mlp.forward(x, &tape);
    auto grads = mlp.backward(tape, w, true);
    auto params = mlp.parameters();
    auto gts = grads.tensors();
    const float h = 1e-3f;
    double num_sq = 0.0, diff_sq = 0.0, ana_sq = 0.0;
    auto accumulate = [&](double ana, double num) {
      // A central difference straddling a ReLU kink has no derivative to match.
      if (pat_p != pat_m) {
        ++kinks;
        return;
      }
      ++compared;
      num_sq += num * num;
      ana_sq += ana * ana;
      diff_sq += (ana - num) * (ana - num);
    };
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t k = 0; k < params[t].size(); ++k) {
        const float saved = params[t][k];
        params[t][k] = saved + h;
        const double lp = loss(x, pat_p);
        params[t][k] = saved - h;
        const double lm = loss(x, pat_m);
        params[t][k] = saved;
        accumulate(gts[t][k], (lp - lm) / (2.0 * h));
      }
    }
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      nn::Matrix xp = x, xm = x;
      xp.data()[k] += h;
      xm.data()[k] -= h;
      const double lp = loss(xp, pat_p);
      const double lm = loss(xm, pat_m);
      accumulate(grads.input.data()[k], (lp - lm) / (2.0 * h));
    }
    const double rel = std::sqrt(diff_sq) / std::max({std::sqrt(num_sq), std::sqrt(ana_sq), 1e-12});
    worst = std::max(worst, rel);
  }
  const bool start_ok = nn::cosine_lr(0, 1000, 1e-4, 1e-7) == 1e-4;
  const bool end_ok = nn::cosine_lr(1000, 1000, 1e-4, 1e-7) == 1e-7;
  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-2 && start_ok && end_ok && secs < 60.0;
  return {pass, fmt("worst relative gradient error %.2e over 100 nets (<=1e-2), %zu coordinates compared, %zu skipped "
                    "at ReLU kinks; schedule endpoints %s/%s; %.1fs (<60s)",
                    worst, compared, kinks, start_ok ? "1e-4" : "WRONG", end_ok ? "1e-7" : "WRONG", secs)};
}

Outcome c4() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto fx = icosphere_fixture();
  const auto trained = icosphere_model(EncodingMode::perp_foot);
  const auto held = interleaved_rig();
  const double cd = chamfer_on_rig(trained.model, fx.mesh, held);
  const auto gt = data::generate_ray_dataset(fx.mesh, fx.bvh, held, EncodingMode::perp_foot);
  std::vector<rays::RayEncoding> enc;
  for (const auto& r : gt.records) enc.push_back(r.encoding(EncodingMode::perp_foot));
  const auto pred = model::prif_forward(trained.model, enc);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < enc.size(); ++i) correct += (pred.a[static_cast<Eigen::Index>(i)] >= 0.5f) == gt.records[i].foreground();
  const double acc = static_cast<double>(correct) / static_cast<double>(enc.size());
  const auto& tr = trained.loss_trace;
  int increases = 0;
  for (std::size_t e = 3; e + 1 < tr.size(); ++e) increases += tr[e + 1] > tr[e];
  const double secs = seconds_since(t0);
  const bool pass = cd < 1e-3 && acc > 0.99 && increases == 0 && tr.back() < 0.05 && secs < 600.0;
  return {pass, fmt("held-out CD %.2e (<1e-3), mask accuracy %.4f (>0.99), epoch-mean increases after epoch 3: %d (0), "
                    "final loss %.4f (<0.05), %.0fs (<600s incl. training if uncached)",
                    cd, acc, increases, tr.back(), secs)};
}

Outcome c5() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto fx = icosphere_fixture();
  const auto trained = icosphere_model(EncodingMode::perp_foot);
  auto cam512 = geometry::look_at(Vec3(0.0, -2.5, 0.8), Vec3::Zero(), desk_fov(), 512, 512);
  const auto r512 = eval::benchmark_render(trained.model, cam512);

  fs::create_directories(g_cache);
  const fs::path sdf_path = fs::path(g_cache) / "icosphere-sdf-v1.ckpt";
  sdf::SdfNetwork net = sdf::SdfNetwork::create(sdf::sdf_spec(6, 128), 0);
  double sdf_err = 0.0;
  if (fs::exists(sdf_path)) {
    net = sdf::load_sdf_network(sdf_path.string());
  } else {
    const auto samples = sdf::sample_sdf_training_set(fx.mesh, fx.bvh, 100000, 0);
    auto tc = desk_train();
    sdf::train_sdf(net, samples, tc);
    sdf::save_sdf_network(sdf_path.string() + ".tmp", net);
    fs::rename(sdf_path.string() + ".tmp", sdf_path);
  }
  sdf_err = sdf::sdf_mean_abs_error(net, sdf::sample_sdf_training_set(fx.mesh, fx.bvh, 20000, 99));

  auto cam128 = cam512;
  cam128.width = cam128.height = 128;
  const auto p128 = eval::benchmark_render(trained.model, cam128);
  const auto s128 = eval::benchmark_render(net, cam128);
  const double ratio = static_cast<double>(s128.queries) / static_cast<double>(p128.queries);
  const double secs = seconds_since(t0);
  const bool pass = r512.queries == 262144 && ratio > 3.0 && secs < 300.0;
  return {pass, fmt("PRIF 512x512 queries %llu (==262144); 128x128 sphere tracing %llu vs PRIF %llu queries, ratio %.2f "
                    "(>3); SDF held-out |err| %.4f; %.0fs (<300s)",
                    static_cast<unsigned long long>(r512.queries), static_cast<unsigned long long>(s128.queries),
                    static_cast<unsigned long long>(p128.queries), ratio, sdf_err, secs)};
}

Outcome c6() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto fx = make_fixture(geometry::normalize_mesh(geometry::make_step(0.5)).mesh);
  const auto tc = desk_train();
  model::ModelConfig mc;
  const auto trained = train_cached("step", {{"fixture", "step0.5"}, {"lr", tc.lr_start}, {"v", 1}}, [&] {
    return data::generate_ray_dataset(fx.mesh, fx.bvh, desk_rig(), EncodingMode::perp_foot);
  }, mc, tc);
  const auto& m = trained.model;

  constexpr int kBand = 5;
  constexpr int kInterior = 20;
  std::size_t band_n = 0, band_out = 0, int_n = 0, int_out = 0;
  for (const auto& cam : interleaved_rig()) {
    const int w = cam.width, h = cam.height;
    // Ground-truth label per pixel: -1 background, 0 lower plane, 1 upper plane.
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<geometry::Ray> rays;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        rays.push_back(geometry::camera_ray(cam, x, y));
        if (auto hit = geometry::cast_ray(fx.bvh, fx.mesh, rays.back())) label[y * w + x] = hit->triangle >= 2 ? 1 : 0;
      }
    }
    auto within = [&](int x, int y, int r, bool step_edge) {
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) {
            if (!step_edge) return true;
            continue;
          }
          const int l = label[yy * w + xx];
          if (step_edge ? (l >= 0 && l != label[y * w + x]) : l < 0) return true;
        }
      }
      return false;
    };
    const auto keep = model::outlier_filter(m, rays, model::kDefaultDelta);
    std::vector<rays::RayEncoding> enc;
    for (const auto& r : rays) enc.push_back(rays::encode_ray(r, m.mode()));
    const auto pred = model::prif_forward(m, enc);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int i = y * w + x;
        if (label[i] < 0 || pred.a[i] < 0.5f) continue;
        if (within(x, y, kBand, true)) {
          ++band_n;
          band_out += !keep[i];
        } else if (!within(x, y, kInterior, true) && !within(x, y, kBand, false)) {
          ++int_n;
          int_out += !keep[i];
        }
      }
    }
  }
  const double band_rate = band_n ? static_cast<double>(band_out) / band_n : 0.0;
  const double int_rate = int_n ? static_cast<double>(int_out) / int_n : 0.0;

  // Analytic (I - d d^T) mapping against finite differences of s in p. A
  // difference whose two evaluations see different ReLU patterns straddles a
  // kink and is not compared.
  auto eval_s = [&](const Vec3& p, const Vec3& d, std::vector<bool>& pattern) {
    const std::vector<rays::RayEncoding> enc{rays::encode_ray({p, d}, m.mode())};
    const std::vector<std::uint16_t> ids{0};
    const auto pass = model::forward_geometry(m, m.build_inputs(enc, ids), true);
    pattern.clear();
    const auto& layers = pass.trunk_tape.layers;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      const auto& z = layers[l].pre_activation;
      for (Eigen::Index k = 0; k < z.size(); ++k) pattern.push_back(z.data()[k] > 0.0f);
    }
    return static_cast<double>(pass.s[0]);
  };
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  double worst = 0.0;
  int checked = 0;
  int kinked = 0;
  std::vector<bool> pat_p, pat_m;
  while (checked < 50) {
    const Vec3 origin = Vec3(u(rng), u(rng), 2.5);
    const Vec3 d = (Vec3(u(rng), u(rng), 0.0) - origin).normalized();
    const geometry::Ray ray{origin, d};
    const auto grad = model::displacement_position_gradients(m, std::span(&ray, 1))[0];
    if (grad.norm() < 1e-3) continue;
    Vec3 num;
    const double eps = 1e-3;
    bool kink = false;
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = eps;
      const double sp = eval_s(origin + e, d, pat_p);
      const double sm = eval_s(origin - e, d, pat_m);
      kink = kink || pat_p != pat_m;
      num[k] = (sp - sm) / (2.0 * eps);
    }
    if (kink) {
      ++kinked;
      continue;
    }
    worst = std::max(worst, (grad - num).norm() / std::max(num.norm(), grad.norm()));
    ++checked;
  }
  const double secs = seconds_since(t0);
  const bool pass = band_rate > 0.0 && band_rate >= 5.0 * int_rate && worst <= 1e-2 && secs < 600.0;
  return {pass, fmt("edge-band discard %zu/%zu = %.4f, interior %zu/%zu = %.4f (band >= 5x interior); gradient mapping "
                    "vs finite differences worst rel %.2e (<=1e-2) over %d rays, %d skipped at ReLU kinks; %.0fs (<600s)",
                    band_out, band_n, band_rate, int_out, int_n, int_rate, worst, checked, kinked, secs)};
}

Outcome c7() {
  const auto t0 = std::chrono::steady_clock::now();
  const double radii[3] = {0.5, 0.7, 0.9};
  const auto tc = desk_train();
  model::ModelConfig mc;
  mc.latent_dim = 8;
  mc.shape_count = 3;
  const auto trained = train_cached("spheres", {{"fixture", "spheres"}, {"latent", 8}, {"lr", tc.lr_start}, {"v", 1}}, [&] {
    data::RayDataset ds;
    for (int k = 0; k < 3; ++k) {
      const auto mesh = geometry::make_icosphere(4, radii[k]);
      data::append_shape(ds, data::generate_ray_dataset(mesh, geometry::build_bvh(mesh), desk_rig(), EncodingMode::perp_foot));
    }
    return ds;
  }, mc, tc);
  const auto& m = trained.model;
  const auto hash_before = m.geometry_hash();
  const auto sphere = geometry::make_icosphere(4, 0.7);
  const auto held = geometry::fibonacci_camera_rig(kDeskCameras, 3.0, desk_fov(), 64, 64);
  const auto obs = data::generate_ray_dataset(sphere, geometry::build_bvh(sphere), held, EncodingMode::perp_foot);
  model::AutoDecodeConfig ac;
  ac.lr = 1e-2;
  std::vector<double> trace;
  const auto z = model::auto_decode(m, obs.records, Eigen::RowVectorXf::Zero(mc.latent_dim), ac, &trace);
  model::ExtractOptions eo;
  eo.latent = z;
  const auto pc = model::extract_points(m, desk_rig(), eo);
  std::size_t close = 0;
  double worst = 0.0;
  for (const auto& p : pc.points) {
    close += std::abs(p.norm() - 0.7) < 0.05;
    worst = std::max(worst, std::abs(p.norm() - 0.7));
  }
  const double frac = pc.points.empty() ? 0.0 : static_cast<double>(close) / pc.points.size();
  const bool unchanged = m.geometry_hash() == hash_before;
  const double secs = seconds_since(t0);
  const bool pass = !pc.points.empty() && worst < 0.05 && unchanged && secs < 900.0;
  return {pass, fmt("%zu points, %.4f within 0.05 of r=0.7, worst %.4f (<0.05); auto-decode loss %.4f -> %.4f; trunk "
                    "weights %s; %.0fs (<900s)",
                    pc.points.size(), frac, worst, trace.front(), trace.back(), unchanged ? "unchanged" : "CHANGED", secs)};
}

Outcome c8() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto fx = icosphere_fixture();
  const auto tc = desk_train();
  model::ModelConfig mc;
  const double levels[3] = {0.01, 0.05, 0.1};
  double cds[3];
  for (int k = 0; k < 3; ++k) {
    const auto trained = train_cached(fmt("noise%.2f", levels[k]), {{"fixture", "icosphere4"}, {"noise", levels[k]},
                                                                   {"lr", tc.lr_start}, {"v", 1}}, [&] {
      const auto clean = data::generate_ray_dataset(fx.mesh, fx.bvh, desk_rig(), EncodingMode::perp_foot);
      return data::corrupt(clean, data::Corruption::noise, levels[k], 8);
    }, mc, tc);
    cds[k] = chamfer_on_rig(trained.model, fx.mesh, interleaved_rig());
  }
  const double secs = seconds_since(t0);
  const bool pass = cds[0] <= cds[1] && cds[1] <= cds[2] && secs < 1800.0;
  return {pass, fmt("CD at noise 0.01/0.05/0.1 = %.2e / %.2e / %.2e (non-decreasing); %.0fs (<1800s)", cds[0], cds[1],
                    cds[2], secs)};
}

Outcome c9() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto trained = icosphere_model(EncodingMode::perp_foot);
  auto reference = desk_rig()[3];
  reference.width = reference.height = 64;
  const auto target = pose::render_mask(trained.model, reference);
  const auto hash_before = trained.model.geometry_hash();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  int ok = 0;
  double worst_rot = 0.0, worst_trans = 0.0;
  std::ostringstream per_trial;
  for (int trial = 0; trial < 10; ++trial) {
    pose::PoseParams init;
    init.rotation = Vec3(g(rng), g(rng), g(rng)).normalized() * geometry::degrees_to_radians(10.0);
    init.translation = Vec3(g(rng), g(rng), g(rng)).normalized() * 0.1;
    const auto res = pose::optimize_pose(trained.model, target, reference, init);
    const double rot = pose::rotation_error_degrees(res.pose.rotation, Vec3::Zero());
    const double trans = res.pose.translation.norm();
    ok += rot < 1.0 && trans < 0.01;
    worst_rot = std::max(worst_rot, rot);
    worst_trans = std::max(worst_trans, trans);
    per_trial << fmt(" %.2f/%.3f", rot, trans);
  }
  const bool frozen = trained.model.geometry_hash() == hash_before;
  const double secs = seconds_since(t0);
  const bool pass = ok >= 8 && frozen && secs < 600.0;
  return {pass, fmt("%d/10 trials < 1 deg and < 0.01 (>=8); deg/trans per trial:%s; weights %s; %.0fs (<600s)", ok,
                    per_trial.str().c_str(), frozen ? "unchanged" : "CHANGED", secs)};
}

// Trained on 50 views: with the 10-view desk rig the perp_foot model also
// degrades off the training rig because the views are sparse, which hides the
// encoding effect. The 10-view ratios are reported but not asserted.
constexpr int kAblationCameras = 50;

Outcome c10() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto fx = icosphere_fixture();
  const EncodingMode modes[2] = {EncodingMode::raw, EncodingMode::perp_foot};
  // Held-out rig: the training view directions seen from 20% farther away.
  auto ratios = [&](int cameras, double* train_cd, double* held_cd, double* ratio) {
    const auto train_rig = desk_rig(kDeskRes, geometry::kDefaultRigRadius, cameras);
    const auto held = desk_rig(kDeskRes, 3.0, cameras);
    for (int k = 0; k < 2; ++k) {
      const auto trained = icosphere_model(modes[k], cameras);
      train_cd[k] = chamfer_on_rig(trained.model, fx.mesh, train_rig);
      held_cd[k] = chamfer_on_rig(trained.model, fx.mesh, held);
      ratio[k] = held_cd[k] / train_cd[k];
    }
  };
  double train_cd[2], held_cd[2], ratio[2];
  ratios(kAblationCameras, train_cd, held_cd, ratio);
  double desk_train_cd[2], desk_held_cd[2], desk_ratio[2];
  ratios(kDeskCameras, desk_train_cd, desk_held_cd, desk_ratio);
  const double secs = seconds_since(t0);
  const bool pass = ratio[0] >= 5.0 && ratio[1] < 2.0 && secs < 1200.0;
  return {pass, fmt("%d views: raw held-out/train CD %.2e/%.2e = %.1fx (>=5x), perp_foot %.2e/%.2e = %.2fx (<2x); "
                    "%d views (not asserted): raw %.1fx, perp_foot %.2fx; %.0fs (<1200s)",
                    kAblationCameras, held_cd[0], train_cd[0], ratio[0], held_cd[1], train_cd[1], ratio[1], kDeskCameras,
                    desk_ratio[0], desk_ratio[1], secs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PRIF acceptance suite"};
  int only = 0;
  int threads = 0;
  app.add_option("--only", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  app.add_option("--cache", g_cache, "Directory for cached trained checkpoints");
  app.add_option("--threads", threads, "Worker threads");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_thread_count(threads);

  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"ray algebra", c1},          {"geometry oracle", c2},     {"autodiff", c3},
      {"desk single-shape", c4},    {"query efficiency", c5},    {"outlier filter", c6},
      {"auto-decoding", c7},        {"denoising sweep", c8},     {"pose recovery", c9},
      {"encoding ablation", c10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i + 1) != only) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s C%zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
