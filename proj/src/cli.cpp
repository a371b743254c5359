#include "prif/cli.hpp"

#include "prif/evaluation.hpp"
#include "prif/model.hpp"
#include "prif/pose.hpp"
#include "prif/sdf.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>

namespace prif::cli {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON config files. Top-level keys are global options; a nested object named
// after a subcommand holds that subcommand's options.

bool skipped_in_config(const CLI::Option* opt) {
  const auto name = opt->get_single_name();
  return name.empty() || name == "help" || name == "config" || name == "dry-run";
}

json scalar(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  try {
    auto v = json::parse(s);
    if (v.is_number()) return v;
  } catch (const json::exception&) {
  }
  return s;
}

class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return to_json(app, default_also).dump();
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static json to_json(const CLI::App* app, bool default_also) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (skipped_in_config(opt) || !opt->get_configurable()) continue;
      const auto name = opt->get_single_name();
      if (opt->get_expected_max() == 0) {
        if (opt->count() > 0 || default_also) j[name] = opt->count() > 0 && opt->as<bool>();
        continue;
      }
      std::vector<std::string> values = opt->results();
      if (values.empty() && default_also && !opt->get_default_str().empty()) {
        values = CLI::detail::split_up(opt->get_default_str());
        if (values.size() == 1 && opt->get_expected_max() > 1) values = CLI::detail::split(values[0], ',');
      }
      if (values.empty()) continue;
      if (opt->get_expected_max() > 1) {
        json arr = json::array();
        for (const auto& v : values) arr.push_back(scalar(v));
        j[name] = arr;
      } else {
        j[name] = scalar(values.back());
      }
    }
    for (const CLI::App* sub : app->get_subcommands()) j[sub->get_name()] = to_json(sub, default_also);
    return j;
  }

  static void collect(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        collect(value, next, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(text(v));
      } else {
        item.inputs.push_back(text(value));
      }
      out.push_back(std::move(item));
    }
  }
};

// ---------------------------------------------------------------------------
// Output

void emit(const json& j) { std::cout << j.dump() << '\n' << std::flush; }

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Options shared by several subcommands

struct Preset {
  int depth;
  int width;
  int cameras;
  int res;
  int epochs;
  double lr;
};

constexpr Preset kDesk{6, 128, 10, 100, 30, 5e-4};
constexpr Preset kPaper{10, 512, 50, 200, 100, 1e-4};

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  bool deterministic = false;
  bool dry_run = false;
  std::string preset = "desk";
};

struct RigOptions {
  int cameras = 0;
  int res = 0;
  double radius = geometry::kDefaultRigRadius;
  double fov = geometry::kDefaultFovDegrees;
};

struct NetOptions {
  int depth = 0;
  int width = 0;
  int epochs = 0;
  double lr = 0.0;
  double lr_end = 1e-7;
  int batch = 1024;
};

// Options whose default comes from the preset are registered without one and
// filled in after parsing unless the user or a config file set them.
class Bindings {
 public:
  template <typename T>
  void add(CLI::Option* opt, T& target, T Preset::*field) {
    bindings_.push_back({opt, [opt, &target, field](const Preset& p) {
                           target = p.*field;
                           std::ostringstream s;
                           s << p.*field;
                           opt->default_str(s.str());
                         }});
  }
  void resolve(const CLI::App* sub, const Preset& p) const {
    const auto owned = sub->get_options();
    for (const auto& [opt, apply] : bindings_) {
      if (std::find(owned.begin(), owned.end(), opt) != owned.end() && opt->count() == 0) apply(p);
    }
  }

 private:
  std::vector<std::pair<CLI::Option*, std::function<void(const Preset&)>>> bindings_;
};

void add_rig(CLI::App* sub, RigOptions& rig, Bindings& bind) {
  bind.add(sub->add_option("--cameras", rig.cameras, "Cameras on the rig (preset)")->check(CLI::PositiveNumber),
           rig.cameras, &Preset::cameras);
  bind.add(sub->add_option("--res", rig.res, "Square image resolution in pixels (preset)")->check(CLI::PositiveNumber),
           rig.res, &Preset::res);
  sub->add_option("--radius", rig.radius, "Rig radius")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--fov", rig.fov, "Vertical field of view in degrees")->capture_default_str()->check(CLI::Range(1.0, 179.0));
}

void add_net(CLI::App* sub, NetOptions& net, Bindings& bind) {
  bind.add(sub->add_option("--depth", net.depth, "Layers (preset)")->check(CLI::Range(2, 64)), net.depth, &Preset::depth);
  bind.add(sub->add_option("--width", net.width, "Hidden width (preset)")->check(CLI::PositiveNumber), net.width, &Preset::width);
  bind.add(sub->add_option("--epochs", net.epochs, "Training epochs (preset)")->check(CLI::NonNegativeNumber),
           net.epochs, &Preset::epochs);
  bind.add(sub->add_option("--lr", net.lr, "Initial learning rate (preset)")->check(CLI::PositiveNumber), net.lr, &Preset::lr);
  sub->add_option("--lr-end", net.lr_end, "Final learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--batch", net.batch, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
}

std::vector<geometry::Camera> make_rig(const RigOptions& r) {
  return geometry::fibonacci_camera_rig(r.cameras, r.radius, geometry::degrees_to_radians(r.fov), r.res, r.res);
}

geometry::TriangleMesh read_mesh(const std::string& path, bool normalize) {
  auto mesh = geometry::load_mesh(path);
  return normalize ? geometry::normalize_mesh(mesh).mesh : mesh;
}

model::TrainConfig train_config(const NetOptions& n, std::uint64_t seed) {
  model::TrainConfig tc;
  tc.epochs = n.epochs;
  tc.batch_size = n.batch;
  tc.lr_start = n.lr;
  tc.lr_end = n.lr_end;
  tc.seed = seed;
  return tc;
}

void emit_epoch(const model::EpochLoss& e) {
  emit({{"event", "epoch"},
        {"epoch", e.epoch},
        {"loss", e.total},
        {"displacement", e.displacement},
        {"mask", e.mask},
        {"lr", e.lr}});
}

std::vector<Vec3> parse_vec3(const std::vector<double>& v) {
  std::vector<Vec3> out;
  if (v.size() == 3) out.emplace_back(v[0], v[1], v[2]);
  return out;
}

}  // namespace

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Primary ray-based implicit functions: data generation, training, rendering and evaluation", "prif"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "Read options from a JSON file");
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = one)")->capture_default_str()->envname("PRIF_THREADS")->check(CLI::NonNegativeNumber);
  app.add_flag("--deterministic", g.deterministic, "Run on a single worker");
  app.add_flag("--dry-run", g.dry_run, "Print the resolved configuration and exit");
  app.add_option("--preset", g.preset, "Size preset")->capture_default_str()->check(CLI::IsMember({"desk", "paper"}));

  Bindings bind;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Cast a camera rig against meshes and write a ray dataset");
  std::vector<std::string> gen_meshes;
  std::string gen_out, gen_mode = "perp_foot";
  bool gen_raw_scale = false;
  RigOptions gen_rig;
  gen->add_option("--mesh", gen_meshes, "Mesh file (OBJ or PLY); repeat for a multi-shape dataset")->required();
  gen->add_option("--out", gen_out, "Output dataset")->required();
  gen->add_option("--mode", gen_mode, "Ray encoding")->capture_default_str()->check(CLI::IsMember({"perp_foot", "plucker", "raw"}));
  gen->add_flag("--no-normalize", gen_raw_scale, "Keep the mesh's own scale and position");
  add_rig(gen, gen_rig, bind);

  // train
  auto* tr = app.add_subcommand("train", "Train a PRIF network on a ray dataset");
  std::string tr_data, tr_out;
  NetOptions tr_net;
  int tr_latent = -1;
  bool tr_separate = false, tr_color = false;
  tr->add_option("--data", tr_data, "Ray dataset")->required();
  tr->add_option("--out", tr_out, "Output checkpoint")->required();
  tr->add_option("--latent-dim", tr_latent, "Latent code size (default 0 for one shape, 128 otherwise)");
  tr->add_flag("--separate-mask", tr_separate, "Give the mask its own network");
  tr->add_flag("--color", tr_color, "Train the color head after geometry");
  add_net(tr, tr_net, bind);

  // train-sdf
  auto* ts = app.add_subcommand("train-sdf", "Train the signed distance baseline on a watertight mesh");
  std::string ts_mesh, ts_out;
  std::size_t ts_samples = 100000;
  NetOptions ts_net;
  ts->add_option("--mesh", ts_mesh, "Watertight mesh")->required();
  ts->add_option("--out", ts_out, "Output checkpoint")->required();
  ts->add_option("--samples", ts_samples, "Training samples")->capture_default_str()->check(CLI::PositiveNumber);
  add_net(ts, ts_net, bind);

  // render
  auto* rd = app.add_subcommand("render", "Render depth, mask or color images from one rig camera");
  std::string rd_ckpt, rd_depth, rd_mask, rd_color, rd_mesh;
  int rd_view = 0;
  double rd_tmax = 5.0;
  RigOptions rd_rig;
  rd->add_option("--ckpt", rd_ckpt, "PRIF checkpoint");
  rd->add_option("--mesh", rd_mesh, "Render the mesh silhouette instead of a network");
  rd->add_option("--view", rd_view, "Camera index on the rig")->capture_default_str()->check(CLI::NonNegativeNumber);
  rd->add_option("--depth-out", rd_depth, "Depth image (PGM)");
  rd->add_option("--mask-out", rd_mask, "Mask image (PGM)");
  rd->add_option("--color-out", rd_color, "Color image (PPM)");
  rd->add_option("--t-max", rd_tmax, "Depth mapped to white")->capture_default_str()->check(CLI::PositiveNumber);
  add_rig(rd, rd_rig, bind);

  // extract
  auto* ex = app.add_subcommand("extract", "Extract a surface point cloud from a trained network");
  std::string ex_ckpt, ex_out, ex_latent;
  double ex_delta = model::kDefaultDelta;
  int ex_shape = 0;
  bool ex_no_filter = false;
  RigOptions ex_rig;
  ex->add_option("--ckpt", ex_ckpt, "PRIF checkpoint")->required();
  ex->add_option("--out", ex_out, "Output point cloud (PLY)")->required();
  ex->add_option("--delta", ex_delta, "Outlier threshold on the gradient norm")->capture_default_str();
  ex->add_option("--shape", ex_shape, "Shape id")->capture_default_str()->check(CLI::NonNegativeNumber);
  ex->add_option("--latent", ex_latent, "Latent code file written by auto-decode");
  ex->add_flag("--no-filter", ex_no_filter, "Keep gradient outliers");
  add_rig(ex, ex_rig, bind);

  // eval-cd
  auto* ev = app.add_subcommand("eval-cd", "Chamfer distance between a point cloud and a mesh");
  std::string ev_cloud, ev_mesh;
  std::size_t ev_points = eval::kDefaultEvalPoints;
  bool ev_raw_scale = false;
  ev->add_option("--cloud", ev_cloud, "Point cloud (PLY)")->required();
  ev->add_option("--mesh", ev_mesh, "Reference mesh")->required();
  ev->add_option("--points", ev_points, "Points per side")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_flag("--no-normalize", ev_raw_scale, "Keep the mesh's own scale and position");

  // bench
  auto* bn = app.add_subcommand("bench", "Count network queries for rendering one image");
  std::string bn_ckpt, bn_method = "prif";
  int bn_res = 512, bn_steps = sdf::kDefaultMaxSteps;
  double bn_radius = geometry::kDefaultRigRadius, bn_fov = geometry::kDefaultFovDegrees;
  bn->add_option("--ckpt", bn_ckpt, "PRIF or SDF checkpoint")->required();
  bn->add_option("--method", bn_method, "Renderer")->capture_default_str()->check(CLI::IsMember({"prif", "sphere_trace"}));
  bn->add_option("--res", bn_res, "Square image resolution")->capture_default_str()->check(CLI::PositiveNumber);
  bn->add_option("--max-steps", bn_steps, "Sphere tracing step limit")->capture_default_str()->check(CLI::PositiveNumber);
  bn->add_option("--radius", bn_radius, "Camera distance")->capture_default_str()->check(CLI::PositiveNumber);
  bn->add_option("--fov", bn_fov, "Vertical field of view in degrees")->capture_default_str()->check(CLI::Range(1.0, 179.0));

  // pose
  auto* ps = app.add_subcommand("pose", "Recover a camera pose from a target silhouette");
  std::string ps_ckpt, ps_target;
  int ps_view = 0;
  std::vector<double> ps_rot{0.0, 0.0, 0.0}, ps_trans{0.0, 0.0, 0.0};
  pose::PoseOptConfig ps_cfg;
  RigOptions ps_rig;
  ps->add_option("--ckpt", ps_ckpt, "PRIF checkpoint")->required();
  ps->add_option("--target", ps_target, "Target mask (binary PGM)")->required();
  ps->add_option("--view", ps_view, "Reference camera index on the rig")->capture_default_str()->check(CLI::NonNegativeNumber);
  ps->add_option("--init-rot", ps_rot, "Initial rotation offset, axis-angle in degrees")->expected(3)->delimiter(',')->capture_default_str();
  ps->add_option("--init-trans", ps_trans, "Initial translation offset")->expected(3)->delimiter(',')->capture_default_str();
  ps->add_option("--steps", ps_cfg.steps, "Optimizer steps")->capture_default_str()->check(CLI::NonNegativeNumber);
  ps->add_option("--lr", ps_cfg.lr, "Initial step size")->capture_default_str()->check(CLI::PositiveNumber);
  ps->add_option("--lr-end", ps_cfg.lr_end, "Final step size")->capture_default_str()->check(CLI::PositiveNumber);
  add_rig(ps, ps_rig, bind);

  // auto-decode
  auto* ad = app.add_subcommand("auto-decode", "Fit a latent code to observations of an unseen shape");
  std::string ad_ckpt, ad_obs, ad_out;
  model::AutoDecodeConfig ad_cfg;
  ad->add_option("--ckpt", ad_ckpt, "Multi-shape PRIF checkpoint")->required();
  ad->add_option("--observations", ad_obs, "Ray dataset of the unseen shape")->required();
  ad->add_option("--out", ad_out, "Output latent code (JSON)")->required();
  ad->add_option("--steps", ad_cfg.steps, "Optimizer steps")->capture_default_str()->check(CLI::NonNegativeNumber);
  ad->add_option("--lr", ad_cfg.lr, "Step size")->capture_default_str()->check(CLI::PositiveNumber);
  ad->add_option("--batch", ad_cfg.batch_size, "Rays per step")->capture_default_str()->check(CLI::PositiveNumber);

  // corrupt
  auto* co = app.add_subcommand("corrupt", "Add noise to or subsample a ray dataset");
  std::string co_data, co_out, co_kind = "noise";
  double co_level = 0.0;
  co->add_option("--data", co_data, "Input dataset")->required();
  co->add_option("--out", co_out, "Output dataset")->required();
  co->add_option("--kind", co_kind, "Corruption")->capture_default_str()->check(CLI::IsMember({"noise", "partial"}));
  co->add_option("--level", co_level, "Noise standard deviation, or kept fraction")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, std::cerr);
    if (code == 0) return kExitOk;
    std::cerr << app.help() << std::flush;
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  bind.resolve(sub, g.preset == "paper" ? kPaper : kDesk);

  if (g.dry_run) {
    std::cout << app.config_to_str(true, false) << '\n' << std::flush;
    return kExitOk;
  }
  if (g.deterministic) {
    set_thread_count(1);
  } else if (g.threads > 0) {
    set_thread_count(g.threads);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const json run_config = json::parse(app.config_to_str(true, false));

  try {
    const std::string name = sub->get_name();
    if (name == "gen-data") {
      const auto rig = make_rig(gen_rig);
      const auto mode = rays::parse_encoding_mode(gen_mode);
      data::RayDataset ds;
      ds.mode = mode;
      for (std::size_t i = 0; i < gen_meshes.size(); ++i) {
        const auto mesh = read_mesh(gen_meshes[i], !gen_raw_scale);
        const auto bvh = geometry::build_bvh(mesh);
        const auto part = data::generate_ray_dataset(mesh, bvh, rig, mode, static_cast<std::uint16_t>(i));
        if (i == 0) {
          ds = part;
        } else {
          data::append_shape(ds, part);
        }
      }
      ds.metadata["run"] = run_config;
      data::save_dataset(gen_out, ds);
      emit({{"event", "dataset"},
            {"records", ds.size()},
            {"foreground", ds.foreground_count()},
            {"shapes", ds.shape_count()},
            {"path", gen_out},
            {"seconds", seconds_since(t0)}});
    } else if (name == "train") {
      const auto ds = data::load_dataset(tr_data);
      model::ModelConfig mc;
      mc.mode = ds.mode;
      mc.depth = tr_net.depth;
      mc.width = tr_net.width;
      mc.shape_count = std::max(1, ds.shape_count());
      mc.latent_dim = tr_latent >= 0 ? tr_latent : (mc.shape_count > 1 ? model::kDefaultLatentDim : 0);
      mc.separate_mask = tr_separate;
      mc.seed = g.seed;
      auto m = model::PrifModel::create(mc);
      const auto tc = train_config(tr_net, g.seed);
      const auto trace = model::train(m, ds, tc, emit_epoch);
      if (tr_color) {
        if (!ds.has_colors()) fail(ErrorKind::invalid_argument, "--color needs a dataset with colors");
        m.add_color_head(g.seed + 1);
        model::train_color(m, ds, tc, [](const model::EpochLoss& e) {
          emit({{"event", "color_epoch"}, {"epoch", e.epoch}, {"loss", e.total}, {"lr", e.lr}});
        });
      }
      model::save_model(tr_out, m, {{"run", run_config}});
      emit({{"event", "trained"},
            {"path", tr_out},
            {"final_loss", trace.empty() ? 0.0 : trace.back().total},
            {"seconds", seconds_since(t0)}});
    } else if (name == "train-sdf") {
      const auto mesh = geometry::load_mesh(ts_mesh);
      const auto bvh = geometry::build_bvh(mesh);
      const auto samples = sdf::sample_sdf_training_set(mesh, bvh, ts_samples, g.seed);
      auto net = sdf::SdfNetwork::create(sdf::sdf_spec(ts_net.depth, ts_net.width), g.seed);
      const auto trace = sdf::train_sdf(net, samples, train_config(ts_net, g.seed), emit_epoch);
      sdf::save_sdf_network(ts_out, net, {{"run", run_config}});
      emit({{"event", "trained"},
            {"path", ts_out},
            {"final_loss", trace.empty() ? 0.0 : trace.back().total},
            {"seconds", seconds_since(t0)}});
    } else if (name == "render") {
      if (rd_ckpt.empty() == rd_mesh.empty()) fail(ErrorKind::invalid_argument, "give exactly one of --ckpt and --mesh");
      const auto rig = make_rig(rd_rig);
      if (rd_view >= static_cast<int>(rig.size())) fail(ErrorKind::out_of_range, "--view beyond the rig");
      const auto& cam = rig[static_cast<std::size_t>(rd_view)];
      json out = {{"event", "rendered"}, {"view", rd_view}, {"width", cam.width}, {"height", cam.height}};
      if (!rd_mesh.empty()) {
        const auto mesh = read_mesh(rd_mesh, true);
        const auto bvh = geometry::build_bvh(mesh);
        const auto mask = pose::mesh_silhouette(mesh, bvh, cam);
        if (!rd_mask.empty()) eval::write_mask_pgm(rd_mask, mask);
      } else {
        const auto m = model::load_model(rd_ckpt);
        const auto report = eval::benchmark_render(m, cam);
        out["queries"] = report.queries;
        out["hits"] = report.hits;
        if (!rd_depth.empty()) eval::write_depth_pgm(rd_depth, report.depth, rd_tmax);
        if (!rd_mask.empty()) eval::write_mask_pgm(rd_mask, pose::render_mask(m, cam));
        if (!rd_color.empty()) {
          if (!m.color_net()) fail(ErrorKind::missing_head, "checkpoint has no color head");
          const auto rays = model::rig_rays(std::span(&cam, 1));
          std::vector<rays::RayEncoding> enc;
          enc.reserve(rays.size());
          for (const auto& r : rays) enc.push_back(rays::encode_ray(r, m.mode()));
          const auto rgb = model::color_forward(m, enc);
          std::vector<Vec3> px(rays.size(), Vec3::Zero());
          const auto pred = model::prif_forward(m, enc);
          for (std::size_t i = 0; i < rays.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            if (pred.a[k] > model::kDefaultMaskThreshold) px[i] = rgb.row(k).cast<double>().transpose();
          }
          eval::write_ppm(rd_color, cam.width, cam.height, px);
        }
      }
      out["seconds"] = seconds_since(t0);
      emit(out);
    } else if (name == "extract") {
      const auto m = model::load_model(ex_ckpt);
      model::ExtractOptions opt;
      opt.delta = ex_delta;
      opt.shape_id = static_cast<std::uint16_t>(ex_shape);
      opt.filter_outliers = !ex_no_filter;
      if (!ex_latent.empty()) {
        std::ifstream in(ex_latent);
        if (!in) fail(ErrorKind::io, "cannot open " + ex_latent);
        const auto j = json::parse(in);
        const auto code = j.at("latent").get<std::vector<float>>();
        opt.latent = Eigen::Map<const Eigen::RowVectorXf>(code.data(), static_cast<Eigen::Index>(code.size()));
      }
      const auto pc = model::extract_points(m, make_rig(ex_rig), opt);
      geometry::write_point_cloud_ply(ex_out, pc.points, pc.colors);
      emit({{"event", "extracted"},
            {"path", ex_out},
            {"points", pc.points.size()},
            {"rays", pc.rays},
            {"masked_out", pc.masked_out},
            {"outliers", pc.outliers},
            {"seconds", seconds_since(t0)}});
    } else if (name == "eval-cd") {
      const auto cloud = geometry::read_point_cloud_ply(ev_cloud);
      const auto mesh = read_mesh(ev_mesh, !ev_raw_scale);
      const auto r = eval::evaluation_protocol(cloud, mesh, ev_points, g.seed);
      emit({{"event", "chamfer"},
            {"mean", r.mean},
            {"median", r.median},
            {"cloud_to_mesh", r.a_to_b},
            {"mesh_to_cloud", r.b_to_a},
            {"points", r.count_a}});
    } else if (name == "bench") {
      geometry::Camera cam = geometry::fibonacci_camera_rig(1, bn_radius, geometry::degrees_to_radians(bn_fov), bn_res,
                                                            bn_res)[0];
      eval::BenchReport r;
      if (eval::parse_bench_method(bn_method) == eval::BenchMethod::prif) {
        r = eval::benchmark_render(model::load_model(bn_ckpt), cam);
      } else {
        r = eval::benchmark_render(sdf::load_sdf_network(bn_ckpt), cam, bn_steps);
      }
      emit({{"event", "bench"},
            {"method", bn_method},
            {"res", bn_res},
            {"queries", r.queries},
            {"rays", r.rays},
            {"hits", r.hits},
            {"seconds", r.wall_seconds}});
    } else if (name == "pose") {
      const auto m = model::load_model(ps_ckpt);
      const auto target = eval::read_pgm_mask(ps_target);
      auto rig = make_rig(ps_rig);
      if (ps_view >= static_cast<int>(rig.size())) fail(ErrorKind::out_of_range, "--view beyond the rig");
      auto reference = rig[static_cast<std::size_t>(ps_view)];
      reference.width = target.width;
      reference.height = target.height;
      pose::PoseParams init;
      init.rotation = parse_vec3(ps_rot).front() * (std::numbers::pi / 180.0);
      init.translation = parse_vec3(ps_trans).front();
      const auto res = pose::optimize_pose(m, target, reference, init, ps_cfg);
      for (std::size_t i = 0; i < res.loss_trace.size(); ++i) {
        emit({{"event", "step"}, {"step", i}, {"loss", res.loss_trace[i]}});
      }
      emit({{"event", "pose"},
            {"rotation_deg", vec_json(res.pose.rotation * (180.0 / std::numbers::pi))},
            {"rotation_error_deg", pose::rotation_error_degrees(res.pose.rotation, Vec3::Zero())},
            {"translation", vec_json(res.pose.translation)},
            {"seconds", seconds_since(t0)}});
    } else if (name == "auto-decode") {
      const auto m = model::load_model(ad_ckpt);
      if (m.latent_dim() == 0) fail(ErrorKind::invalid_argument, "checkpoint has no latent codes");
      const auto obs = data::load_dataset(ad_obs);
      ad_cfg.seed = g.seed;
      std::vector<double> trace;
      const auto z = model::auto_decode(m, obs.records, Eigen::RowVectorXf::Zero(m.latent_dim()), ad_cfg, &trace);
      for (std::size_t i = 0; i < trace.size(); ++i) emit({{"event", "step"}, {"step", i}, {"loss", trace[i]}});
      std::ofstream out(ad_out);
      if (!out) fail(ErrorKind::io, "cannot write " + ad_out);
      out << json{{"latent", std::vector<float>(z.data(), z.data() + z.size())}}.dump() << '\n';
      emit({{"event", "decoded"},
            {"path", ad_out},
            {"final_loss", trace.empty() ? 0.0 : trace.back()},
            {"seconds", seconds_since(t0)}});
    } else if (name == "corrupt") {
      const auto ds = data::load_dataset(co_data);
      const auto kind = co_kind == "noise" ? data::Corruption::noise : data::Corruption::partial;
      auto out = data::corrupt(ds, kind, co_level, g.seed);
      out.metadata["run"] = run_config;
      data::save_dataset(co_out, out);
      emit({{"event", "dataset"}, {"records", out.size()}, {"foreground", out.foreground_count()}, {"path", co_out}});
    }
  } catch (const PrifError& e) {
    emit({{"event", "error"}, {"kind", to_string(e.kind())}, {"message", e.what()}});
    std::cerr << "prif: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    emit({{"event", "error"}, {"kind", "internal"}, {"message", e.what()}});
    std::cerr << "prif: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace prif::cli
