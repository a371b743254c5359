#include "prif/sdf.hpp"

#include "prif/container.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <random>

namespace prif::sdf {

bool is_watertight(const geometry::TriangleMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) ++edges[std::minmax(t[k], t[(k + 1) % 3])];
  }
  return !edges.empty() && std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second == 2; });
}

namespace {

constexpr double kGrazeTolerance = 1e-7;

bool grazes(const geometry::Hit& h) {
  return h.u < kGrazeTolerance || h.v < kGrazeTolerance || h.u + h.v > 1.0 - kGrazeTolerance;
}

}  // namespace

double sdf_ground_truth(const geometry::TriangleMesh& mesh, const geometry::Bvh& bvh, const Vec3& p) {
  const double dist = std::sqrt(geometry::closest_point(bvh, mesh, p).squared_distance);
  Vec3 dir = Vec3(0.5377, 0.2133, 0.8153).normalized();
  std::mt19937_64 rng(fnv1a(p.data(), sizeof(double) * 3));
  std::normal_distribution<double> gauss;
  std::size_t crossings = 0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const auto hits = geometry::all_hits(bvh, mesh, {p, dir});
    crossings = hits.size();
    if (std::none_of(hits.begin(), hits.end(), grazes)) break;
    dir = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
  }
  return crossings % 2 == 1 ? -dist : dist;
}

std::vector<SdfSample> sample_sdf_training_set(const geometry::TriangleMesh& mesh, const geometry::Bvh& bvh,
                                               std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(ErrorKind::invalid_argument, "sample count must be >= 1");
  const auto wide = static_cast<std::size_t>(std::llround(0.4 * static_cast<double>(n)));
  const auto narrow = std::min(n - wide, static_cast<std::size_t>(std::llround(0.4 * static_cast<double>(n))));
  const auto surface = geometry::sample_surface_points(mesh, wide + narrow, seed);
  std::mt19937_64 rng(seed ^ 0x5df5a3b1c2d4e6f7ULL);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<SdfSample> out(n);
  for (std::size_t i = 0; i < wide + narrow; ++i) {
    const double sigma = i < wide ? kSurfaceSigmaWide : kSurfaceSigmaNarrow;
    const Vec3 q = surface[i] + sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
    out[i].point = q.cast<float>();
  }
  for (std::size_t i = wide + narrow; i < n; ++i) {
    Vec3 q;
    do {
      q = Vec3(unit(rng), unit(rng), unit(rng));
    } while (q.squaredNorm() > 1.0);
    out[i].point = (kUniformRadius * q).cast<float>();
  }
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i].sdf = static_cast<float>(sdf_ground_truth(mesh, bvh, out[i].point.cast<double>()));
    }
  });
  return out;
}

void save_sdf_samples(const std::string& path, std::span<const SdfSample> samples) {
  std::vector<float> flat;
  flat.reserve(samples.size() * 4);
  for (const auto& s : samples) {
    flat.insert(flat.end(), {s.point.x(), s.point.y(), s.point.z(), s.sdf});
  }
  nlohmann::json header = {{"count", samples.size()}, {"record_bytes", 16}};
  const std::span<const std::byte> chunk = std::as_bytes(std::span<const float>(flat));
  io::write_container(path, "PRIFSDFS", header, std::span<const std::span<const std::byte>>(&chunk, 1));
}

std::vector<SdfSample> load_sdf_samples(const std::string& path) {
  const auto c = io::read_container(path, "PRIFSDFS");
  const auto flat = c.floats();
  std::size_t count = 0;
  try {
    count = c.header.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, "sample header in '" + path + "': " + e.what());
  }
  if (flat.size() != count * 4) fail(ErrorKind::format, "'" + path + "': payload does not hold " + std::to_string(count) + " samples");
  std::vector<SdfSample> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].point = Eigen::Vector3f(flat[4 * i], flat[4 * i + 1], flat[4 * i + 2]);
    out[i].sdf = flat[4 * i + 3];
  }
  return out;
}

SphereTraceResult sphere_trace(const std::function<double(const Vec3&)>& sdf, const geometry::Ray& ray, int max_steps,
                               double eps, double t_max) {
  const Vec3 d = rays::checked_unit(ray.direction);
  SphereTraceResult r;
  while (r.steps < max_steps) {
    const Vec3 q = ray.origin + r.t * d;
    const double v = sdf(q);
    ++r.steps;
    if (v < eps) {
      r.converged = true;
      r.hit = q;
      break;
    }
    r.t += v;
    if (r.t > t_max) break;
  }
  return r;
}

nn::MlpSpec sdf_spec(int depth, int width) {
  nn::MlpSpec spec;
  spec.input_dim = 3;
  spec.output_dim = 1;
  spec.depth = depth;
  spec.width = width;
  return spec;
}

SdfNetwork SdfNetwork::create(const nn::MlpSpec& spec, std::uint64_t seed) {
  return SdfNetwork(nn::Mlp::create(spec, seed));
}

SdfNetwork::SdfNetwork(nn::Mlp mlp) : mlp_(std::move(mlp)) {
  if (mlp_.spec().input_dim != 3 || mlp_.spec().output_dim != 1) {
    fail(ErrorKind::invalid_spec, "an SDF network maps 3 inputs to 1 output");
  }
}

Eigen::VectorXf SdfNetwork::evaluate(std::span<const Vec3> points) const {
  nn::Matrix x(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = points[i].cast<float>().transpose();
  queries_.add(points.size());
  return mlp_.forward(x).col(0);
}

std::vector<SphereTraceResult> sphere_trace_batch(const SdfNetwork& net, std::span<const geometry::Ray> rays,
                                                  int max_steps, double eps, double t_max) {
  std::vector<SphereTraceResult> out(rays.size());
  std::vector<Vec3> dirs;
  dirs.reserve(rays.size());
  for (const auto& r : rays) dirs.push_back(rays::checked_unit(r.direction));
  std::vector<std::size_t> active(rays.size());
  std::iota(active.begin(), active.end(), std::size_t{0});
  std::vector<Vec3> points;
  while (!active.empty()) {
    points.clear();
    for (auto i : active) points.push_back(rays[i].origin + out[i].t * dirs[i]);
    const Eigen::VectorXf v = net.evaluate(points);
    std::vector<std::size_t> next;
    for (std::size_t k = 0; k < active.size(); ++k) {
      auto& r = out[active[k]];
      ++r.steps;
      if (v[static_cast<Eigen::Index>(k)] < eps) {
        r.converged = true;
        r.hit = points[k];
        continue;
      }
      r.t += v[static_cast<Eigen::Index>(k)];
      if (r.t > t_max || r.steps >= max_steps) continue;
      next.push_back(active[k]);
    }
    active = std::move(next);
  }
  return out;
}

std::vector<model::EpochLoss> train_sdf(SdfNetwork& net, std::span<const SdfSample> samples,
                                        const model::TrainConfig& config, const model::ProgressFn& progress) {
  if (samples.empty()) fail(ErrorKind::invalid_argument, "no SDF samples");
  if (config.epochs < 0 || config.batch_size < 1) fail(ErrorKind::invalid_argument, "invalid training configuration");
  std::vector<model::EpochLoss> trace;
  if (config.epochs == 0) return trace;
  const std::size_t n = samples.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const auto total_steps = static_cast<std::int64_t>((n + batch - 1) / batch) * config.epochs;
  auto& mlp = net.mlp();
  auto params = mlp.parameters();
  auto adam = nn::adam_init(params);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    double lr = config.lr_start;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const auto m = static_cast<Eigen::Index>(end - start);
      nn::Matrix x(m, 3);
      Eigen::VectorXf y(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto& s = samples[order[start + static_cast<std::size_t>(i)]];
        x.row(i) = s.point.transpose();
        y[i] = s.sdf;
      }
      nn::Tape tape;
      const nn::Matrix pred = mlp.forward(x, &tape);
      const Eigen::ArrayXf diff = pred.col(0).array() - y.array();
      const double l1 = diff.abs().cast<double>().mean();
      if (!std::isfinite(l1)) fail(ErrorKind::non_finite, "non-finite SDF loss at epoch " + std::to_string(epoch));
      nn::Matrix grad = (diff.sign() / static_cast<float>(m)).matrix();
      auto g = mlp.backward(tape, grad, true);
      lr = nn::cosine_lr(step++, total_steps, config.lr_start, config.lr_end);
      nn::adam_step(adam, params, g.tensors(), lr);
      sum += l1 * static_cast<double>(m);
    }
    model::EpochLoss e;
    e.epoch = epoch;
    e.total = e.displacement = sum / static_cast<double>(n);
    e.lr = lr;
    trace.push_back(e);
    if (progress) progress(e);
  }
  return trace;
}

double sdf_mean_abs_error(const SdfNetwork& net, std::span<const SdfSample> samples) {
  if (samples.empty()) return 0.0;
  nn::Matrix x(static_cast<Eigen::Index>(samples.size()), 3);
  for (std::size_t i = 0; i < samples.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = samples[i].point.transpose();
  const nn::Matrix pred = net.mlp().forward(x);
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) sum += std::abs(pred(static_cast<Eigen::Index>(i), 0) - samples[i].sdf);
  return sum / static_cast<double>(samples.size());
}

void save_sdf_network(const std::string& path, const SdfNetwork& net, const nlohmann::json& extra) {
  nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
  header["kind"] = "sdf";
  nn::save_mlp(path, net.mlp(), header);
}

SdfNetwork load_sdf_network(const std::string& path, nlohmann::json* header) {
  nlohmann::json h;
  nn::Mlp mlp = nn::load_mlp(path, &h);
  if (h.value("kind", std::string()) != "sdf") fail(ErrorKind::format, "'" + path + "' is not an SDF checkpoint");
  if (header) *header = h;
  return SdfNetwork(std::move(mlp));
}

}  // namespace prif::sdf
