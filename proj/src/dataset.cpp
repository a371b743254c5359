#include "prif/dataset.hpp"

#include "prif/container.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

namespace prif::data {

namespace {

Vec3f to_f(const Vec3& v) { return v.cast<float>(); }
Vec3 to_d(const Vec3f& v) { return v.cast<double>(); }

void rebuild_shape_ranges(RayDataset& ds) {
  std::uint16_t max_id = 0;
  for (const auto& r : ds.records) max_id = std::max(max_id, r.shape_id);
  const std::size_t n_shapes = ds.records.empty() ? ds.shapes.size() : std::max<std::size_t>(max_id + 1, ds.shapes.size());
  ds.shapes.assign(n_shapes, {});
  std::vector<bool> seen(n_shapes, false);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    auto& range = ds.shapes[ds.records[i].shape_id];
    if (!seen[ds.records[i].shape_id]) {
      range.begin = i;
      seen[ds.records[i].shape_id] = true;
    }
    range.end = i + 1;
  }
}

}  // namespace

rays::RayEncoding RayRecord::encoding(EncodingMode mode) const {
  return {mode, to_d(anchor), to_d(direction)};
}

bool RayRecord::same_persisted(const RayRecord& o) const {
  return std::memcmp(anchor.data(), o.anchor.data(), sizeof(float) * 3) == 0 &&
         std::memcmp(direction.data(), o.direction.data(), sizeof(float) * 3) == 0 &&
         std::memcmp(&s_gt, &o.s_gt, sizeof(float)) == 0 && a_gt == o.a_gt && shape_id == o.shape_id;
}

RayRecord make_record(const rays::RayEncoding& enc, const std::optional<Vec3>& hit, std::uint16_t shape_id) {
  RayRecord rec;
  rec.anchor = to_f(enc.anchor);
  rec.direction = to_f(enc.direction);
  rec.shape_id = shape_id;
  if (hit) {
    rec.a_gt = 1;
    rec.s_gt = static_cast<float>(rays::signed_displacement(rays::foot_of(enc), enc.direction, *hit));
    rec.hit = to_f(*hit);
  }
  return rec;
}

Vec3 record_hit(const RayRecord& rec, EncodingMode mode) {
  const auto enc = rec.encoding(mode);
  return rays::hit_point(rays::foot_of(enc), enc.direction, rec.s_gt);
}

std::size_t RayDataset::foreground_count() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.foreground(); }));
}

nlohmann::json rig_to_json(std::span<const geometry::Camera> rig) {
  auto arr = nlohmann::json::array();
  for (const auto& c : rig) {
    std::vector<double> rot(c.rotation.data(), c.rotation.data() + 9);
    arr.push_back({{"position", {c.position.x(), c.position.y(), c.position.z()}},
                   {"rotation_col_major", rot},
                   {"fov_y", c.fov_y},
                   {"width", c.width},
                   {"height", c.height}});
  }
  return arr;
}

std::vector<geometry::Camera> rig_from_json(const nlohmann::json& j) {
  std::vector<geometry::Camera> rig;
  for (const auto& e : j) {
    geometry::Camera c;
    const auto p = e.at("position").get<std::vector<double>>();
    c.position = Vec3(p.at(0), p.at(1), p.at(2));
    const auto r = e.at("rotation_col_major").get<std::vector<double>>();
    if (r.size() != 9) fail(ErrorKind::format, "camera rotation needs 9 entries");
    std::copy(r.begin(), r.end(), c.rotation.data());
    c.fov_y = e.at("fov_y").get<double>();
    c.width = e.at("width").get<int>();
    c.height = e.at("height").get<int>();
    rig.push_back(c);
  }
  return rig;
}

RayDataset generate_ray_dataset(const geometry::TriangleMesh& mesh, const geometry::Bvh& bvh,
                                std::span<const geometry::Camera> rig, EncodingMode mode, std::uint16_t shape_id) {
  if (rig.empty()) fail(ErrorKind::invalid_argument, "camera rig is empty");
  std::vector<std::size_t> offsets{0};
  for (const auto& cam : rig) offsets.push_back(offsets.back() + static_cast<std::size_t>(cam.width) * cam.height);
  RayDataset ds;
  ds.mode = mode;
  ds.records.resize(offsets.back());
  if (mesh.has_colors()) ds.colors.assign(offsets.back(), Vec3f::Zero());
  parallel_for(offsets.back(), [&](std::size_t begin, std::size_t end) {
    std::size_t cam_index = std::upper_bound(offsets.begin(), offsets.end(), begin) - offsets.begin() - 1;
    for (std::size_t i = begin; i < end; ++i) {
      while (i >= offsets[cam_index + 1]) ++cam_index;
      const auto& cam = rig[cam_index];
      const auto local = static_cast<int>(i - offsets[cam_index]);
      const auto ray = geometry::camera_ray(cam, local % cam.width, local / cam.width);
      const auto hit = geometry::cast_ray(bvh, mesh, ray);
      const auto enc = rays::encode_ray(ray, mode);
      ds.records[i] = make_record(enc, hit ? std::optional<Vec3>(hit->point) : std::nullopt, shape_id);
      if (hit && mesh.has_colors()) ds.colors[i] = to_f(geometry::color_at(mesh, *hit));
    }
  });
  ds.shapes.assign(static_cast<std::size_t>(shape_id) + 1, {});
  ds.shapes[shape_id] = {0, ds.records.size()};
  ds.metadata = {{"rig", rig_to_json(rig)},
                 {"mesh_hash", mesh.fingerprint()},
                 {"seed", 0},
                 {"records", ds.records.size()},
                 {"foreground", ds.foreground_count()}};
  return ds;
}

void append_shape(RayDataset& dataset, const RayDataset& other) {
  if (dataset.records.empty() && dataset.shapes.empty()) {
    dataset.mode = other.mode;
  } else if (dataset.mode != other.mode) {
    fail(ErrorKind::mode_mismatch, "cannot mix encoding modes in one dataset");
  }
  if (dataset.has_colors() != other.has_colors() && !dataset.records.empty()) {
    fail(ErrorKind::invalid_argument, "cannot mix colored and uncolored datasets");
  }
  const auto id = static_cast<std::uint16_t>(dataset.shapes.size());
  const std::size_t begin = dataset.records.size();
  for (auto rec : other.records) {
    rec.shape_id = id;
    dataset.records.push_back(std::move(rec));
  }
  dataset.colors.insert(dataset.colors.end(), other.colors.begin(), other.colors.end());
  dataset.shapes.push_back({begin, dataset.records.size()});
  dataset.metadata["shapes"].push_back(other.metadata);
}

RayDataset corrupt(const RayDataset& dataset, Corruption kind, double level, std::uint64_t seed) {
  RayDataset out = dataset;
  std::mt19937_64 rng(seed);
  if (kind == Corruption::noise) {
    if (!(level >= 0.0) || !std::isfinite(level)) fail(ErrorKind::invalid_level, "noise level must be >= 0");
    if (level == 0.0) return out;
    std::normal_distribution<double> gauss(0.0, level);
    for (auto& rec : out.records) {
      if (!rec.foreground()) continue;
      const auto enc = rec.encoding(out.mode);
      const Vec3& d = enc.direction;
      const Vec3 h = record_hit(rec, out.mode);
      const Vec3 delta(gauss(rng), gauss(rng), gauss(rng));
      const Vec3 moved = h + delta;
      const Vec3 foot = moved - moved.dot(d) * d;
      rays::RayEncoding shifted = enc;
      switch (out.mode) {
        case EncodingMode::perp_foot: shifted.anchor = foot; break;
        case EncodingMode::plucker: shifted.anchor = moved.cross(d); break;
        case EncodingMode::raw: shifted.anchor = enc.anchor + (delta - delta.dot(d) * d); break;
      }
      rec = make_record(shifted, moved, rec.shape_id);
    }
  } else {
    if (!(level > 0.0 && level <= 1.0)) fail(ErrorKind::invalid_level, "partial level must be in (0, 1]");
    std::vector<std::size_t> fg;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      if (out.records[i].foreground()) fg.push_back(i);
    }
    std::shuffle(fg.begin(), fg.end(), rng);
    const auto keep = static_cast<std::size_t>(std::llround(level * static_cast<double>(fg.size())));
    std::vector<bool> drop(out.records.size(), false);
    for (std::size_t k = keep; k < fg.size(); ++k) drop[fg[k]] = true;
    RayDataset kept;
    kept.mode = out.mode;
    kept.metadata = out.metadata;
    kept.shapes = out.shapes;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      if (drop[i]) continue;
      kept.records.push_back(out.records[i]);
      if (out.has_colors()) kept.colors.push_back(out.colors[i]);
    }
    out = std::move(kept);
    rebuild_shape_ranges(out);
  }
  out.metadata["corruption"].push_back(
      {{"kind", kind == Corruption::noise ? "noise" : "partial"}, {"level", level}, {"seed", seed}});
  return out;
}

std::vector<RayRecord> points_to_rays(std::span<const Vec3> points, std::span<const Vec3> viewpoints,
                                      EncodingMode mode, std::uint16_t shape_id) {
  if (points.empty()) fail(ErrorKind::invalid_argument, "no observed points");
  if (viewpoints.empty()) fail(ErrorKind::invalid_argument, "no viewpoints");
  std::vector<RayRecord> out;
  out.reserve(points.size());
  for (const auto& h : points) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < viewpoints.size(); ++k) {
      if ((viewpoints[k] - h).squaredNorm() < (viewpoints[best] - h).squaredNorm()) best = k;
    }
    const Vec3& c = viewpoints[best];
    const double dist = (h - c).norm();
    if (dist < 1e-6) fail(ErrorKind::invalid_argument, "observed point coincides with its viewpoint");
    const geometry::Ray ray{c, (h - c) / dist};
    out.push_back(make_record(rays::encode_ray(ray, mode), h, shape_id));
  }
  return out;
}

void save_dataset(const std::string& path, const RayDataset& ds) {
  std::vector<std::byte> bytes(ds.records.size() * kRecordBytes, std::byte{0});
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    std::byte* p = bytes.data() + i * kRecordBytes;
    std::memcpy(p, r.anchor.data(), 12);
    std::memcpy(p + 12, r.direction.data(), 12);
    std::memcpy(p + 24, &r.s_gt, 4);
    std::memcpy(p + 28, &r.a_gt, 1);
    std::memcpy(p + 29, &r.shape_id, 2);
  }
  auto shapes = nlohmann::json::array();
  for (const auto& s : ds.shapes) shapes.push_back({s.begin, s.end});
  const nlohmann::json header = {{"mode", rays::to_string(ds.mode)},
                                 {"count", ds.records.size()},
                                 {"record_bytes", kRecordBytes},
                                 {"shapes", shapes},
                                 {"has_colors", ds.has_colors()},
                                 {"metadata", ds.metadata}};
  std::vector<std::span<const std::byte>> chunks{bytes};
  if (ds.has_colors()) chunks.push_back(std::as_bytes(std::span(ds.colors.data(), ds.colors.size())));
  io::write_container(path, "PRIFDATA", header, chunks);
}

RayDataset load_dataset(const std::string& path) {
  auto c = io::read_container(path, "PRIFDATA");
  RayDataset ds;
  try {
    ds.mode = rays::parse_encoding_mode(c.header.at("mode").get<std::string>());
    const auto count = c.header.at("count").get<std::size_t>();
    if (c.header.at("record_bytes").get<std::size_t>() != kRecordBytes) fail(ErrorKind::format, "unexpected record size");
    const bool has_colors = c.header.value("has_colors", false);
    const std::size_t expect = count * kRecordBytes + (has_colors ? count * 12 : 0);
    if (c.payload.size() != expect) fail(ErrorKind::format, "dataset payload size does not match header");
    ds.records.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      auto& r = ds.records[i];
      const std::byte* p = c.payload.data() + i * kRecordBytes;
      std::memcpy(r.anchor.data(), p, 12);
      std::memcpy(r.direction.data(), p + 12, 12);
      std::memcpy(&r.s_gt, p + 24, 4);
      std::memcpy(&r.a_gt, p + 28, 1);
      std::memcpy(&r.shape_id, p + 29, 2);
      if (r.a_gt > 1) fail(ErrorKind::format, "record " + std::to_string(i) + " has a_gt > 1");
      if (r.foreground()) r.hit = to_f(record_hit(r, ds.mode));
    }
    if (has_colors) {
      ds.colors.resize(count);
      std::memcpy(static_cast<void*>(ds.colors.data()), c.payload.data() + count * kRecordBytes, count * 12);
    }
    for (const auto& s : c.header.at("shapes")) ds.shapes.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    ds.metadata = c.header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, "dataset header in '" + path + "': " + e.what());
  }
  return ds;
}

}  // namespace prif::data
