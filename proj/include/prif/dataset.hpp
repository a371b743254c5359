#pragma once

#include "prif/geometry.hpp"
#include "prif/rays.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prif::data {

using rays::EncodingMode;
using Vec3f = Eigen::Vector3f;

/// One supervised ray. Stored in float32, exactly as persisted.
struct RayRecord {
  Vec3f anchor = Vec3f::Zero();
  Vec3f direction = Vec3f::UnitZ();
  /// Signed displacement from the perpendicular foot; 0 for background rays.
  float s_gt = 0.0f;
  std::uint8_t a_gt = 0;
  std::uint16_t shape_id = 0;
  /// Surface hit, present for foreground rays. Not persisted; rebuilt from
  /// (foot, direction, s_gt) on load.
  std::optional<Vec3f> hit;

  bool foreground() const { return a_gt != 0; }
  rays::RayEncoding encoding(EncodingMode mode) const;
  /// Persisted fields compare equal bitwise.
  bool same_persisted(const RayRecord& other) const;
};

RayRecord make_record(const rays::RayEncoding& enc, const std::optional<Vec3>& hit, std::uint16_t shape_id);

/// hit_point(foot, d, s_gt) evaluated in double from the stored floats.
Vec3 record_hit(const RayRecord& rec, EncodingMode mode);

struct ShapeRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct RayDataset {
  EncodingMode mode = EncodingMode::perp_foot;
  std::vector<RayRecord> records;
  /// Optional per-record rgb (foreground colors, zero for background).
  std::vector<Vec3f> colors;
  std::vector<ShapeRange> shapes;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return records.size(); }
  std::size_t foreground_count() const;
  int shape_count() const { return static_cast<int>(shapes.size()); }
  bool has_colors() const { return !colors.empty(); }
};

nlohmann::json rig_to_json(std::span<const geometry::Camera> rig);
std::vector<geometry::Camera> rig_from_json(const nlohmann::json& j);

/// One record per pixel per camera in (camera, row-major pixel) order.
RayDataset generate_ray_dataset(const geometry::TriangleMesh& mesh, const geometry::Bvh& bvh,
                                std::span<const geometry::Camera> rig, EncodingMode mode,
                                std::uint16_t shape_id = 0);

/// Appends `other` as a new shape; its records get the next dense shape id.
void append_shape(RayDataset& dataset, const RayDataset& other);

enum class Corruption { noise, partial };

/// noise: Gaussian perturbation (std = level) of each foreground hit, with the
/// ray re-aimed through the perturbed point along its original direction.
/// partial: keeps round(level * foreground) foreground records.
RayDataset corrupt(const RayDataset& dataset, Corruption kind, double level, std::uint64_t seed);

/// Turns observed surface points into foreground rays cast from the nearest
/// viewpoint.
std::vector<RayRecord> points_to_rays(std::span<const Vec3> points, std::span<const Vec3> viewpoints,
                                      EncodingMode mode, std::uint16_t shape_id = 0);

inline constexpr std::size_t kRecordBytes = 36;

/// PRIFDATA container: JSON header then fixed 36-byte records
/// (anchor 3xf32, direction 3xf32, s f32, a u8, shape_id u16, zero pad), then
/// optional per-record colors as 3xf32 when the header says so.
void save_dataset(const std::string& path, const RayDataset& dataset);
RayDataset load_dataset(const std::string& path);

}  // namespace prif::data
