#pragma once

#include "prif/geometry.hpp"

namespace prif::geometry {

/// Subdivided icosahedron projected onto a sphere. level 0 has 20 faces.
TriangleMesh make_icosphere(int level, double radius = 1.0, const Vec3& center = Vec3::Zero());

/// Two horizontal squares forming a height step at x = 0: z = 0 for
/// x in [-half, 0], z = height for x in [0, half], y in [-half, half].
/// No riser face.
TriangleMesh make_step(double height, double half_extent = 1.0);

/// A sphere with two smaller offset lobes. Its silhouette changes under any
/// rotation, unlike a plain sphere. The lobes overlap the body; the mesh is
/// meant for ray casting, not for inside/outside queries.
TriangleMesh make_lobed(int level = 3);

/// Concatenates meshes (colors are kept only if every part has them).
TriangleMesh merge_meshes(std::span<const TriangleMesh> parts);

/// Assigns per-vertex colors from position: rgb = 0.5 + 0.5 * p / |p|max.
void paint_by_position(TriangleMesh& mesh);

}  // namespace prif::geometry
