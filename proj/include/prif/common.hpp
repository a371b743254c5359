#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace prif {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorKind {
  io,
  parse,
  empty_mesh,
  invalid_argument,
  non_unit_direction,
  off_line_point,
  invalid_spec,
  shape_mismatch,
  non_finite,
  stale_tape,
  mode_mismatch,
  unknown_shape,
  missing_head,
  invalid_level,
  out_of_range,
  resolution_mismatch,
  format,
};

const char* to_string(ErrorKind kind);

/// Every failure in the library surfaces as a PrifError carrying a kind tag so
/// callers (and the CLI exit-code mapping) can branch without parsing text.
class PrifError : public std::runtime_error {
 public:
  PrifError(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

/// Worker count used by parallel_for. Resolved from set_thread_count(), then
/// PRIF_THREADS, then 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the thread count, and every chunk writes to disjoint
/// output slots, so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// FNV-1a over raw bytes; used for weight and mesh fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace prif
