#include "prif/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace prif {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io-error";
    case ErrorKind::parse: return "parse-error";
    case ErrorKind::empty_mesh: return "empty-mesh";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::non_unit_direction: return "non-unit-direction";
    case ErrorKind::off_line_point: return "off-line-point";
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::non_finite: return "non-finite";
    case ErrorKind::stale_tape: return "stale-tape";
    case ErrorKind::mode_mismatch: return "mode-mismatch";
    case ErrorKind::unknown_shape: return "unknown-shape";
    case ErrorKind::missing_head: return "missing-head";
    case ErrorKind::invalid_level: return "invalid-level";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::resolution_mismatch: return "resolution-mismatch";
    case ErrorKind::format: return "format-error";
  }
  return "unknown";
}

PrifError::PrifError(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw PrifError(kind, what); }

namespace {
std::atomic<int> g_threads{0};
}

int thread_count() {
  int n = g_threads.load();
  if (n > 0) return n;
  if (const char* env = std::getenv("PRIF_THREADS")) {
    int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  return 1;
}

void set_thread_count(int n) { g_threads.store(std::max(n, 0)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  const auto workers = static_cast<std::size_t>(std::max(1, thread_count()));
  if (workers == 1 || n < 2 * workers) {
    body(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  auto h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace prif
