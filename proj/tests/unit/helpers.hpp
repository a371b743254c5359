#pragma once

#include "prif/common.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#ifndef PRIF_FIXTURE_DIR
#define PRIF_FIXTURE_DIR "tests/fixtures"
#endif

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(PRIF_FIXTURE_DIR) + "/" + name; }

/// Per-test scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("prif-test-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline prif::Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return prif::Vec3(g(rng), g(rng), g(rng)).normalized();
}

inline prif::Vec3 random_point(std::mt19937_64& rng, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  return prif::Vec3(u(rng), u(rng), u(rng));
}

template <typename F>
prif::ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const prif::PrifError& e) {
    return e.kind();
  }
  FAIL("expected a PrifError");
  return prif::ErrorKind::io;
}

}  // namespace testing
