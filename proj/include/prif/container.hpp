#pragma once

#include "prif/common.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prif::io {

/// On-disk layout shared by checkpoints, ray datasets and SDF sample files:
///   8-byte magic | u64 LE header length | UTF-8 JSON header | payload bytes
void write_container(const std::string& path, std::string_view magic, const nlohmann::json& header,
                     std::span<const std::span<const std::byte>> chunks);

struct Container {
  nlohmann::json header;
  std::vector<std::byte> payload;

  /// Payload reinterpreted as little-endian float32.
  std::vector<float> floats() const;
};

Container read_container(const std::string& path, std::string_view magic);

template <typename T>
std::vector<std::span<const std::byte>> as_bytes(const std::vector<std::span<T>>& tensors) {
  std::vector<std::span<const std::byte>> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back(std::as_bytes(std::span<const std::remove_const_t<T>>(t)));
  return out;
}

}  // namespace prif::io
