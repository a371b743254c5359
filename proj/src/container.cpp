#include "prif/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace prif::io {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

void write_container(const std::string& path, std::string_view magic, const nlohmann::json& header,
                     std::span<const std::span<const std::byte>> chunks) {
  if (magic.size() != 8) fail(ErrorKind::invalid_argument, "container magic must be 8 bytes");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  out.write(magic.data(), 8);
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& c : chunks) {
    out.write(reinterpret_cast<const char*>(c.data()), static_cast<std::streamsize>(c.size()));
  }
  if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

Container read_container(const std::string& path, std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  char got[8] = {};
  in.read(got, 8);
  if (!in || std::string_view(got, 8) != magic) {
    fail(ErrorKind::format, "'" + path + "' does not start with magic " + std::string(magic));
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ULL << 32)) fail(ErrorKind::format, "bad header length in '" + path + "'");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) fail(ErrorKind::format, "truncated header in '" + path + "'");
  Container c;
  try {
    c.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, "header JSON in '" + path + "': " + e.what());
  }
  std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  c.payload.resize(rest.size());
  std::memcpy(c.payload.data(), rest.data(), rest.size());
  return c;
}

std::vector<float> Container::floats() const {
  if (payload.size() % sizeof(float) != 0) fail(ErrorKind::format, "payload is not float-aligned");
  std::vector<float> out(payload.size() / sizeof(float));
  std::memcpy(out.data(), payload.data(), payload.size());
  return out;
}

}  // namespace prif::io
