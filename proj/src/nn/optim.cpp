#include "prif/nn.hpp"

#include "prif/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace prif::nn {

AdamState adam_init(std::span<const std::span<float>> params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0f);
    state.second_moment.emplace_back(p.size(), 0.0f);
  }
  return state;
}

void adam_step(AdamState& state, std::span<const std::span<float>> params, std::span<const std::span<float>> grads,
               double lr) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    fail(ErrorKind::shape_mismatch, "parameter, gradient and moment tensor counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || params[k].size() != state.first_moment[k].size()) {
      fail(ErrorKind::shape_mismatch, "tensor " + std::to_string(k) + " size mismatch");
    }
    for (float g : grads[k]) {
      if (!std::isfinite(g)) fail(ErrorKind::non_finite, "non-finite gradient in tensor " + std::to_string(k));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(static_cast<double>(AdamState::kBeta1), static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(static_cast<double>(AdamState::kBeta2), static_cast<double>(state.step));
  const auto step_size = static_cast<float>(lr / c1);
  const auto inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  for (std::size_t k = 0; k < params.size(); ++k) {
    float* p = params[k].data();
    const float* g = grads[k].data();
    float* m = state.first_moment[k].data();
    float* v = state.second_moment[k].data();
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      m[i] = AdamState::kBeta1 * m[i] + (1.0f - AdamState::kBeta1) * g[i];
      v[i] = AdamState::kBeta2 * v[i] + (1.0f - AdamState::kBeta2) * g[i] * g[i];
      p[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + AdamState::kEpsilon);
    }
  }
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_start, double lr_end) {
  if (total_steps <= 0 || step < 0 || step > total_steps) {
    fail(ErrorKind::out_of_range,
         "step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  if (step == 0) return lr_start;
  if (step == total_steps) return lr_end;
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(phase));
}

void save_mlp(const std::string& path, const Mlp& mlp, const nlohmann::json& extra) {
  nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
  header["spec"] = to_json(mlp.spec());
  header["tensors"] = mlp.parameter_names();
  io::write_container(path, "PRIFCKPT", header, io::as_bytes(mlp.parameters()));
}

Mlp load_mlp(const std::string& path, nlohmann::json* header) {
  auto c = io::read_container(path, "PRIFCKPT");
  const auto payload = c.floats();
  Mlp mlp = Mlp::create(mlp_spec_from_json(c.header.at("spec")), 0);
  std::size_t offset = 0;
  for (auto t : mlp.parameters()) {
    if (offset + t.size() > payload.size()) fail(ErrorKind::format, "checkpoint payload too short");
    std::memcpy(t.data(), payload.data() + offset, t.size_bytes());
    offset += t.size();
  }
  if (offset != payload.size()) fail(ErrorKind::format, "checkpoint payload has trailing data");
  if (header) *header = std::move(c.header);
  return mlp;
}

}  // namespace prif::nn
