#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "asmamba/tensor.hpp"

// Checkpoint container, all integers little-endian:
//
//   "ASMC"  uint32 version (1)
//   uint32 n  + n bytes      JSON config snapshot
//   int64 epoch, int64 step, int64 adam_t
//   uint32 n_arrays, uint32 has_adam
//   per array: uint32 name_len + name, uint32 rank, rank x uint32 dims,
//              prod(dims) float32 values; then, when has_adam, the Adam first
//              and second moments as prod(dims) float32 each
namespace asmamba {

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string config_json;
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  std::int64_t adam_t = 0;
  std::vector<std::pair<std::string, Tensor>> weights;
  std::vector<Tensor> adam_m, adam_v;  // empty or aligned with weights
};

std::string serialize(const Checkpoint& c);
/// Throws std::runtime_error on a bad magic, version or truncated input.
Checkpoint deserialize(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace asmamba
