#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asmamba/ct_sim.hpp"

// Synthetic paired datasets and their on-disk layout:
//
//   manifest.json    {"count", "image_size", "seed", "n_angles", "eta": [...]}
//   {idx}_xm.bin, {idx}_xgt.bin, {idx}_xl.bin, {idx}_mask.bin
//
// Each .bin array is a 16-byte header (magic "ASMR", then H, W, channels as
// little-endian uint32) followed by H*W*channels little-endian float32 values
// in channel-major, row-major order.
namespace asmamba::data {

struct Sample {
  int index = 0;
  double eta = 1.0;
  ct::ArtifactPair pair;  // (N, N) images
};

struct Dataset {
  int image_size = 0;
  int n_angles = 0;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

struct GenerateOptions {
  int count = 8;
  int image_size = 64;
  int n_angles = 180;
  std::uint64_t seed = 0;
  std::vector<double> etas{0.5, 1.0, 2.0};  // sample i uses etas[i % etas.size()]
  ct::SimulationOptions sim{};
};

/// Sample i depends only on (seed, i).
Dataset generate(const GenerateOptions& opts);

void write_array(const std::string& path, const Tensor& t);
/// Returns (C, H, W); a single channel comes back as (H, W).
Tensor read_array(const std::string& path);

void save(const Dataset& d, const std::string& dir);
/// Throws std::runtime_error on missing or malformed files.
Dataset load(const std::string& dir);

/// Ground-truth-free copy (x_gt cleared), for clinical-style evaluation.
Dataset without_ground_truth(Dataset d);

}  // namespace asmamba::data
