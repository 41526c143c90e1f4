#pragma once

// Planted cross-lingual WSD fixture: sense clusters in a latent space, a
// source language that sees them through one orthogonal frame per layer and
// a target language that sees them through another, plus noise.

#include <cstdint>
#include <filesystem>
#include <vector>

namespace xsense {

struct SyntheticOptions {
  std::uint32_t dim = 16;
  std::size_t senses = 5;
  std::size_t train_per_sense = 40;
  std::size_t eval_per_sense = 20;  // per dev and per test corpus
  std::size_t anchors = 400;
  double center_norm = 3.0;     // distance of each cluster mean from the origin
  double within_sigma = 0.25;   // per-coordinate spread inside a cluster
  double noise_sigma = 0.05;    // target-side noise at layer -1
  double layer_noise_step = 0.0;  // extra target noise per layer below -1
  bool rotate = true;           // false: both languages share one frame
  std::vector<int> layers{-1};
  std::uint64_t seed = 1;
};

// Writes stores (`*.L<layer>.cemb`), labels, inventory, anchors, dev/test
// XML and gold, and run_dense.toml / run_sparse.toml into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticOptions& options = {});

}  // namespace xsense
