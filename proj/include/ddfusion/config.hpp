#pragma once

#include "ddfusion/blocks.hpp"
#include "ddfusion/decomposition.hpp"
#include "ddfusion/losses.hpp"

#include <cstdint>
#include <string>

namespace ddf {

struct DegradationRanges {
  double sigma_min = 5.0, sigma_max = 30.0;     // Gaussian, 0-255 scale
  double stripe_min = 10.0, stripe_max = 30.0;  // stripe amplitude, 0-255 scale
  std::string orientation = "vertical";         // or "horizontal", "random"
  double lowlight_gamma = 2.0;                  // used when darken_augment
};

struct TrainSettings {
  int64_t crop_size = 128;
  int64_t batch_size = 16;
  double learning_rate = 1e-3;
  int64_t stage1_steps = 300;
  int64_t stage2_steps = 300;
  bool darken_augment = false;
};

struct ModelToggles {
  bool use_ddon = true;   // ablation: bypass embeds raw images directly
  bool use_ilgfn = true;  // ablation: bypass fuses by concat + 1x1 conv
};

struct Paths {
  std::string ir_dir, vi_dir, out_dir = "out";
};

// The single project config document. Unknown JSON keys are rejected;
// missing keys take the defaults above.
struct ProjectConfig {
  int version = 1;
  int64_t seed = 7;
  double tau = kDefaultTau;
  int64_t perceptual_seed = 17;
  BlockConfig block;
  LossWeights loss;
  DegradationRanges degradation;
  TrainSettings train;
  ModelToggles model;
  Paths paths;

  void validate() const;
  std::string to_json() const;
  static ProjectConfig from_json(const std::string& text);
  static ProjectConfig load(const std::string& path);
  void save(const std::string& path) const;
  uint64_t digest() const;
};

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace ddf
