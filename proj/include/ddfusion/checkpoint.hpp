#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <string>

namespace ddf {

// Versioned binary container: header (magic "DDFU", version, config digest,
// step counters), named segments of little-endian float32 with declared
// shapes, and a trailing FNV-1a content digest over the segment payloads.
struct Checkpoint {
  static constexpr uint32_t kFormatVersion = 1;

  uint32_t version = kFormatVersion;
  uint64_t config_digest = 0;
  int64_t stage1_steps = 0;
  int64_t stage2_steps = 0;
  std::map<std::string, torch::Tensor> segments;  // float32, CPU

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // digest over payload bytes of segments whose name starts with `prefix`
  // (empty prefix: all segments)
  uint64_t content_digest(const std::string& prefix = "") const;

  void put_module(const std::string& prefix, const torch::nn::Module& m);
  void load_into(const std::string& prefix, torch::nn::Module& m) const;
};

}  // namespace ddf
