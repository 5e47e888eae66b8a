#pragma once

#include "ddfusion/checkpoint.hpp"
#include "ddfusion/config.hpp"
#include "ddfusion/ddon.hpp"
#include "ddfusion/ilgfn.hpp"
#include "ddfusion/imaging.hpp"

#include <string>
#include <vector>

namespace ddf {

struct SamplePair {
  std::string id;
  torch::Tensor ir_clean;           // (1, h, w)
  torch::Tensor ir_degraded;        // (1, h, w)
  torch::Tensor vi_degraded_rgb;    // (3, h, w)
  torch::Tensor vi_reference_rgb;   // (3, h, w)
  torch::Tensor vi_y_in, vi_y_ref;  // cached Y planes
  DegradationSpec spec;
};

// Aligned ir/vi PNG pairs matched by filename; every emitted crop is
// crop_size x crop_size and all degradation draws are functions of
// (config seed, sample index).
std::vector<SamplePair> build_dataset(const std::string& ir_dir, const std::string& vi_dir,
                                      const ProjectConfig& cfg, int64_t max_pairs = -1);

// One synthetic SamplePair from already-loaded images (used by tests and the
// smoke harness).
SamplePair make_sample(const std::string& id, const torch::Tensor& ir,
                       const torch::Tensor& vi_rgb, const ProjectConfig& cfg, int64_t index);

struct StageOutcome {
  Checkpoint checkpoint;
  std::vector<double> losses;  // logged total per step
};

// Stage 1: optimize DDON against L_do. Steps count and optimizer settings
// come from cfg.train; `start_step` continues numbering on resume.
StageOutcome train_stage1(const std::vector<SamplePair>& samples, const ProjectConfig& cfg,
                          Ddon& ddon, const std::string& log_path = "",
                          int64_t start_step = 0);

// Stage 2: DDON frozen, optimize ILGFN (+ reconstruction) against L_fu.
StageOutcome train_stage2(const std::vector<SamplePair>& samples, const ProjectConfig& cfg,
                          Ddon& ddon, Ilgfn& ilgfn, const std::string& log_path = "",
                          int64_t start_step = 0);

Checkpoint make_checkpoint(const ProjectConfig& cfg, Ddon& ddon, Ilgfn* ilgfn,
                           int64_t stage1_steps, int64_t stage2_steps);

// batch indices for a given stage/step, a pure function of (seed, stage, step)
std::vector<int64_t> batch_indices(int64_t seed, int stage, int64_t step,
                                   int64_t batch, int64_t population);

}  // namespace ddf
