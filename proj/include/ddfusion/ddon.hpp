#pragma once

#include "ddfusion/blocks.hpp"
#include "ddfusion/decomposition.hpp"

#include <torch/torch.h>

namespace ddf {

// Degradation-Decoupled Optimization Network. Decomposes the raw degraded
// images (frequency split for infrared, Retinex for visible), embeds each
// component, runs the component-specific enhancement paths and recomposes:
// F_ir_en = F_low_en + F_high_en, F_vi_en = F_r_en * F_l_en.
//
// With `bypass` set (the "w/o DDON" ablation) the raw images are embedded
// directly and the enhancement paths are skipped.
struct DdonImpl : torch::nn::Module {
  explicit DdonImpl(const BlockConfig& cfg, double tau = kDefaultTau, bool bypass = false);

  // ir, vi: (B, 1, H, W) in [0, 1] -> pair of (B, C, H, W) features
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& ir,
                                                  const torch::Tensor& vi);
  // stage-1 image heads: features -> (B, 1, H, W) sigmoid-bounded images
  std::pair<torch::Tensor, torch::Tensor> reconstruct(const torch::Tensor& f_ir,
                                                      const torch::Tensor& f_vi);

  // spatial-domain components fed to the embeds, in order low, high, r, l
  std::array<torch::Tensor, 4> decompose(const torch::Tensor& ir, const torch::Tensor& vi) const;

  torch::nn::Conv2d embed_low{nullptr}, embed_high{nullptr}, embed_r{nullptr}, embed_l{nullptr};
  MsConv msconv{nullptr};
  SwinBlock swin{nullptr};
  Itb itb{nullptr};
  Cbam cbam_low{nullptr}, cbam_high{nullptr}, cbam_r{nullptr}, cbam_l{nullptr};
  GnLr gnlr_low{nullptr}, gnlr_high{nullptr}, gnlr_r{nullptr}, gnlr_l{nullptr};
  torch::nn::Conv2d head_ir{nullptr}, head_vi{nullptr};
  double tau;
  bool bypass;
};
TORCH_MODULE(Ddon);

}  // namespace ddf
