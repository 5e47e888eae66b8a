#pragma once

#include "ddfusion/blocks.hpp"
#include "ddfusion/ddon.hpp"
#include "ddfusion/imaging.hpp"

#include <torch/torch.h>

namespace ddf {

// Interactive Local-Global Fusion Network: three local paths (kernel sizes
// 3/5/7, each per-modality RDSCB -> LIA -> fused RDSCB), a global ITB path,
// and local-global aggregation, plus the image reconstruction head.
//
// With `bypass` set (the "w/o ILGFN" ablation) fusion is channel-concat
// followed by a 1x1 conv; the reconstruction head is kept.
struct IlgfnImpl : torch::nn::Module {
  explicit IlgfnImpl(const BlockConfig& cfg, bool bypass = false);

  // (B, C, H, W) x2 -> (B, C, H, W)
  torch::Tensor forward(const torch::Tensor& f_vi, const torch::Tensor& f_ir);
  // fused features -> (B, 1, H, W) in [0, 1]
  torch::Tensor reconstruct(const torch::Tensor& f_fu);

  torch::nn::ModuleList rdscb_vi, rdscb_ir, lia, rdscb_fu;
  torch::nn::Conv2d conv_local{nullptr};
  Itb itb_global{nullptr};
  torch::nn::Conv2d lga_in{nullptr}, lga_out{nullptr};
  SwinBlock lga_swin1{nullptr}, lga_swin2{nullptr};
  torch::nn::Conv2d recon1{nullptr}, recon2{nullptr}, recon3{nullptr};
  torch::nn::Conv2d bypass_fuse{nullptr};
  double slope;
  bool bypass;
};
TORCH_MODULE(Ilgfn);

// Full-image fusion: YCbCr split, DDON + ILGFN + reconstruction on the Y
// channel, chroma passthrough, RGB output. ir: (1, H, W); vi_rgb: (3, H, W).
torch::Tensor fuse_image(const torch::Tensor& ir, const torch::Tensor& vi_rgb,
                         Ddon& ddon, Ilgfn& ilgfn);

}  // namespace ddf
