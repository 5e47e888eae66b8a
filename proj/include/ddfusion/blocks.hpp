#pragma once

#include <torch/torch.h>

#include <utility>

namespace ddf {

struct BlockConfig {
  int64_t channels = 16;
  int64_t window = 8;
  int64_t heads = 2;
  int64_t mlp_ratio = 2;
  int64_t rdscb_repeat = 2;
  int64_t cbam_reduction = 8;
  int64_t gn_groups = 4;
  double leaky_slope = 0.2;

  void validate() const;
};

void trunc_normal_(torch::Tensor t, double std = 0.02);

// Lossless tiling of (B, C, H, W) into (B * nWin, M*M, C) token windows.
// Inputs whose spatial size is not a multiple of M are reflect-padded;
// window_reverse crops back.
struct WindowLayout {
  int64_t batch, channels, height, width;  // original
  int64_t padded_h, padded_w;
  int64_t window;
};
std::pair<torch::Tensor, WindowLayout> window_partition(const torch::Tensor& x, int64_t window);
torch::Tensor window_reverse(const torch::Tensor& tokens, const WindowLayout& layout);

// Multi-head scaled-dot-product attention over token matrices (N, T, C),
// softmax rows sum to 1; no output projection here.
torch::Tensor multi_head_attention(const torch::Tensor& q, const torch::Tensor& k,
                                   const torch::Tensor& v, int64_t heads);

// Two-layer MLP with LeakyReLU.
struct TokenMlpImpl : torch::nn::Module {
  TokenMlpImpl(int64_t dim, int64_t hidden, double slope);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
  double slope;
};
TORCH_MODULE(TokenMlp);

// Interactive self-attention: per-stream Q/K/V projections, queries shared by
// addition, one output projection per stream.
struct IsaImpl : torch::nn::Module {
  IsaImpl(int64_t dim, int64_t heads);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x1,
                                                  const torch::Tensor& x2);
  torch::nn::Linear q1{nullptr}, k1{nullptr}, v1{nullptr};
  torch::nn::Linear q2{nullptr}, k2{nullptr}, v2{nullptr};
  torch::nn::Linear proj1{nullptr}, proj2{nullptr};
  int64_t heads;
};
TORCH_MODULE(Isa);

// Interactive transformer block: window-wise pre-norm ISA + residual,
// then pre-norm MLP + residual, on both streams.
struct ItbImpl : torch::nn::Module {
  explicit ItbImpl(const BlockConfig& cfg);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& f1,
                                                  const torch::Tensor& f2);
  torch::nn::LayerNorm norm1a{nullptr}, norm1b{nullptr}, norm2a{nullptr}, norm2b{nullptr};
  Isa isa{nullptr};
  TokenMlp mlp1{nullptr}, mlp2{nullptr};
  int64_t window;
};
TORCH_MODULE(Itb);

// One window-attention transformer layer (optionally with cyclic shift).
struct SwinLayerImpl : torch::nn::Module {
  SwinLayerImpl(const BlockConfig& cfg, int64_t shift);
  torch::Tensor forward(const torch::Tensor& f);
  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Linear qkv{nullptr}, proj{nullptr};
  TokenMlp mlp{nullptr};
  int64_t window, heads, shift;
};
TORCH_MODULE(SwinLayer);

// Pair of window-attention layers, the second cyclically shifted by M/2.
struct SwinBlockImpl : torch::nn::Module {
  explicit SwinBlockImpl(const BlockConfig& cfg);
  torch::Tensor forward(const torch::Tensor& f);
  SwinLayer layer1{nullptr}, layer2{nullptr};
};
TORCH_MODULE(SwinBlock);

// Four parallel conv branches (k in {1,3,5,7}, C -> C/4 each), concatenated
// and fused by a 1x1 conv.
struct MsConvImpl : torch::nn::Module {
  explicit MsConvImpl(const BlockConfig& cfg);
  torch::Tensor forward(const torch::Tensor& f);
  torch::nn::ModuleList branches;
  torch::nn::Conv2d fuse{nullptr};
  double slope;
};
TORCH_MODULE(MsConv);

// Channel attention (avg+max pooled MLP) then spatial attention (7x7 conv).
struct CbamImpl : torch::nn::Module {
  explicit CbamImpl(const BlockConfig& cfg);
  torch::Tensor forward(const torch::Tensor& f);
  torch::nn::Conv2d fc1{nullptr}, fc2{nullptr}, spatial{nullptr};
};
TORCH_MODULE(Cbam);

// Group normalization + LeakyReLU epilogue.
struct GnLrImpl : torch::nn::Module {
  explicit GnLrImpl(const BlockConfig& cfg);
  torch::Tensor forward(const torch::Tensor& f);
  torch::nn::GroupNorm gn{nullptr};
  double slope;
};
TORCH_MODULE(GnLr);

// Residual depthwise-separable convolution block: m repetitions of
// DWConv_n -> LR -> PWConv -> LR, residual add, GN&LR.
struct RdscbImpl : torch::nn::Module {
  RdscbImpl(const BlockConfig& cfg, int64_t kernel);
  torch::Tensor forward(const torch::Tensor& f);
  torch::nn::ModuleList depthwise, pointwise;
  GnLr gnlr{nullptr};
  double slope;
};
TORCH_MODULE(Rdscb);

// Local interaction attention over channel-concatenated modalities:
// Att = alpha * MLP(Avg) + beta * MLP(Std); out = Conv_n(sigmoid(Att) * F'),
// mapping 2C -> C.
struct LiaImpl : torch::nn::Module {
  LiaImpl(const BlockConfig& cfg, int64_t kernel);
  torch::Tensor forward(const torch::Tensor& f1, const torch::Tensor& f2);
  torch::Tensor attention_logits(const torch::Tensor& fp);
  torch::nn::Linear avg_fc1{nullptr}, avg_fc2{nullptr}, std_fc1{nullptr}, std_fc2{nullptr};
  torch::nn::Conv2d conv{nullptr};
  torch::Tensor alpha, beta;
  double slope;
};
TORCH_MODULE(Lia);

}  // namespace ddf
