#pragma once

#include <torch/torch.h>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ddf {

struct LossWeights {
  double lambda1 = 1.0;   // illumination
  double lambda2 = 100.0; // total variation
  double lambda3 = 1.0;   // perceptual
  double gamma1 = 1.0;    // intensity
  double gamma2 = 5.0;    // texture
  double epsilon = 1e-6;
  bool use_ds = true;     // ablation: degradation suppression terms
  bool use_text = true;   // ablation: texture term
  bool tv_on_infrared = false;

  void validate() const;
};

// Fixed, seeded, non-trainable 4-stage conv pyramid standing in for a
// pretrained feature extractor. Deterministic for a given seed.
struct PerceptualExtractorImpl : torch::nn::Module {
  explicit PerceptualExtractorImpl(int64_t seed = 17);
  std::vector<torch::Tensor> forward(const torch::Tensor& img);
  std::vector<torch::Tensor> weights, biases;  // frozen buffers
};
TORCH_MODULE(PerceptualExtractor);

// mean over pixels of sqrt(diff^2 + eps)
torch::Tensor charbonnier_loss(const torch::Tensor& en, const torch::Tensor& ref, double eps);

// Charbonnier distance between 16x16 average-pooled maps (reflect-padded to a
// multiple of 16 when needed)
torch::Tensor illumination_loss(const torch::Tensor& en, const torch::Tensor& ref, double eps);

// (1/HW) * sum of squared forward differences, both directions
torch::Tensor tv_loss(const torch::Tensor& x);

// sum over pyramid stages of mean squared feature differences
torch::Tensor perceptual_loss(const torch::Tensor& en, const torch::Tensor& ref,
                              PerceptualExtractor& extractor);

// (1/HW) * (sum|fu - ref_ir| + sum|fu - ref_vi|)
torch::Tensor intensity_loss(const torch::Tensor& fu, const torch::Tensor& ref_ir,
                             const torch::Tensor& ref_vi);

// Sobel magnitude with reflect padding; smooth sqrt(gx^2 + gy^2 + 1e-12)
torch::Tensor sobel_magnitude(const torch::Tensor& x);

// (1/HW) * sum | |grad fu| - max(|grad ref_ir|, |grad ref_vi|) |
torch::Tensor texture_loss(const torch::Tensor& fu, const torch::Tensor& ref_ir,
                           const torch::Tensor& ref_vi);

struct LossBreakdown {
  torch::Tensor total;                   // differentiable
  std::map<std::string, double> terms;   // unweighted term values
  double recomposed = 0.0;               // sum of weight * term, in double
};

LossBreakdown loss_do(const torch::Tensor& ir_en, const torch::Tensor& vi_en,
                      const torch::Tensor& ir_ref, const torch::Tensor& vi_ref,
                      const LossWeights& w, PerceptualExtractor& extractor);

LossBreakdown loss_fu(const torch::Tensor& fu_y, const torch::Tensor& ir_ref,
                      const torch::Tensor& vi_ref_y, const LossWeights& w);

// Central finite-difference check of the analytic gradient of f with respect
// to `params`. Returns the max relative error over up to `coords_per_tensor`
// sampled coordinates per tensor. Double precision inputs expected.
double gradcheck(const std::function<torch::Tensor()>& f,
                 const std::vector<torch::Tensor>& params, double step = 1e-4,
                 int64_t coords_per_tensor = 24, int64_t seed = 0);

}  // namespace ddf
