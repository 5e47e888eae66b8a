#pragma once

#include <torch/torch.h>

namespace ddf {

// Both decompositions operate on the trailing two dims, so (H, W), (C, H, W)
// and (B, C, H, W) inputs all work; everything here is differentiable.

struct FrequencyPair {
  torch::Tensor low;
  torch::Tensor high;
  double tau = 0.25;
};

struct RetinexPair {
  torch::Tensor reflectance;  // >= 0, unclamped
  torch::Tensor illumination; // in [eps_floor, 1]
};

constexpr double kDefaultTau = 0.25;
constexpr double kRetinexSigma = 15.0;
constexpr double kRetinexFloor = 1e-4;

// Orthonormal type-II DCT basis, (n, n).
torch::Tensor dct_matrix(int64_t n, torch::TensorOptions options = torch::kFloat64);

torch::Tensor dct2(const torch::Tensor& plane);
torch::Tensor idct2(const torch::Tensor& spec);

// Binary LOW mask: (u/H + v/W <= tau) plus two narrow axis bands
// (u/H < tau/4 or v/W < tau/4) so that stripe energy, which lives on the
// u=0 / v=0 lines of the spectrum, lands in the LOW band. Both clauses are
// empty at tau=0, leaving only the DC coefficient.
torch::Tensor low_frequency_mask(int64_t h, int64_t w, double tau,
                                 torch::TensorOptions options = torch::kFloat64);

FrequencyPair split_frequency(const torch::Tensor& spec, double tau);

// Gaussian blur with reflect padding; pad may exceed the image size
// (multi-bounce reflection).
torch::Tensor gaussian_blur(const torch::Tensor& img, double sigma);

// Single-scale Retinex: L = clamp(blur(img, sigma), floor, 1), R = img / L.
RetinexPair retinex_decompose(const torch::Tensor& img,
                              double sigma = kRetinexSigma,
                              double floor = kRetinexFloor);

// Reflect-padding index row for length n extended by pad on both sides.
torch::Tensor reflect_index(int64_t n, int64_t pad);

}  // namespace ddf
