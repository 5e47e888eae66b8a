#pragma once

#include <torch/torch.h>

#include <string>

namespace ddf {

// Images are torch tensors of shape (C, H, W), C in {1, 3}, values in [0, 1].
// Batched variants (B, C, H, W) are accepted where noted.

struct YCbCrImage {
  torch::Tensor y;   // (1, H, W)
  torch::Tensor cb;  // (1, H, W)
  torch::Tensor cr;  // (1, H, W)
};

enum class StripeOrientation { kVertical, kHorizontal };

struct DegradationSpec {
  double gaussian_sigma = 25.0;   // 0-255 scale
  double stripe_intensity = 20.0; // 0-255 scale, uniform amplitude bound
  StripeOrientation stripe_orientation = StripeOrientation::kVertical;
  double lowlight_gamma = 1.0;
  int64_t seed = 0;
};

void check_image(const torch::Tensor& img, int64_t expect_channels = -1);

// BT.601 full-range transform. Cb/Cr centered at 0.5.
YCbCrImage rgb_to_ycbcr(const torch::Tensor& img);
torch::Tensor ycbcr_to_rgb(const YCbCrImage& ycc);

// i.i.d. zero-mean Gaussian noise, sigma on the 0-255 scale. Deterministic per seed.
torch::Tensor add_gaussian_noise(const torch::Tensor& img, double sigma, int64_t seed);

// One constant offset per column (vertical) or row (horizontal), offsets
// i.i.d. uniform in [-intensity, +intensity]/255.
torch::Tensor add_stripe_noise(const torch::Tensor& img, double intensity,
                               StripeOrientation orientation, int64_t seed);
// The offsets actually drawn for a given (shape, intensity, orientation, seed).
torch::Tensor stripe_offsets(int64_t count, double intensity, int64_t seed);

torch::Tensor darken(const torch::Tensor& img, double gamma);

// Deterministic stand-in for a learned low-light enhancer: gamma lift (1/2.2)
// followed by a non-darkening gray-world gain. mean(out) >= mean(in).
torch::Tensor reference_enhance(const torch::Tensor& img);

torch::Tensor apply_degradation(const torch::Tensor& img, const DegradationSpec& spec);

// 8-bit grayscale or RGB PNG. Load normalizes by 255; save quantizes
// round-half-up, so save/load/save is idempotent.
torch::Tensor load_png(const std::string& path);
void save_png(const torch::Tensor& img, const std::string& path);

// Y plane of an image: passthrough for 1-channel, BT.601 luma for 3-channel.
torch::Tensor luminance(const torch::Tensor& img);

}  // namespace ddf
