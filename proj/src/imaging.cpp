#include "ddfusion/imaging.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <stdexcept>

namespace ddf {

namespace {
constexpr double kYR = 0.299, kYG = 0.587, kYB = 0.114;
constexpr double kCbScale = 1.772;  // Cb = (B - Y) / 1.772 + 0.5
constexpr double kCrScale = 1.402;  // Cr = (R - Y) / 1.402 + 0.5

torch::Generator cpu_generator(int64_t seed) {
  auto gen = at::detail::createCPUGenerator();
  gen.set_current_seed(static_cast<uint64_t>(seed));
  return gen;
}
}  // namespace

void check_image(const torch::Tensor& img, int64_t expect_channels) {
  if (img.dim() != 3) throw std::invalid_argument("image must have shape (C, H, W)");
  const auto c = img.size(0);
  if (c != 1 && c != 3) throw std::invalid_argument("image must have 1 or 3 channels");
  if (expect_channels > 0 && c != expect_channels)
    throw std::invalid_argument("image has wrong channel count");
  if (img.size(1) < 8 || img.size(2) < 8)
    throw std::invalid_argument("image must be at least 8x8");
  if (!torch::isfinite(img).all().item<bool>())
    throw std::invalid_argument("image contains non-finite values");
}

YCbCrImage rgb_to_ycbcr(const torch::Tensor& img) {
  check_image(img, 3);
  auto r = img.narrow(0, 0, 1), g = img.narrow(0, 1, 1), b = img.narrow(0, 2, 1);
  auto y = kYR * r + kYG * g + kYB * b;
  auto cb = (b - y) / kCbScale + 0.5;
  auto cr = (r - y) / kCrScale + 0.5;
  return {y, cb, cr};
}

torch::Tensor ycbcr_to_rgb(const YCbCrImage& ycc) {
  if (ycc.y.sizes() != ycc.cb.sizes() || ycc.y.sizes() != ycc.cr.sizes())
    throw std::invalid_argument("YCbCr planes must share height/width");
  auto r = ycc.y + kCrScale * (ycc.cr - 0.5);
  auto b = ycc.y + kCbScale * (ycc.cb - 0.5);
  auto g = (ycc.y - kYR * r - kYB * b) / kYG;
  return torch::cat({r, g, b}, 0).clamp(0.0, 1.0);
}

torch::Tensor add_gaussian_noise(const torch::Tensor& img, double sigma, int64_t seed) {
  if (sigma < 0) throw std::invalid_argument("gaussian sigma must be non-negative");
  if (sigma == 0) return img.clone();
  auto gen = cpu_generator(seed);
  auto noise = torch::randn(img.sizes(), gen, img.options()) * (sigma / 255.0);
  return (img + noise).clamp(0.0, 1.0);
}

torch::Tensor stripe_offsets(int64_t count, double intensity, int64_t seed) {
  auto gen = cpu_generator(seed);
  auto u = torch::rand({count}, gen, torch::kFloat64);
  return (u * 2.0 - 1.0) * (intensity / 255.0);
}

torch::Tensor add_stripe_noise(const torch::Tensor& img, double intensity,
                               StripeOrientation orientation, int64_t seed) {
  if (intensity < 0) throw std::invalid_argument("stripe intensity must be non-negative");
  if (intensity == 0) return img.clone();
  const auto h = img.size(-2), w = img.size(-1);
  const bool vertical = orientation == StripeOrientation::kVertical;
  auto offs = stripe_offsets(vertical ? w : h, intensity, seed).to(img.dtype());
  auto line = vertical ? offs.view({1, w}) : offs.view({h, 1});
  return (img + line).clamp(0.0, 1.0);
}

torch::Tensor darken(const torch::Tensor& img, double gamma) {
  if (gamma < 1.0) throw std::invalid_argument("darken gamma must be >= 1");
  return img.pow(gamma);
}

torch::Tensor reference_enhance(const torch::Tensor& img) {
  check_image(img);
  auto lifted = img.pow(1.0 / 2.2);
  auto means = lifted.mean({1, 2});                 // per channel
  auto gray = means.mean();
  // gains bounded to [1, 2]: never darkens below the gamma lift, which keeps
  // mean(out) >= mean(in) and leaves all-black a fixed point
  auto gains = (gray / means.clamp_min(1e-12)).clamp(1.0, 2.0);
  return (lifted * gains.view({-1, 1, 1})).clamp(0.0, 1.0);
}

torch::Tensor apply_degradation(const torch::Tensor& img, const DegradationSpec& spec) {
  auto out = add_gaussian_noise(img, spec.gaussian_sigma, spec.seed);
  out = add_stripe_noise(out, spec.stripe_intensity, spec.stripe_orientation, spec.seed + 1);
  if (spec.lowlight_gamma > 1.0) out = darken(out, spec.lowlight_gamma);
  return out;
}

torch::Tensor load_png(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw std::runtime_error("cannot read PNG: " + path);
  if (m.depth() != CV_8U)
    throw std::runtime_error("unsupported bit depth (want 8-bit): " + path);
  if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2BGR);
  if (m.channels() == 3) cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  if (m.channels() != 1 && m.channels() != 3)
    throw std::runtime_error("unsupported channel count: " + path);
  auto t = torch::from_blob(m.data, {m.rows, m.cols, m.channels()}, torch::kUInt8)
               .permute({2, 0, 1})
               .to(torch::kFloat64)
               .div(255.0)
               .clone();
  return t;
}

void save_png(const torch::Tensor& img, const std::string& path) {
  check_image(img);
  // round-half-up quantization keeps golden files bit-stable
  auto q = torch::floor(img * 255.0 + 0.5).clamp(0, 255).to(torch::kUInt8);
  auto hwc = q.permute({1, 2, 0}).contiguous();
  cv::Mat m(static_cast<int>(img.size(1)), static_cast<int>(img.size(2)),
            img.size(0) == 1 ? CV_8UC1 : CV_8UC3, hwc.data_ptr<uint8_t>());
  cv::Mat out = m.clone();
  if (img.size(0) == 3) cv::cvtColor(out, out, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path, out)) throw std::runtime_error("cannot write PNG: " + path);
}

torch::Tensor luminance(const torch::Tensor& img) {
  check_image(img);
  if (img.size(0) == 1) return img;
  return rgb_to_ycbcr(img).y;
}

}  // namespace ddf
