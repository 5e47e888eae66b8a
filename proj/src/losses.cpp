#include "ddfusion/losses.hpp"

#include "ddfusion/decomposition.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ddf {

namespace {

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw std::invalid_argument("loss inputs must share shape");
}

// fold any of (H,W), (C,H,W), (B,C,H,W) into (N,1,H,W)
torch::Tensor as_batched_plane(const torch::Tensor& x) {
  return x.reshape({-1, 1, x.size(-2), x.size(-1)});
}

torch::Tensor reflect_pad_to_multiple(const torch::Tensor& x, int64_t m) {
  const auto h = x.size(-2), w = x.size(-1);
  const int64_t hp = (h + m - 1) / m * m, wp = (w + m - 1) / m * m;
  auto y = x;
  if (hp != h) y = y.index_select(-2, reflect_index(h, hp - h).narrow(0, hp - h, hp).to(x.device()));
  if (wp != w) y = y.index_select(-1, reflect_index(w, wp - w).narrow(0, wp - w, wp).to(x.device()));
  return y;
}

}  // namespace

void LossWeights::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || gamma1 < 0 || gamma2 < 0)
    throw std::invalid_argument("loss weights must be non-negative");
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
}

PerceptualExtractorImpl::PerceptualExtractorImpl(int64_t seed) {
  auto gen = at::detail::createCPUGenerator();
  gen.set_current_seed(static_cast<uint64_t>(seed));
  int64_t in = 1;
  int64_t idx = 0;
  for (int64_t out : {8, 16, 32, 64}) {
    const double std = std::sqrt(2.0 / (in * 9.0));
    auto w = torch::randn({out, in, 3, 3}, gen, torch::kFloat64) * std;
    auto b = torch::zeros({out}, torch::kFloat64);
    weights.push_back(register_buffer("w" + std::to_string(idx), w));
    biases.push_back(register_buffer("b" + std::to_string(idx), b));
    in = out;
    ++idx;
  }
}

std::vector<torch::Tensor> PerceptualExtractorImpl::forward(const torch::Tensor& img) {
  auto x = as_batched_plane(img);
  std::vector<torch::Tensor> feats;
  for (size_t i = 0; i < weights.size(); ++i) {
    auto w = weights[i].to(x.dtype());
    auto b = biases[i].to(x.dtype());
    x = torch::leaky_relu(torch::conv2d(x, w, b, /*stride=*/2, /*padding=*/1), 0.2);
    feats.push_back(x);
  }
  return feats;
}

torch::Tensor charbonnier_loss(const torch::Tensor& en, const torch::Tensor& ref, double eps) {
  check_same_shape(en, ref);
  return torch::sqrt((en - ref).pow(2) + eps).mean();
}

torch::Tensor illumination_loss(const torch::Tensor& en, const torch::Tensor& ref, double eps) {
  check_same_shape(en, ref);
  auto pool = [&](const torch::Tensor& x) {
    auto p = reflect_pad_to_multiple(as_batched_plane(x), 16);
    return torch::avg_pool2d(p, 16);
  };
  return torch::sqrt((pool(en) - pool(ref)).pow(2) + eps).mean();
}

torch::Tensor tv_loss(const torch::Tensor& x) {
  auto dv = x.narrow(-2, 1, x.size(-2) - 1) - x.narrow(-2, 0, x.size(-2) - 1);
  auto dh = x.narrow(-1, 1, x.size(-1) - 1) - x.narrow(-1, 0, x.size(-1) - 1);
  return (dv.pow(2).sum() + dh.pow(2).sum()) / static_cast<double>(x.numel());
}

torch::Tensor perceptual_loss(const torch::Tensor& en, const torch::Tensor& ref,
                              PerceptualExtractor& extractor) {
  check_same_shape(en, ref);
  auto fe = extractor->forward(en);
  auto fr = extractor->forward(ref);
  auto loss = torch::zeros({}, en.options());
  for (size_t i = 0; i < fe.size(); ++i) loss = loss + (fe[i] - fr[i]).pow(2).mean();
  return loss;
}

torch::Tensor intensity_loss(const torch::Tensor& fu, const torch::Tensor& ref_ir,
                             const torch::Tensor& ref_vi) {
  check_same_shape(fu, ref_ir);
  check_same_shape(fu, ref_vi);
  return (fu - ref_ir).abs().mean() + (fu - ref_vi).abs().mean();
}

torch::Tensor sobel_magnitude(const torch::Tensor& x) {
  auto opts = x.options().requires_grad(false);
  auto gx_k = torch::tensor({{-1., 0., 1.}, {-2., 0., 2.}, {-1., 0., 1.}}, torch::kFloat64)
                  .to(opts)
                  .view({1, 1, 3, 3});
  auto gy_k = gx_k.transpose(-2, -1);
  auto p = as_batched_plane(x);
  p = p.index_select(2, reflect_index(x.size(-2), 1).to(x.device()));
  p = p.index_select(3, reflect_index(x.size(-1), 1).to(x.device()));
  auto gx = torch::conv2d(p, gx_k);
  auto gy = torch::conv2d(p, gy_k);
  auto mag = torch::sqrt(gx * gx + gy * gy + 1e-12);
  auto shape = x.sizes().vec();
  return mag.reshape(shape);
}

torch::Tensor texture_loss(const torch::Tensor& fu, const torch::Tensor& ref_ir,
                           const torch::Tensor& ref_vi) {
  check_same_shape(fu, ref_ir);
  check_same_shape(fu, ref_vi);
  auto target = torch::maximum(sobel_magnitude(ref_ir), sobel_magnitude(ref_vi));
  return (sobel_magnitude(fu) - target).abs().mean();
}

LossBreakdown loss_do(const torch::Tensor& ir_en, const torch::Tensor& vi_en,
                      const torch::Tensor& ir_ref, const torch::Tensor& vi_ref,
                      const LossWeights& w, PerceptualExtractor& extractor) {
  w.validate();
  LossBreakdown out;
  auto l_ir = charbonnier_loss(ir_en, ir_ref, w.epsilon);
  auto l_vi = charbonnier_loss(vi_en, vi_ref, w.epsilon);
  auto total = l_ir + l_vi;
  out.terms["l_ir"] = l_ir.item<double>();
  out.terms["l_vi"] = l_vi.item<double>();
  out.terms["l_illu"] = 0.0;
  out.terms["l_tv"] = 0.0;
  out.terms["l_per"] = 0.0;
  if (w.use_ds) {
    auto l_illu = illumination_loss(vi_en, vi_ref, w.epsilon);
    auto l_tv = tv_loss(vi_en);
    if (w.tv_on_infrared) l_tv = l_tv + tv_loss(ir_en);
    auto l_per = perceptual_loss(ir_en, ir_ref, extractor);
    total = total + w.lambda1 * l_illu + w.lambda2 * l_tv + w.lambda3 * l_per;
    out.terms["l_illu"] = l_illu.item<double>();
    out.terms["l_tv"] = l_tv.item<double>();
    out.terms["l_per"] = l_per.item<double>();
  }
  out.total = total;
  out.recomposed = out.terms["l_ir"] + out.terms["l_vi"] + w.lambda1 * out.terms["l_illu"] +
                   w.lambda2 * out.terms["l_tv"] + w.lambda3 * out.terms["l_per"];
  if (!w.use_ds) out.recomposed = out.terms["l_ir"] + out.terms["l_vi"];
  return out;
}

LossBreakdown loss_fu(const torch::Tensor& fu_y, const torch::Tensor& ir_ref,
                      const torch::Tensor& vi_ref_y, const LossWeights& w) {
  w.validate();
  LossBreakdown out;
  auto l_int = intensity_loss(fu_y, ir_ref, vi_ref_y);
  auto total = w.gamma1 * l_int;
  out.terms["l_int"] = l_int.item<double>();
  out.terms["l_text"] = 0.0;
  if (w.use_text) {
    auto l_text = texture_loss(fu_y, ir_ref, vi_ref_y);
    total = total + w.gamma2 * l_text;
    out.terms["l_text"] = l_text.item<double>();
  }
  out.total = total;
  out.recomposed = w.gamma1 * out.terms["l_int"] +
                   (w.use_text ? w.gamma2 * out.terms["l_text"] : 0.0);
  return out;
}

double gradcheck(const std::function<torch::Tensor()>& f,
                 const std::vector<torch::Tensor>& params, double step,
                 int64_t coords_per_tensor, int64_t seed) {
  for (const auto& p : params) {
    p.requires_grad_(true);
    if (p.grad().defined()) p.mutable_grad().reset();
  }
  auto loss = f();
  if (!torch::isfinite(loss).all().item<bool>())
    throw std::runtime_error("gradcheck: non-finite loss");
  loss.backward();

  std::mt19937_64 rng(static_cast<uint64_t>(seed) * 0x9e3779b97f4a7c15ull + 1);
  double max_rel = 0.0;
  for (const auto& p : params) {
    auto grad = p.grad().defined() ? p.grad().reshape({-1}).clone()
                                   : torch::zeros({p.numel()}, p.options());
    auto flat = p.detach().view({-1});  // shares storage; params are contiguous
    const int64_t n = flat.numel();
    const int64_t samples = std::min<int64_t>(coords_per_tensor, n);
    for (int64_t s = 0; s < samples; ++s) {
      const int64_t idx = samples == n ? s : static_cast<int64_t>(rng() % n);
      const double orig = flat[idx].item<double>();
      double fp, fm;
      {
        torch::NoGradGuard g;
        flat[idx].fill_(orig + step);
        fp = f().item<double>();
        flat[idx].fill_(orig - step);
        fm = f().item<double>();
        flat[idx].fill_(orig);
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double analytic = grad[idx].item<double>();
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
      max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
    }
  }
  return max_rel;
}

}  // namespace ddf
