#include "ddfusion/ddon.hpp"

#include <stdexcept>

namespace ddf {

namespace {
torch::nn::Conv2d conv3x3(int64_t in, int64_t out) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in, out, 3).padding(1).padding_mode(torch::kReflect));
}
}  // namespace

DdonImpl::DdonImpl(const BlockConfig& cfg, double tau, bool bypass)
    : tau(tau), bypass(bypass) {
  cfg.validate();
  const auto c = cfg.channels;
  embed_low = register_module("embed_low", conv3x3(1, c));
  embed_high = register_module("embed_high", conv3x3(1, c));
  head_ir = register_module("head_ir", conv3x3(c, 1));
  head_vi = register_module("head_vi", conv3x3(c, 1));
  if (!bypass) {
    embed_r = register_module("embed_r", conv3x3(1, c));
    embed_l = register_module("embed_l", conv3x3(1, c));
    msconv = register_module("msconv", MsConv(cfg));
    swin = register_module("swin", SwinBlock(cfg));
    itb = register_module("itb", Itb(cfg));
    cbam_low = register_module("cbam_low", Cbam(cfg));
    cbam_high = register_module("cbam_high", Cbam(cfg));
    cbam_r = register_module("cbam_r", Cbam(cfg));
    cbam_l = register_module("cbam_l", Cbam(cfg));
    gnlr_low = register_module("gnlr_low", GnLr(cfg));
    gnlr_high = register_module("gnlr_high", GnLr(cfg));
    gnlr_r = register_module("gnlr_r", GnLr(cfg));
    gnlr_l = register_module("gnlr_l", GnLr(cfg));
  }
  for (auto conv : {embed_low, embed_high, embed_r, embed_l, head_ir, head_vi}) {
    if (conv.is_empty()) continue;
    trunc_normal_(conv->weight);
    torch::NoGradGuard g;
    conv->bias.zero_();
  }
}

std::array<torch::Tensor, 4> DdonImpl::decompose(const torch::Tensor& ir,
                                                 const torch::Tensor& vi) const {
  auto bands = split_frequency(dct2(ir), tau);
  auto retinex = retinex_decompose(vi);
  return {idct2(bands.low), idct2(bands.high), retinex.reflectance, retinex.illumination};
}

std::pair<torch::Tensor, torch::Tensor> DdonImpl::forward(const torch::Tensor& ir,
                                                          const torch::Tensor& vi) {
  if (ir.sizes() != vi.sizes())
    throw std::invalid_argument("DDON inputs must share spatial size");
  if (bypass) {
    // w/o DDON ablation: raw images embedded directly
    return {embed_low(ir), embed_high(vi)};
  }
  auto [low, high, refl, illum] = decompose(ir, vi);
  auto f_low = embed_low(low);
  auto f_high = embed_high(high);
  auto f_r = embed_r(refl);
  auto f_l = embed_l(illum);

  auto p_high = msconv(f_high);
  auto p_low = swin(f_low);
  auto [p_r, p_l] = itb(f_r, f_l);

  auto en_low = gnlr_low(p_low + cbam_low(f_low));
  auto en_high = gnlr_high(p_high + cbam_high(f_high));
  auto en_r = gnlr_r(p_r + cbam_r(f_r));
  auto en_l = gnlr_l(p_l + cbam_l(f_l));

  // IDCT(DCT(a) + DCT(b)) = a + b, so the band recomposition is a plain sum
  auto f_ir = en_low + en_high;
  auto f_vi = en_r * en_l;
  return {f_ir, f_vi};
}

std::pair<torch::Tensor, torch::Tensor> DdonImpl::reconstruct(const torch::Tensor& f_ir,
                                                              const torch::Tensor& f_vi) {
  return {torch::sigmoid(head_ir(f_ir)), torch::sigmoid(head_vi(f_vi))};
}

}  // namespace ddf
