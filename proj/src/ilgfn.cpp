#include "ddfusion/ilgfn.hpp"

#include <stdexcept>

namespace ddf {

namespace {
torch::nn::Conv2d make_conv(int64_t in, int64_t out, int64_t kernel) {
  auto opts = torch::nn::Conv2dOptions(in, out, kernel).padding(kernel / 2);
  if (kernel > 1) opts = opts.padding_mode(torch::kReflect);
  auto conv = torch::nn::Conv2d(opts);
  trunc_normal_(conv->weight);
  torch::NoGradGuard g;
  conv->bias.zero_();
  return conv;
}
constexpr int64_t kLocalKernels[] = {3, 5, 7};
}  // namespace

IlgfnImpl::IlgfnImpl(const BlockConfig& cfg, bool bypass)
    : slope(cfg.leaky_slope), bypass(bypass) {
  cfg.validate();
  const auto c = cfg.channels;
  if (!bypass) {
    rdscb_vi = register_module("rdscb_vi", torch::nn::ModuleList());
    rdscb_ir = register_module("rdscb_ir", torch::nn::ModuleList());
    lia = register_module("lia", torch::nn::ModuleList());
    rdscb_fu = register_module("rdscb_fu", torch::nn::ModuleList());
    for (int64_t k : kLocalKernels) {
      rdscb_vi->push_back(Rdscb(cfg, k));
      rdscb_ir->push_back(Rdscb(cfg, k));
      lia->push_back(Lia(cfg, k));
      rdscb_fu->push_back(Rdscb(cfg, k));
    }
    conv_local = register_module("conv_local", make_conv(3 * c, c, 1));
    itb_global = register_module("itb_global", Itb(cfg));
    lga_in = register_module("lga_in", make_conv(3 * c, c, 1));
    lga_swin1 = register_module("lga_swin1", SwinBlock(cfg));
    lga_swin2 = register_module("lga_swin2", SwinBlock(cfg));
    lga_out = register_module("lga_out", make_conv(c, c, 3));
  } else {
    bypass_fuse = register_module("bypass_fuse", make_conv(2 * c, c, 1));
  }
  recon1 = register_module("recon1", make_conv(c, c, 3));
  recon2 = register_module("recon2", make_conv(c, c / 2, 3));
  recon3 = register_module("recon3", make_conv(c / 2, 1, 3));
}

torch::Tensor IlgfnImpl::forward(const torch::Tensor& f_vi, const torch::Tensor& f_ir) {
  if (f_vi.sizes() != f_ir.sizes())
    throw std::invalid_argument("ILGFN inputs must match in shape");
  if (bypass) return bypass_fuse(torch::cat({f_vi, f_ir}, 1));

  std::vector<torch::Tensor> local;
  for (size_t i = 0; i < 3; ++i) {
    auto v = rdscb_vi[i]->as<RdscbImpl>()->forward(f_vi);
    auto r = rdscb_ir[i]->as<RdscbImpl>()->forward(f_ir);
    auto fused = lia[i]->as<LiaImpl>()->forward(v, r);
    local.push_back(rdscb_fu[i]->as<RdscbImpl>()->forward(fused));
  }
  auto f_local = conv_local(torch::cat(local, 1));
  auto [g_vi, g_ir] = itb_global(f_vi, f_ir);
  auto merged = lga_in(torch::cat({f_local, g_vi, g_ir}, 1));
  return lga_out(lga_swin2(lga_swin1(merged)));
}

torch::Tensor IlgfnImpl::reconstruct(const torch::Tensor& f_fu) {
  auto x = torch::leaky_relu(recon1(f_fu), slope);
  x = torch::leaky_relu(recon2(x), slope);
  return torch::sigmoid(recon3(x));
}

torch::Tensor fuse_image(const torch::Tensor& ir, const torch::Tensor& vi_rgb,
                         Ddon& ddon, Ilgfn& ilgfn) {
  check_image(ir, 1);
  check_image(vi_rgb, 3);
  if (ir.size(1) != vi_rgb.size(1) || ir.size(2) != vi_rgb.size(2))
    throw std::invalid_argument("infrared and visible images must be aligned");
  auto ycc = rgb_to_ycbcr(vi_rgb);
  const auto dtype = ddon->head_ir->weight.dtype();
  torch::NoGradGuard no_grad;
  auto ir_in = ir.unsqueeze(0).to(dtype);
  auto vi_in = ycc.y.unsqueeze(0).to(dtype);
  auto [f_ir, f_vi] = ddon->forward(ir_in, vi_in);
  auto fused_y = ilgfn->reconstruct(ilgfn->forward(f_vi, f_ir));
  auto y = fused_y.squeeze(0).to(torch::kFloat64);
  return ycbcr_to_rgb({y, ycc.cb, ycc.cr});
}

}  // namespace ddf
