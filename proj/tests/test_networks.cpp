#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "testing.hpp"

#include "ddfusion/ddon.hpp"
#include "ddfusion/ilgfn.hpp"
#include "ddfusion/imaging.hpp"
#include "ddfusion/losses.hpp"

#include <set>

using namespace ddf;

namespace {

BlockConfig probe_config() {
  BlockConfig cfg;
  cfg.channels = 4;
  cfg.window = 4;
  cfg.heads = 2;
  cfg.mlp_ratio = 2;
  cfg.rdscb_repeat = 2;
  cfg.cbam_reduction = 4;
  cfg.gn_groups = 2;
  return cfg;
}

torch::Tensor image(int64_t seed, int64_t n = 16) {
  auto gen = at::detail::createCPUGenerator(seed);
  return torch::rand({1, 1, n, n}, gen, torch::kFloat64);
}

// The default init (tiny weights, zero biases) can leave CBAM's one-unit
// ReLU bottleneck dead, which is not a wiring defect. Gradient-flow audits run
// at a parameter point chosen to keep every ReLU active: modest random
// weights, positive biases (scalars like LIA's alpha/beta stay at 1).
void randomize(torch::nn::Module& m, int64_t seed) {
  auto gen = at::detail::createCPUGenerator(seed);
  torch::NoGradGuard g;
  for (auto& kv : m.named_parameters()) {
    auto& p = kv.value();
    if (p.dim() == 0) continue;
    if (kv.key().ends_with("bias"))
      p.fill_(1.0);
    else
      p.copy_(torch::randn(p.sizes(), gen, torch::kFloat64) * 0.1);
  }
}

}  // namespace

TEST_CASE("ddon: output shapes follow the channel count") {
  torch::manual_seed(20);
  Ddon ddon(probe_config());
  ddon->to(torch::kFloat64);
  auto [f_ir, f_vi] = ddon->forward(image(1), image(2));
  CHECK(f_ir.sizes() == torch::IntArrayRef({1, 4, 16, 16}));
  CHECK(f_vi.sizes() == torch::IntArrayRef({1, 4, 16, 16}));
  CHECK_THROWS_AS(ddon->forward(image(1), image(3, 24)), std::invalid_argument);
}

TEST_CASE("ddon: identical seeds give identical networks and outputs") {
  auto run = [] {
    torch::manual_seed(21);
    Ddon ddon(probe_config());
    ddon->to(torch::kFloat64);
    auto [f_ir, f_vi] = ddon->forward(image(4), image(5));
    return std::make_pair(f_ir, f_vi);
  };
  auto a = run(), b = run();
  CHECK(torch::equal(a.first, b.first));
  CHECK(torch::equal(a.second, b.second));
}

TEST_CASE("ddon: decomposition recomposes both modalities") {
  torch::manual_seed(22);
  Ddon ddon(probe_config());
  ddon->to(torch::kFloat64);
  auto ir = image(6), vi = image(7).clamp(1e-3, 1.0);
  auto comps = ddon->decompose(ir, vi);
  CHECK((comps[0] + comps[1] - ir).abs().max().item<double>() < 1e-8);
  CHECK((comps[2] * comps[3] - vi).abs().max().item<double>() < 1e-6);
}

TEST_CASE("ddon: forward matches member-by-member recomputation") {
  torch::manual_seed(23);
  Ddon ddon(probe_config());
  ddon->to(torch::kFloat64);
  auto ir = image(8), vi = image(9);
  auto [f_ir, f_vi] = ddon->forward(ir, vi);

  auto comps = ddon->decompose(ir, vi);
  auto f_low = ddon->embed_low(comps[0]);
  auto f_high = ddon->embed_high(comps[1]);
  auto f_r = ddon->embed_r(comps[2]);
  auto f_l = ddon->embed_l(comps[3]);
  auto en_low = ddon->gnlr_low(ddon->swin(f_low) + ddon->cbam_low(f_low));
  auto en_high = ddon->gnlr_high(ddon->msconv(f_high) + ddon->cbam_high(f_high));
  auto [p_r, p_l] = ddon->itb(f_r, f_l);
  auto en_r = ddon->gnlr_r(p_r + ddon->cbam_r(f_r));
  auto en_l = ddon->gnlr_l(p_l + ddon->cbam_l(f_l));

  CHECK(torch::equal(f_ir, en_low + en_high));
  CHECK(torch::equal(f_vi, en_r * en_l));
}

TEST_CASE("ddon: stripes land in the low band, gaussian noise in the high band") {
  torch::manual_seed(24);
  Ddon ddon(probe_config(), 0.25);
  ddon->to(torch::kFloat64);
  auto gen = at::detail::createCPUGenerator(42);
  auto base = torch::rand({1, 1, 64, 64}, gen, torch::kFloat64);
  base = gaussian_blur(base, 2.0);  // natural-ish smooth content
  auto vi = torch::full_like(base, 0.5);

  auto energy_shift = [&](const torch::Tensor& degraded) {
    auto c0 = ddon->decompose(base, vi);
    auto c1 = ddon->decompose(degraded, vi);
    return std::make_pair((c1[0] - c0[0]).pow(2).sum().item<double>(),
                          (c1[1] - c0[1]).pow(2).sum().item<double>());
  };

  auto striped = add_stripe_noise(base.squeeze(0), 40.0, StripeOrientation::kVertical, 7)
                     .unsqueeze(0);
  auto [s_low, s_high] = energy_shift(striped);
  CHECK(s_low > 2.0 * s_high);

  auto noisy = add_gaussian_noise(base.squeeze(0), 25.0, 8).unsqueeze(0);
  auto [g_low, g_high] = energy_shift(noisy);
  CHECK(g_high > 2.0 * g_low);
}

TEST_CASE("ddon: every parameter receives gradient from the stage-1 loss") {
  torch::manual_seed(25);
  Ddon ddon(probe_config());
  ddon->to(torch::kFloat64);
  randomize(*ddon, 90);
  auto ir = image(10), vi = image(11);
  auto ir_ref = image(12), vi_ref = image(13);
  auto [f_ir, f_vi] = ddon->forward(ir, vi);
  auto [ir_en, vi_en] = ddon->reconstruct(f_ir, f_vi);

  PerceptualExtractor per(17);
  per->to(torch::kFloat64);
  LossWeights w;
  auto breakdown = loss_do(ir_en, vi_en, ir_ref, vi_ref, w, per);
  breakdown.total.backward();

  for (const auto& kv : ddon->named_parameters()) {
    INFO("parameter: " << kv.key());
    REQUIRE(kv.value().grad().defined());
    CHECK(kv.value().grad().abs().max().item<double>() > 0.0);
  }
}

TEST_CASE("ddon: reconstruction heads stay inside (0, 1)") {
  torch::manual_seed(26);
  Ddon ddon(probe_config());
  ddon->to(torch::kFloat64);
  auto [f_ir, f_vi] = ddon->forward(image(14), image(15));
  auto [ir_en, vi_en] = ddon->reconstruct(f_ir * 50.0, f_vi * 50.0);
  for (const auto& t : {ir_en, vi_en}) {
    CHECK(t.min().item<double>() > 0.0);
    CHECK(t.max().item<double>() < 1.0);
  }
}

TEST_CASE("ddon: bypass embeds the raw images directly") {
  torch::manual_seed(27);
  Ddon ddon(probe_config(), kDefaultTau, /*bypass=*/true);
  ddon->to(torch::kFloat64);
  auto ir = image(16), vi = image(17);
  auto [f_ir, f_vi] = ddon->forward(ir, vi);
  CHECK(torch::equal(f_ir, ddon->embed_low(ir)));
  CHECK(torch::equal(f_vi, ddon->embed_high(vi)));
  CHECK(ddon->msconv.is_empty());
}

TEST_CASE("ilgfn: output shape and sensitivity to both modalities") {
  torch::manual_seed(28);
  Ilgfn ilgfn(probe_config());
  ilgfn->to(torch::kFloat64);
  auto gen = at::detail::createCPUGenerator(50);
  auto f_vi = torch::randn({1, 4, 16, 16}, gen, torch::kFloat64);
  auto f_ir = torch::randn({1, 4, 16, 16}, gen, torch::kFloat64);
  auto out = ilgfn->forward(f_vi, f_ir);
  CHECK(out.sizes() == f_vi.sizes());
  CHECK(!torch::equal(ilgfn->forward(f_vi + 0.1, f_ir), out));
  CHECK(!torch::equal(ilgfn->forward(f_vi, f_ir + 0.1), out));
  CHECK_THROWS_AS(ilgfn->forward(f_vi, f_ir.narrow(2, 0, 8)), std::invalid_argument);
}

TEST_CASE("ilgfn: forward matches member-by-member recomputation") {
  torch::manual_seed(29);
  Ilgfn ilgfn(probe_config());
  ilgfn->to(torch::kFloat64);
  auto gen = at::detail::createCPUGenerator(51);
  auto f_vi = torch::randn({1, 4, 16, 16}, gen, torch::kFloat64);
  auto f_ir = torch::randn({1, 4, 16, 16}, gen, torch::kFloat64);

  std::vector<torch::Tensor> local;
  for (size_t i = 0; i < 3; ++i) {
    auto v = ilgfn->rdscb_vi[i]->as<RdscbImpl>()->forward(f_vi);
    auto r = ilgfn->rdscb_ir[i]->as<RdscbImpl>()->forward(f_ir);
    local.push_back(ilgfn->rdscb_fu[i]->as<RdscbImpl>()->forward(
        ilgfn->lia[i]->as<LiaImpl>()->forward(v, r)));
  }
  auto f_local = ilgfn->conv_local(torch::cat(local, 1));
  auto [g_vi, g_ir] = ilgfn->itb_global(f_vi, f_ir);
  auto merged = ilgfn->lga_in(torch::cat({f_local, g_vi, g_ir}, 1));
  auto expect = ilgfn->lga_out(ilgfn->lga_swin2(ilgfn->lga_swin1(merged)));

  CHECK(torch::equal(ilgfn->forward(f_vi, f_ir), expect));
}

TEST_CASE("ilgfn: every parameter receives gradient from the stage-2 loss") {
  torch::manual_seed(30);
  Ilgfn ilgfn(probe_config());
  ilgfn->to(torch::kFloat64);
  randomize(*ilgfn, 91);
  auto gen = at::detail::createCPUGenerator(52);
  auto f_vi = torch::randn({1, 4, 16, 16}, gen, torch::kFloat64);
  auto f_ir = torch::randn({1, 4, 16, 16}, gen, torch::kFloat64);
  auto fu = ilgfn->reconstruct(ilgfn->forward(f_vi, f_ir));

  LossWeights w;
  auto breakdown = loss_fu(fu, image(18), image(19), w);
  breakdown.total.backward();

  for (const auto& kv : ilgfn->named_parameters()) {
    INFO("parameter: " << kv.key());
    REQUIRE(kv.value().grad().defined());
    CHECK(kv.value().grad().abs().max().item<double>() > 0.0);
  }
}

TEST_CASE("ddon and ilgfn own disjoint parameter storage") {
  torch::manual_seed(31);
  Ddon ddon(probe_config());
  Ilgfn ilgfn(probe_config());
  std::set<void*> seen;
  for (const auto& p : ddon->parameters()) CHECK(seen.insert(p.data_ptr()).second);
  for (const auto& p : ilgfn->parameters()) CHECK(seen.insert(p.data_ptr()).second);
}

TEST_CASE("ilgfn: reconstruction of zeroed head is exactly one half") {
  torch::manual_seed(32);
  Ilgfn ilgfn(probe_config());
  ilgfn->to(torch::kFloat64);
  {
    torch::NoGradGuard g;
    ilgfn->recon3->weight.zero_();
    ilgfn->recon3->bias.zero_();
  }
  auto gen = at::detail::createCPUGenerator(53);
  auto f = torch::randn({1, 4, 16, 16}, gen, torch::kFloat64);
  CHECK((ilgfn->reconstruct(f) - 0.5).abs().max().item<double>() == 0.0);
}

TEST_CASE("ilgfn: bypass reduces to concat + 1x1 conv") {
  torch::manual_seed(33);
  Ilgfn ilgfn(probe_config(), /*bypass=*/true);
  ilgfn->to(torch::kFloat64);
  auto gen = at::detail::createCPUGenerator(54);
  auto f_vi = torch::randn({1, 4, 16, 16}, gen, torch::kFloat64);
  auto f_ir = torch::randn({1, 4, 16, 16}, gen, torch::kFloat64);
  CHECK(torch::equal(ilgfn->forward(f_vi, f_ir),
                     ilgfn->bypass_fuse(torch::cat({f_vi, f_ir}, 1))));
  CHECK(ilgfn->itb_global.is_empty());
}

TEST_CASE("fuse_image: bounded RGB output with chroma passthrough") {
  torch::manual_seed(34);
  Ddon ddon(probe_config());
  Ilgfn ilgfn(probe_config());
  auto gen = at::detail::createCPUGenerator(55);
  auto ir = torch::rand({1, 24, 16}, gen, torch::kFloat64);
  // low saturation keeps the fused RGB in gamut, where the output clamp is
  // inactive and chroma passthrough is exact
  auto gray = torch::rand({1, 24, 16}, gen, torch::kFloat64) * 0.6 + 0.2;
  auto vi = (gray.expand({3, 24, 16}) +
             (torch::rand({3, 24, 16}, gen, torch::kFloat64) - 0.5) * 0.04).contiguous();

  auto out = fuse_image(ir, vi, ddon, ilgfn);
  CHECK(out.sizes() == torch::IntArrayRef({3, 24, 16}));
  CHECK(out.min().item<double>() >= 0.0);
  CHECK(out.max().item<double>() <= 1.0);
  auto ycc_in = rgb_to_ycbcr(vi);
  auto ycc_out = rgb_to_ycbcr(out);
  CHECK((ycc_out.cb - ycc_in.cb).abs().max().item<double>() < 1e-6);
  CHECK((ycc_out.cr - ycc_in.cr).abs().max().item<double>() < 1e-6);

  CHECK(torch::equal(fuse_image(ir, vi, ddon, ilgfn), out));  // deterministic
  CHECK_THROWS_AS(fuse_image(ir.narrow(1, 0, 16), vi, ddon, ilgfn), std::invalid_argument);
}
