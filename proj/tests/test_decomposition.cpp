#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "testing.hpp"

#include "ddfusion/decomposition.hpp"
#include "ddfusion/imaging.hpp"

#include <cmath>

using namespace ddf;

namespace {
torch::Tensor rand_plane(int64_t seed, int64_t h = 16, int64_t w = 16) {
  auto gen = at::detail::createCPUGenerator(seed);
  return torch::rand({h, w}, gen, torch::kFloat64);
}

// direct double-sum oracle of the orthonormal DCT-II definition
torch::Tensor dct2_oracle(const torch::Tensor& x) {
  const int64_t h = x.size(0), w = x.size(1);
  auto out = torch::zeros({h, w}, torch::kFloat64);
  auto xin = x.accessor<double, 2>();
  auto acc = out.accessor<double, 2>();
  for (int64_t u = 0; u < h; ++u)
    for (int64_t v = 0; v < w; ++v) {
      double s = 0.0;
      for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j)
          s += xin[i][j] * std::cos(M_PI * (i + 0.5) * u / h) *
               std::cos(M_PI * (j + 0.5) * v / w);
      const double au = u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
      const double av = v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
      acc[u][v] = au * av * s;
    }
  return out;
}
}  // namespace

TEST_CASE("dct2 matches the direct double-sum oracle") {
  auto x = rand_plane(0, 8, 10);
  CHECK((dct2(x) - dct2_oracle(x)).abs().max().item<double>() < 1e-8);
}

TEST_CASE("dct2 of a constant is a lone DC coefficient c*N") {
  const double c = 0.7;
  const int64_t n = 12;
  auto spec = dct2(torch::full({n, n}, c, torch::kFloat64));
  CHECK(spec[0][0].item<double>() == doctest::Approx(c * n).epsilon(1e-10));
  spec[0][0] = 0.0;
  CHECK(spec.abs().max().item<double>() < 1e-8);
}

TEST_CASE("dct2 is linear") {
  auto x = rand_plane(1), y = rand_plane(2);
  auto lhs = dct2(2.5 * x - 0.75 * y);
  auto rhs = 2.5 * dct2(x) - 0.75 * dct2(y);
  CHECK((lhs - rhs).abs().max().item<double>() < 1e-8);
}

TEST_CASE("dct2 satisfies Parseval") {
  auto x = rand_plane(3, 24, 18);
  const double pixels = (x * x).sum().item<double>();
  auto s = dct2(x);
  const double coeffs = (s * s).sum().item<double>();
  CHECK(std::abs(coeffs - pixels) / pixels < 1e-6);
}

TEST_CASE("idct2 inverts dct2 under 1e-5 on 100 random planes") {
  for (int64_t seed = 0; seed < 100; ++seed) {
    auto x = rand_plane(seed, 64, 64);
    CHECK((idct2(dct2(x)) - x).abs().max().item<double>() < 1e-5);
  }
}

TEST_CASE("idct2 of zeros is zero; single coefficient gives the basis image") {
  CHECK(idct2(torch::zeros({8, 8}, torch::kFloat64)).abs().max().item<double>() == 0.0);
  const int64_t n = 8;
  auto spec = torch::zeros({n, n}, torch::kFloat64);
  spec[1][0] = 1.0;
  auto img = idct2(spec);
  for (int64_t i = 0; i < n; ++i) {
    const double expect = std::sqrt(2.0 / n) * std::sqrt(1.0 / n) *
                          std::cos(M_PI * (i + 0.5) * 1.0 / n);
    CHECK((img[i] - expect).abs().max().item<double>() < 1e-10);
  }
}

TEST_CASE("dct2 broadcasts over channel and batch dims") {
  auto x = rand_plane(4, 8, 8);
  auto batched = x.view({1, 1, 8, 8}).expand({2, 3, 8, 8}).contiguous();
  auto spec = dct2(batched);
  CHECK((spec[1][2] - dct2(x)).abs().max().item<double>() < 1e-12);
}

TEST_CASE("split_frequency: tau=0 keeps only DC in LOW") {
  auto spec = dct2(rand_plane(5));
  auto pair = split_frequency(spec, 0.0);
  auto low = pair.low.clone();
  CHECK(low[0][0].item<double>() == spec[0][0].item<double>());
  low[0][0] = 0.0;
  CHECK(low.abs().max().item<double>() == 0.0);
  // inverse of a lone DC coefficient is constant
  auto img = idct2(pair.low);
  CHECK((img - img.mean()).abs().max().item<double>() < 1e-10);
}

TEST_CASE("split_frequency: tau=2 sends everything to LOW") {
  auto spec = dct2(rand_plane(6));
  auto pair = split_frequency(spec, 2.0);
  CHECK(pair.high.abs().max().item<double>() == 0.0);
  CHECK(torch::equal(pair.low, spec));
}

TEST_CASE("split_frequency: exact partition and merge round trip") {
  auto x = rand_plane(7, 20, 28);
  auto spec = dct2(x);
  auto pair = split_frequency(spec, 0.25);
  CHECK(torch::equal(pair.low + pair.high, spec));  // one side is exactly 0 per coeff
  CHECK((idct2(pair.low + pair.high) - x).abs().max().item<double>() < 1e-5);
  CHECK((pair.low * pair.high).abs().max().item<double>() == 0.0);  // disjoint supports
}

TEST_CASE("low_frequency_mask: binary complement partition") {
  auto m = low_frequency_mask(16, 20, 0.25);
  auto complement = 1.0 - m;
  CHECK(((m == 0.0).logical_or(m == 1.0)).all().item<bool>());
  CHECK((m * complement).abs().max().item<double>() == 0.0);
  CHECK((m + complement - 1.0).abs().max().item<double>() == 0.0);
}

TEST_CASE("split_frequency: tau out of range throws") {
  auto spec = dct2(rand_plane(8));
  CHECK_THROWS_AS(split_frequency(spec, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(split_frequency(spec, 2.1), std::invalid_argument);
}

TEST_CASE("retinex: constant image gives L = c, R = 1") {
  const double c = 0.42;
  auto pair = retinex_decompose(torch::full({16, 16}, c, torch::kFloat64));
  CHECK((pair.illumination - c).abs().max().item<double>() < 1e-12);
  CHECK((pair.reflectance - 1.0).abs().max().item<double>() < 1e-10);
}

TEST_CASE("retinex: exact recomposition above the floor") {
  auto x = rand_plane(9) * 0.9 + 0.05;  // comfortably above eps_L
  auto pair = retinex_decompose(x);
  CHECK((pair.reflectance * pair.illumination - x).abs().max().item<double>() < 1e-6);
  CHECK(pair.illumination.min().item<double>() >= kRetinexFloor);
  CHECK(pair.illumination.max().item<double>() <= 1.0);
  CHECK(pair.reflectance.min().item<double>() >= 0.0);
}

TEST_CASE("retinex: reflectance is invariant to global scaling") {
  auto x = rand_plane(10) * 0.5 + 0.3;
  auto r1 = retinex_decompose(x).reflectance;
  auto r2 = retinex_decompose(0.5 * x).reflectance;
  CHECK((r1 - r2).abs().max().item<double>() < 1e-6);
}

TEST_CASE("gaussian blur: constant image unchanged, even with pad > dim") {
  auto x = torch::full({10, 10}, 0.3, torch::kFloat64);
  CHECK((gaussian_blur(x, 15.0) - 0.3).abs().max().item<double>() < 1e-10);
}

TEST_CASE("reflect_index: multi-bounce reflection is valid") {
  auto idx = reflect_index(4, 9);  // pad far beyond the length
  CHECK(idx.min().item<int64_t>() >= 0);
  CHECK(idx.max().item<int64_t>() <= 3);
  CHECK(idx.numel() == 4 + 2 * 9);
  // single-bounce region matches the usual reflect rule
  auto small = reflect_index(5, 2);
  auto expect = torch::tensor({2, 1, 0, 1, 2, 3, 4, 3, 2}, torch::kLong);
  CHECK(torch::equal(small, expect));
}

TEST_CASE("band separation: stripes load LOW, Gaussian loads HIGH (tau 0.25)") {
  // quantified version of the qualitative decomposition claim
  auto gen = at::detail::createCPUGenerator(77);
  auto base = gaussian_blur(torch::rand({64, 64}, gen, torch::kFloat64), 4.0);
  auto mask = low_frequency_mask(64, 64, 0.25);
  auto img = base.unsqueeze(0);

  auto band_energy = [&](const torch::Tensor& corrupted) {
    auto d = dct2(corrupted.squeeze(0)) - dct2(base);
    const double low = (d * d * mask).sum().item<double>();
    const double high = (d * d * (1.0 - mask)).sum().item<double>();
    return std::pair<double, double>(low, high);
  };

  auto striped = add_stripe_noise(img, 20.0, StripeOrientation::kVertical, 3);
  auto [slow, shigh] = band_energy(striped);
  CHECK(slow >= 2.0 * shigh);

  auto noisy = add_gaussian_noise(img, 20.0, 3);
  auto [glow, ghigh] = band_energy(noisy);
  CHECK(ghigh >= 2.0 * glow);
}
