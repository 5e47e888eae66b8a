#include "ddfusion/decomposition.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ddf {

torch::Tensor reflect_index(int64_t n, int64_t pad) {
  std::vector<int64_t> idx(n + 2 * pad);
  for (int64_t i = 0; i < n + 2 * pad; ++i) {
    int64_t j = i - pad;
    if (n == 1) {
      j = 0;
    } else {
      while (j < 0 || j >= n) {
        if (j < 0) j = -j;
        if (j >= n) j = 2 * n - 2 - j;
      }
    }
    idx[i] = j;
  }
  return torch::tensor(idx, torch::kLong);
}

torch::Tensor dct_matrix(int64_t n, torch::TensorOptions options) {
  auto m = torch::empty({n, n}, torch::kFloat64);
  const double norm0 = std::sqrt(1.0 / n);
  const double norm = std::sqrt(2.0 / n);
  auto acc = m.accessor<double, 2>();
  for (int64_t k = 0; k < n; ++k)
    for (int64_t i = 0; i < n; ++i)
      acc[k][i] = (k == 0 ? norm0 : norm) * std::cos(M_PI * (2 * i + 1) * k / (2.0 * n));
  return m.to(options);
}

namespace {
torch::Tensor dct_matrix_for(const torch::Tensor& x, int64_t n) {
  return dct_matrix(n).to(x.options().requires_grad(false));
}
}  // namespace

torch::Tensor dct2(const torch::Tensor& plane) {
  const auto h = plane.size(-2), w = plane.size(-1);
  auto dh = dct_matrix_for(plane, h);
  auto dw = dct_matrix_for(plane, w);
  return torch::matmul(torch::matmul(dh, plane), dw.transpose(0, 1));
}

torch::Tensor idct2(const torch::Tensor& spec) {
  const auto h = spec.size(-2), w = spec.size(-1);
  auto dh = dct_matrix_for(spec, h);
  auto dw = dct_matrix_for(spec, w);
  return torch::matmul(torch::matmul(dh.transpose(0, 1), spec), dw);
}

torch::Tensor low_frequency_mask(int64_t h, int64_t w, double tau,
                                 torch::TensorOptions options) {
  auto u = torch::arange(h, torch::kFloat64).div(static_cast<double>(h)).view({h, 1});
  auto v = torch::arange(w, torch::kFloat64).div(static_cast<double>(w)).view({1, w});
  auto diag = (u + v) <= tau;
  auto bands = (u < tau / 4.0).logical_or(v < tau / 4.0);
  return diag.logical_or(bands).to(options);
}

FrequencyPair split_frequency(const torch::Tensor& spec, double tau) {
  if (tau < 0.0 || tau > 2.0) throw std::invalid_argument("tau must be in [0, 2]");
  auto mask = low_frequency_mask(spec.size(-2), spec.size(-1), tau,
                                 spec.options().requires_grad(false));
  return {spec * mask, spec * (1.0 - mask), tau};
}

torch::Tensor gaussian_blur(const torch::Tensor& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int64_t r = static_cast<int64_t>(std::ceil(3.0 * sigma));
  auto k = torch::arange(-r, r + 1, torch::kFloat64);
  k = torch::exp(-k * k / (2.0 * sigma * sigma));
  k /= k.sum();
  k = k.to(img.options().requires_grad(false));

  const auto h = img.size(-2), w = img.size(-1);
  auto shape = img.sizes().vec();
  auto x = img.reshape({-1, 1, h, w});
  x = x.index_select(2, reflect_index(h, r).to(img.device()));
  x = torch::conv2d(x, k.view({1, 1, 2 * r + 1, 1}));
  x = x.index_select(3, reflect_index(w, r).to(img.device()));
  x = torch::conv2d(x, k.view({1, 1, 1, 2 * r + 1}));
  return x.reshape(shape);
}

RetinexPair retinex_decompose(const torch::Tensor& img, double sigma, double floor) {
  auto illum = gaussian_blur(img, sigma).clamp(floor, 1.0);
  auto refl = img / illum;
  return {refl, illum};
}

}  // namespace ddf
