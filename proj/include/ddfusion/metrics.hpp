#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

namespace ddf {
namespace metrics {

// All metrics consume single-channel (H, W) or (1, H, W) tensors with values
// in [0, 1] and run in double precision.
//
// Constants (the cited metric papers leave them implementation-defined):
//   Qabf  : Xydeas-Petrovic sigmoids  Gg=0.9994 kg=-15 sg=0.5,
//           Ga=0.9879 ka=-22 sa=0.8, edge-strength weights L=1
//   Qw    : Piella, 8x8 sliding windows (step 1), variance saliency
//   VIF   : pixel domain, 4 scales, 7x7 Gaussian window (sigma 7/6),
//           sigma_n^2 = 2 on the 0-255 scale; scales smaller than the
//           window are skipped

double ag(const torch::Tensor& img);
double sf(const torch::Tensor& img);
double ei(const torch::Tensor& img);
double qabf(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& f);
double qw(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& f);
double vif(const torch::Tensor& ref, const torch::Tensor& dist);
// two-reference convention: mean of vif(a, f) and vif(b, f)
double fusion_vif(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& f);

struct MetricRow {
  std::string id;
  double vif = 0, ag = 0, ei = 0, qabf = 0, sf = 0, qw = 0;
  bool ok = true;
  std::string error;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  MetricRow mean;  // id = "mean", over successful rows

  std::string to_csv() const;
  std::string to_table() const;
};

struct EvalTriple {
  std::string id;
  torch::Tensor ir, vi, fused;  // Y-plane images
};

MetricReport evaluate(const std::vector<EvalTriple>& triples);

}  // namespace metrics
}  // namespace ddf
