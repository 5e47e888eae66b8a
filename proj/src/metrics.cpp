#include "ddfusion/metrics.hpp"

#include "ddfusion/decomposition.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ddf {
namespace metrics {

namespace {

torch::Tensor plane(const torch::Tensor& img) {
  auto x = img;
  if (x.dim() == 3) {
    if (x.size(0) != 1) throw std::invalid_argument("metric input must be single-channel");
    x = x.squeeze(0);
  }
  if (x.dim() != 2) throw std::invalid_argument("metric input must be (H, W) or (1, H, W)");
  return x.to(torch::kFloat64);
}

// Sobel with reflect padding; plain (non-smoothed) magnitude.
std::pair<torch::Tensor, torch::Tensor> sobel_xy(const torch::Tensor& x) {
  auto gx_k = torch::tensor({{-1., 0., 1.}, {-2., 0., 2.}, {-1., 0., 1.}}, torch::kFloat64)
                  .view({1, 1, 3, 3});
  auto gy_k = gx_k.transpose(-2, -1);
  auto p = x.view({1, 1, x.size(0), x.size(1)});
  p = p.index_select(2, reflect_index(x.size(0), 1));
  p = p.index_select(3, reflect_index(x.size(1), 1));
  return {torch::conv2d(p, gx_k).view({x.size(0), x.size(1)}),
          torch::conv2d(p, gy_k).view({x.size(0), x.size(1)})};
}

constexpr double kQabfGammaG = 0.9994, kQabfKappaG = -15.0, kQabfSigmaG = 0.5;
constexpr double kQabfGammaA = 0.9879, kQabfKappaA = -22.0, kQabfSigmaA = 0.8;
constexpr int64_t kQwWindow = 8;
constexpr int64_t kVifScales = 4;
constexpr int64_t kVifWindow = 7;
constexpr double kVifSigmaN2 = 2.0;  // noise variance, 0-255 scale

// per-pixel edge preservation Q^{XF} for a source X against fused F
torch::Tensor edge_preservation(const torch::Tensor& gX, const torch::Tensor& aX,
                                const torch::Tensor& gF, const torch::Tensor& aF) {
  auto mx = torch::maximum(gX, gF);
  auto mn = torch::minimum(gX, gF);
  auto strength = torch::where(mx > 0, mn / mx.clamp_min(1e-300), torch::zeros_like(mx));
  const double half_pi = M_PI / 2.0;
  auto fold = [&](const torch::Tensor& a) {
    return torch::remainder(a + half_pi, M_PI) - half_pi;
  };
  auto angle = 1.0 - (fold(aX) - fold(aF)).abs() / half_pi;
  auto qg = kQabfGammaG / (1.0 + torch::exp(kQabfKappaG * (strength - kQabfSigmaG)));
  auto qa = kQabfGammaA / (1.0 + torch::exp(kQabfKappaA * (angle - kQabfSigmaA)));
  return qg * qa;
}

struct WindowStats {
  torch::Tensor mean, var;  // (N,)
};

torch::Tensor unfold_windows(const torch::Tensor& x) {
  return x.unfold(0, kQwWindow, 1).unfold(1, kQwWindow, 1).reshape({-1, kQwWindow * kQwWindow});
}

WindowStats window_stats(const torch::Tensor& w) {
  auto mean = w.mean(1);
  auto var = (w * w).mean(1) - mean * mean;
  return {mean, var.clamp_min(0.0)};
}

// universal quality index per window; 1 for identical constant windows
torch::Tensor uqi_windows(const torch::Tensor& wx, const torch::Tensor& wy) {
  auto sx = window_stats(wx), sy = window_stats(wy);
  auto cov = (wx * wy).mean(1) - sx.mean * sy.mean;
  const double eps = 1e-12;
  auto num = 4.0 * cov * sx.mean * sy.mean + eps;
  auto den = (sx.var + sy.var) * (sx.mean * sx.mean + sy.mean * sy.mean) + eps;
  return num / den;
}

torch::Tensor gaussian_window(int64_t n, double sigma) {
  auto k = torch::arange(n, torch::kFloat64) - (n - 1) / 2.0;
  auto g = torch::exp(-k * k / (2.0 * sigma * sigma));
  auto w = torch::outer(g, g);
  return w / w.sum();
}

torch::Tensor filter_valid(const torch::Tensor& x, const torch::Tensor& win) {
  auto p = x.view({1, 1, x.size(0), x.size(1)});
  auto y = torch::conv2d(p, win.view({1, 1, win.size(0), win.size(1)}));
  return y.view({y.size(2), y.size(3)});
}

torch::Tensor downsample2(const torch::Tensor& x) {
  using torch::indexing::Slice;
  return x.index({Slice(0, torch::indexing::None, 2), Slice(0, torch::indexing::None, 2)});
}

}  // namespace

double ag(const torch::Tensor& img) {
  auto x = plane(img);
  const auto h = x.size(0), w = x.size(1);
  auto core = x.narrow(0, 0, h - 1).narrow(1, 0, w - 1);
  auto dx = x.narrow(0, 0, h - 1).narrow(1, 1, w - 1) - core;
  auto dy = x.narrow(0, 1, h - 1).narrow(1, 0, w - 1) - core;
  return torch::sqrt((dx * dx + dy * dy) / 2.0).mean().item<double>();
}

double sf(const torch::Tensor& img) {
  auto x = plane(img);
  auto dr = x.narrow(1, 1, x.size(1) - 1) - x.narrow(1, 0, x.size(1) - 1);
  auto dc = x.narrow(0, 1, x.size(0) - 1) - x.narrow(0, 0, x.size(0) - 1);
  const double rf2 = (dr * dr).mean().item<double>();
  const double cf2 = (dc * dc).mean().item<double>();
  return std::sqrt(rf2 + cf2);
}

double ei(const torch::Tensor& img) {
  auto x = plane(img);
  auto [gx, gy] = sobel_xy(x);
  return torch::sqrt(gx * gx + gy * gy).mean().item<double>();
}

double qabf(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& f) {
  auto xa = plane(a), xb = plane(b), xf = plane(f);
  auto [gxa, gya] = sobel_xy(xa);
  auto [gxb, gyb] = sobel_xy(xb);
  auto [gxf, gyf] = sobel_xy(xf);
  auto ga = torch::sqrt(gxa * gxa + gya * gya);
  auto gb = torch::sqrt(gxb * gxb + gyb * gyb);
  auto gf = torch::sqrt(gxf * gxf + gyf * gyf);
  auto aa = torch::atan2(gya, gxa);
  auto ab = torch::atan2(gyb, gxb);
  auto af = torch::atan2(gyf, gxf);
  auto q_af = edge_preservation(ga, aa, gf, af);
  auto q_bf = edge_preservation(gb, ab, gf, af);
  const double den = (ga + gb).sum().item<double>();
  if (den == 0.0) return 0.0;  // all edge strengths zero, by convention
  return ((q_af * ga + q_bf * gb).sum() / den).item<double>();
}

double qw(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& f) {
  auto xa = plane(a), xb = plane(b), xf = plane(f);
  if (xa.size(0) < kQwWindow || xa.size(1) < kQwWindow)
    throw std::invalid_argument("qw needs at least an 8x8 image");
  auto wa = unfold_windows(xa), wb = unfold_windows(xb), wf = unfold_windows(xf);
  auto q_af = uqi_windows(wa, wf);
  auto q_bf = uqi_windows(wb, wf);
  auto va = window_stats(wa).var, vb = window_stats(wb).var;
  auto sum_v = va + vb;
  auto lam = torch::where(sum_v > 0, va / sum_v.clamp_min(1e-300),
                          torch::full_like(va, 0.5));
  auto local = lam * q_af + (1.0 - lam) * q_bf;
  auto c = torch::maximum(va, vb);
  const double c_sum = c.sum().item<double>();
  if (c_sum == 0.0) return local.mean().item<double>();
  return ((c * local).sum() / c_sum).item<double>();
}

double vif(const torch::Tensor& ref_img, const torch::Tensor& dist_img) {
  auto ref = plane(ref_img) * 255.0;
  auto dist = plane(dist_img) * 255.0;
  if (ref.sizes() != dist.sizes()) throw std::invalid_argument("vif inputs must be aligned");
  auto win = gaussian_window(kVifWindow, kVifWindow / 6.0);
  double num = 0.0, den = 0.0;
  for (int64_t scale = 1; scale <= kVifScales; ++scale) {
    if (scale > 1) {
      if (std::min(ref.size(0), ref.size(1)) < kVifWindow) break;
      ref = downsample2(filter_valid(ref, win));
      dist = downsample2(filter_valid(dist, win));
    }
    if (std::min(ref.size(0), ref.size(1)) < kVifWindow) break;
    auto mu1 = filter_valid(ref, win);
    auto mu2 = filter_valid(dist, win);
    auto s1 = (filter_valid(ref * ref, win) - mu1 * mu1).clamp_min(0.0);
    auto s2 = (filter_valid(dist * dist, win) - mu2 * mu2).clamp_min(0.0);
    auto s12 = filter_valid(ref * dist, win) - mu1 * mu2;

    auto g = s12 / (s1 + 1e-10);
    auto sv = s2 - g * s12;
    auto small1 = s1 < 1e-10;
    g = torch::where(small1, torch::zeros_like(g), g);
    sv = torch::where(small1, s2, sv);
    s1 = torch::where(small1, torch::zeros_like(s1), s1);
    auto small2 = s2 < 1e-10;
    g = torch::where(small2, torch::zeros_like(g), g);
    sv = torch::where(small2, torch::zeros_like(sv), sv);
    auto neg = g < 0;
    sv = torch::where(neg, s2, sv);
    g = torch::where(neg, torch::zeros_like(g), g);
    sv = sv.clamp_min(1e-10);

    num += torch::log10(1.0 + g * g * s1 / (sv + kVifSigmaN2)).sum().item<double>();
    den += torch::log10(1.0 + s1 / kVifSigmaN2).sum().item<double>();
  }
  if (den == 0.0)
    return torch::equal(plane(ref_img), plane(dist_img)) ? 1.0 : 0.0;
  return num / den;
}

double fusion_vif(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& f) {
  return 0.5 * (vif(a, f) + vif(b, f));
}

MetricReport evaluate(const std::vector<EvalTriple>& triples) {
  MetricReport report;
  for (const auto& t : triples) {
    MetricRow row;
    row.id = t.id;
    try {
      row.vif = fusion_vif(t.ir, t.vi, t.fused);
      row.ag = ag(t.fused);
      row.ei = ei(t.fused);
      row.qabf = qabf(t.ir, t.vi, t.fused);
      row.sf = sf(t.fused);
      row.qw = qw(t.ir, t.vi, t.fused);
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    report.rows.push_back(row);
  }
  MetricRow mean;
  mean.id = "mean";
  int64_t n = 0;
  for (const auto& r : report.rows) {
    if (!r.ok) continue;
    mean.vif += r.vif;
    mean.ag += r.ag;
    mean.ei += r.ei;
    mean.qabf += r.qabf;
    mean.sf += r.sf;
    mean.qw += r.qw;
    ++n;
  }
  if (n > 0) {
    mean.vif /= n; mean.ag /= n; mean.ei /= n;
    mean.qabf /= n; mean.sf /= n; mean.qw /= n;
  }
  report.mean = mean;
  return report;
}

namespace {
std::string format_row(const MetricRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", r.id.c_str(),
                r.vif, r.ag, r.ei, r.qabf, r.sf, r.qw);
  return buf;
}
}  // namespace

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << "pair,vif,ag,ei,qabf,sf,qw\n";
  for (const auto& r : rows) {
    if (r.ok)
      out << format_row(r) << "\n";
    else
      out << r.id << ",error: " << r.error << "\n";
  }
  out << format_row(mean) << "\n";
  return out.str();
}

std::string MetricReport::to_table() const {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %8s %8s %8s %8s %8s %8s", "pair", "vif", "ag", "ei",
                "qabf", "sf", "qw");
  out << buf << "\n";
  auto line = [&](const MetricRow& r) {
    std::snprintf(buf, sizeof(buf), "%-16s %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f", r.id.c_str(),
                  r.vif, r.ag, r.ei, r.qabf, r.sf, r.qw);
    return std::string(buf);
  };
  for (const auto& r : rows)
    out << (r.ok ? line(r) : r.id + "  error: " + r.error) << "\n";
  out << line(mean) << "\n";
  return out.str();
}

}  // namespace metrics
}  // namespace ddf
