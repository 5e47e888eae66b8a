#include "ddfusion/blocks.hpp"

#include "ddfusion/decomposition.hpp"

#include <cmath>
#include <stdexcept>

namespace ddf {

void BlockConfig::validate() const {
  if (channels <= 0 || window <= 0 || heads <= 0 || mlp_ratio <= 0 ||
      rdscb_repeat < 1 || cbam_reduction <= 0 || gn_groups <= 0)
    throw std::invalid_argument("block config fields must be positive");
  if (channels % 4 != 0) throw std::invalid_argument("channels must be divisible by 4");
  if (channels % heads != 0) throw std::invalid_argument("channels must be divisible by heads");
  if (channels % gn_groups != 0)
    throw std::invalid_argument("channels must be divisible by gn_groups");
  if (channels / 2 < 1 || channels / cbam_reduction < 1)
    throw std::invalid_argument("channels too small for reductions");
}

void trunc_normal_(torch::Tensor t, double std) {
  torch::NoGradGuard g;
  t.normal_(0.0, std).clamp_(-2.0 * std, 2.0 * std);
}

namespace {

void init_projections(torch::nn::Module& root) {
  // include_self=false: the root itself is never a Linear/Conv2d, and torch
  // requires shared_ptr ownership (absent during construction) to include it
  for (const auto& mod : root.modules(/*include_self=*/false)) {
    if (auto* lin = mod->as<torch::nn::Linear>()) {
      trunc_normal_(lin->weight);
      if (lin->bias.defined()) { torch::NoGradGuard g; lin->bias.zero_(); }
    } else if (auto* conv = mod->as<torch::nn::Conv2d>()) {
      trunc_normal_(conv->weight);
      if (conv->bias.defined()) { torch::NoGradGuard g; conv->bias.zero_(); }
    }
  }
}

torch::nn::Conv2d reflect_conv(int64_t in, int64_t out, int64_t kernel, int64_t groups = 1) {
  auto opts = torch::nn::Conv2dOptions(in, out, kernel).padding(kernel / 2).groups(groups);
  if (kernel > 1) opts = opts.padding_mode(torch::kReflect);
  return torch::nn::Conv2d(opts);
}

// reflect-pad only at the bottom/right, enough to reach `total`
torch::Tensor pad_to_index(int64_t n, int64_t total) {
  auto idx = reflect_index(n, total - n);          // pads both sides
  return idx.narrow(0, total - n, total);          // keep [0, n) plus the tail
}

}  // namespace

std::pair<torch::Tensor, WindowLayout> window_partition(const torch::Tensor& x, int64_t window) {
  if (window <= 0) throw std::invalid_argument("window size must be positive");
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const int64_t hp = (h + window - 1) / window * window;
  const int64_t wp = (w + window - 1) / window * window;
  auto y = x;
  if (hp != h) y = y.index_select(2, pad_to_index(h, hp).to(x.device()));
  if (wp != w) y = y.index_select(3, pad_to_index(w, wp).to(x.device()));
  const int64_t nh = hp / window, nw = wp / window;
  auto tokens = y.view({b, c, nh, window, nw, window})
                    .permute({0, 2, 4, 3, 5, 1})
                    .reshape({b * nh * nw, window * window, c});
  return {tokens, WindowLayout{b, c, h, w, hp, wp, window}};
}

torch::Tensor window_reverse(const torch::Tensor& tokens, const WindowLayout& l) {
  const int64_t nh = l.padded_h / l.window, nw = l.padded_w / l.window;
  auto x = tokens.view({l.batch, nh, nw, l.window, l.window, l.channels})
               .permute({0, 5, 1, 3, 2, 4})
               .reshape({l.batch, l.channels, l.padded_h, l.padded_w});
  return x.narrow(2, 0, l.height).narrow(3, 0, l.width);
}

torch::Tensor multi_head_attention(const torch::Tensor& q, const torch::Tensor& k,
                                   const torch::Tensor& v, int64_t heads) {
  if (!torch::isfinite(q).all().item<bool>() || !torch::isfinite(k).all().item<bool>() ||
      !torch::isfinite(v).all().item<bool>())
    throw std::runtime_error("attention inputs must be finite");
  const auto n = q.size(0), t = q.size(1), c = q.size(2);
  if (c % heads != 0) throw std::invalid_argument("channels must be divisible by heads");
  const auto d = c / heads;
  auto split = [&](const torch::Tensor& x) {
    return x.view({n, t, heads, d}).permute({0, 2, 1, 3});
  };
  auto qs = split(q), ks = split(k), vs = split(v);
  auto attn = torch::softmax(torch::matmul(qs, ks.transpose(-2, -1)) / std::sqrt((double)d), -1);
  auto out = torch::matmul(attn, vs);
  return out.permute({0, 2, 1, 3}).reshape({n, t, c});
}

TokenMlpImpl::TokenMlpImpl(int64_t dim, int64_t hidden, double slope) : slope(slope) {
  fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor TokenMlpImpl::forward(const torch::Tensor& x) {
  return fc2(torch::leaky_relu(fc1(x), slope));
}

IsaImpl::IsaImpl(int64_t dim, int64_t heads) : heads(heads) {
  q1 = register_module("q1", torch::nn::Linear(dim, dim));
  k1 = register_module("k1", torch::nn::Linear(dim, dim));
  v1 = register_module("v1", torch::nn::Linear(dim, dim));
  q2 = register_module("q2", torch::nn::Linear(dim, dim));
  k2 = register_module("k2", torch::nn::Linear(dim, dim));
  v2 = register_module("v2", torch::nn::Linear(dim, dim));
  proj1 = register_module("proj1", torch::nn::Linear(dim, dim));
  proj2 = register_module("proj2", torch::nn::Linear(dim, dim));
  init_projections(*this);
}

std::pair<torch::Tensor, torch::Tensor> IsaImpl::forward(const torch::Tensor& x1,
                                                         const torch::Tensor& x2) {
  if (x1.sizes() != x2.sizes()) throw std::invalid_argument("ISA streams must match in shape");
  auto qa = q1(x1), ka = k1(x1), va = v1(x1);
  auto qb = q2(x2), kb = k2(x2), vb = v2(x2);
  auto o1 = proj1(multi_head_attention(qa + qb, ka, va, heads));
  auto o2 = proj2(multi_head_attention(qb + qa, kb, vb, heads));
  return {o1, o2};
}

ItbImpl::ItbImpl(const BlockConfig& cfg) : window(cfg.window) {
  const auto c = cfg.channels;
  norm1a = register_module("norm1a", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c})));
  norm1b = register_module("norm1b", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c})));
  norm2a = register_module("norm2a", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c})));
  norm2b = register_module("norm2b", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c})));
  isa = register_module("isa", Isa(c, cfg.heads));
  mlp1 = register_module("mlp1", TokenMlp(c, c * cfg.mlp_ratio, cfg.leaky_slope));
  mlp2 = register_module("mlp2", TokenMlp(c, c * cfg.mlp_ratio, cfg.leaky_slope));
}

std::pair<torch::Tensor, torch::Tensor> ItbImpl::forward(const torch::Tensor& f1,
                                                         const torch::Tensor& f2) {
  if (f1.sizes() != f2.sizes()) throw std::invalid_argument("ITB streams must match in shape");
  auto [t1, layout] = window_partition(f1, window);
  auto t2 = window_partition(f2, window).first;
  auto [a1, a2] = isa(norm1a(t1), norm1b(t2));
  t1 = t1 + a1;
  t2 = t2 + a2;
  t1 = t1 + mlp1(norm2a(t1));
  t2 = t2 + mlp2(norm2b(t2));
  return {window_reverse(t1, layout), window_reverse(t2, layout)};
}

SwinLayerImpl::SwinLayerImpl(const BlockConfig& cfg, int64_t shift)
    : window(cfg.window), heads(cfg.heads), shift(shift) {
  const auto c = cfg.channels;
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c})));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c})));
  qkv = register_module("qkv", torch::nn::Linear(c, 3 * c));
  proj = register_module("proj", torch::nn::Linear(c, c));
  mlp = register_module("mlp", TokenMlp(c, c * cfg.mlp_ratio, cfg.leaky_slope));
  init_projections(*this);
}

torch::Tensor SwinLayerImpl::forward(const torch::Tensor& f) {
  auto x = shift > 0 ? torch::roll(f, {-shift, -shift}, {2, 3}) : f;
  auto [t, layout] = window_partition(x, window);
  auto n = norm1(t);
  auto chunks = qkv(n).chunk(3, -1);
  t = t + proj(multi_head_attention(chunks[0], chunks[1], chunks[2], heads));
  t = t + mlp(norm2(t));
  x = window_reverse(t, layout);
  return shift > 0 ? torch::roll(x, {shift, shift}, {2, 3}) : x;
}

SwinBlockImpl::SwinBlockImpl(const BlockConfig& cfg) {
  layer1 = register_module("layer1", SwinLayer(cfg, 0));
  layer2 = register_module("layer2", SwinLayer(cfg, cfg.window / 2));
}

torch::Tensor SwinBlockImpl::forward(const torch::Tensor& f) {
  return layer2(layer1(f));
}

MsConvImpl::MsConvImpl(const BlockConfig& cfg) : slope(cfg.leaky_slope) {
  cfg.validate();
  branches = register_module("branches", torch::nn::ModuleList());
  for (int64_t k : {1, 3, 5, 7})
    branches->push_back(reflect_conv(cfg.channels, cfg.channels / 4, k));
  fuse = register_module("fuse", reflect_conv(cfg.channels, cfg.channels, 1));
  init_projections(*this);
}

torch::Tensor MsConvImpl::forward(const torch::Tensor& f) {
  std::vector<torch::Tensor> outs;
  for (const auto& b : *branches)
    outs.push_back(torch::leaky_relu(b->as<torch::nn::Conv2d>()->forward(f), slope));
  return fuse(torch::cat(outs, 1));
}

CbamImpl::CbamImpl(const BlockConfig& cfg) {
  const auto c = cfg.channels;
  fc1 = register_module("fc1", torch::nn::Conv2d(c, c / cfg.cbam_reduction, 1));
  fc2 = register_module("fc2", torch::nn::Conv2d(c / cfg.cbam_reduction, c, 1));
  spatial = register_module("spatial", reflect_conv(2, 1, 7));
  init_projections(*this);
}

torch::Tensor CbamImpl::forward(const torch::Tensor& f) {
  auto mlp = [&](const torch::Tensor& pooled) { return fc2(torch::relu(fc1(pooled))); };
  auto avg = torch::adaptive_avg_pool2d(f, {1, 1});
  auto mx = std::get<0>(torch::adaptive_max_pool2d(f, {1, 1}));
  auto channel_gate = torch::sigmoid(mlp(avg) + mlp(mx));
  auto g = f * channel_gate;
  auto mean_stat = g.mean(1, true);
  auto max_stat = std::get<0>(g.max(1, true));
  auto stats = torch::cat({mean_stat, max_stat}, 1);
  auto spatial_gate = torch::sigmoid(spatial(stats));
  return g * spatial_gate;
}

GnLrImpl::GnLrImpl(const BlockConfig& cfg) : slope(cfg.leaky_slope) {
  gn = register_module(
      "gn", torch::nn::GroupNorm(torch::nn::GroupNormOptions(cfg.gn_groups, cfg.channels).eps(1e-5)));
}

torch::Tensor GnLrImpl::forward(const torch::Tensor& f) {
  return torch::leaky_relu(gn(f), slope);
}

RdscbImpl::RdscbImpl(const BlockConfig& cfg, int64_t kernel) : slope(cfg.leaky_slope) {
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("rdscb kernel must be odd");
  depthwise = register_module("depthwise", torch::nn::ModuleList());
  pointwise = register_module("pointwise", torch::nn::ModuleList());
  for (int64_t i = 0; i < cfg.rdscb_repeat; ++i) {
    depthwise->push_back(reflect_conv(cfg.channels, cfg.channels, kernel, cfg.channels));
    pointwise->push_back(reflect_conv(cfg.channels, cfg.channels, 1));
  }
  gnlr = register_module("gnlr", GnLr(cfg));
  init_projections(*this);
}

torch::Tensor RdscbImpl::forward(const torch::Tensor& f) {
  auto x = f;
  for (size_t i = 0; i < depthwise->size(); ++i) {
    x = torch::leaky_relu(depthwise[i]->as<torch::nn::Conv2d>()->forward(x), slope);
    x = torch::leaky_relu(pointwise[i]->as<torch::nn::Conv2d>()->forward(x), slope);
  }
  return gnlr(x + f);
}

LiaImpl::LiaImpl(const BlockConfig& cfg, int64_t kernel) : slope(cfg.leaky_slope) {
  const auto c2 = 2 * cfg.channels, hidden = cfg.channels / 2;
  avg_fc1 = register_module("avg_fc1", torch::nn::Linear(c2, hidden));
  avg_fc2 = register_module("avg_fc2", torch::nn::Linear(hidden, c2));
  std_fc1 = register_module("std_fc1", torch::nn::Linear(c2, hidden));
  std_fc2 = register_module("std_fc2", torch::nn::Linear(hidden, c2));
  conv = register_module("conv", reflect_conv(c2, cfg.channels, kernel));
  alpha = register_parameter("alpha", torch::ones({}));
  beta = register_parameter("beta", torch::ones({}));
  init_projections(*this);
}

torch::Tensor LiaImpl::attention_logits(const torch::Tensor& fp) {
  auto avg = fp.mean({2, 3});
  auto sd = torch::sqrt(fp.var({2, 3}, /*unbiased=*/false) + 1e-12);
  auto a = avg_fc2(torch::leaky_relu(avg_fc1(avg), slope));
  auto s = std_fc2(torch::leaky_relu(std_fc1(sd), slope));
  return alpha * a + beta * s;
}

torch::Tensor LiaImpl::forward(const torch::Tensor& f1, const torch::Tensor& f2) {
  if (f1.sizes() != f2.sizes()) throw std::invalid_argument("LIA inputs must match in shape");
  auto fp = torch::cat({f1, f2}, 1);
  auto gate = torch::sigmoid(attention_logits(fp)).unsqueeze(-1).unsqueeze(-1);
  return conv(gate * fp);
}

}  // namespace ddf
