#include "ddfusion/training.hpp"

#include "ddfusion/losses.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

namespace fs = std::filesystem;

namespace ddf {

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
  return fnv1a64(&b, sizeof(b), fnv1a64(&a, sizeof(a)));
}

torch::Tensor crop(const torch::Tensor& img, int64_t top, int64_t left, int64_t size) {
  return img.narrow(1, top, size).narrow(2, left, size).contiguous();
}

void append_log(const std::string& path, const std::string& header, int64_t step,
                const std::vector<double>& values, bool fresh) {
  if (path.empty()) return;
  std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out) throw std::runtime_error("cannot write training log: " + path);
  if (fresh) out << header << "\n";
  out << step;
  char buf[64];
  for (double v : values) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    out << buf;
  }
  out << "\n";
}

torch::Tensor stack_f32(const std::vector<SamplePair>& samples,
                        const std::vector<int64_t>& idx,
                        const std::function<torch::Tensor(const SamplePair&)>& pick) {
  std::vector<torch::Tensor> xs;
  xs.reserve(idx.size());
  for (auto i : idx) xs.push_back(pick(samples[i]).to(torch::kFloat32));
  return torch::stack(xs);
}

}  // namespace

std::vector<int64_t> batch_indices(int64_t seed, int stage, int64_t step, int64_t batch,
                                   int64_t population) {
  std::mt19937_64 rng(mix(mix(static_cast<uint64_t>(seed), static_cast<uint64_t>(stage)),
                          static_cast<uint64_t>(step)));
  std::uniform_int_distribution<int64_t> dist(0, population - 1);
  std::vector<int64_t> idx(batch);
  for (auto& i : idx) i = dist(rng);
  return idx;
}

SamplePair make_sample(const std::string& id, const torch::Tensor& ir,
                       const torch::Tensor& vi_rgb, const ProjectConfig& cfg, int64_t index) {
  check_image(ir, 1);
  check_image(vi_rgb, 3);
  if (ir.size(1) != vi_rgb.size(1) || ir.size(2) != vi_rgb.size(2))
    throw std::runtime_error("dataset: misaligned pair " + id);
  const auto& d = cfg.degradation;
  std::mt19937_64 rng(mix(static_cast<uint64_t>(cfg.seed), static_cast<uint64_t>(index)));
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  const int64_t size = std::min({cfg.train.crop_size, ir.size(1), ir.size(2)});
  const int64_t top = ir.size(1) > size
                          ? std::uniform_int_distribution<int64_t>(0, ir.size(1) - size)(rng)
                          : 0;
  const int64_t left = ir.size(2) > size
                           ? std::uniform_int_distribution<int64_t>(0, ir.size(2) - size)(rng)
                           : 0;

  SamplePair s;
  s.id = id;
  s.ir_clean = crop(ir, top, left, size);
  auto vi = crop(vi_rgb, top, left, size);

  s.spec.gaussian_sigma = uniform(d.sigma_min, d.sigma_max);
  s.spec.stripe_intensity = uniform(d.stripe_min, d.stripe_max);
  s.spec.seed = static_cast<int64_t>(mix(static_cast<uint64_t>(cfg.seed), 0x5eed + index));
  if (d.orientation == "horizontal")
    s.spec.stripe_orientation = StripeOrientation::kHorizontal;
  else if (d.orientation == "random")
    s.spec.stripe_orientation =
        (rng() & 1) ? StripeOrientation::kHorizontal : StripeOrientation::kVertical;
  s.spec.lowlight_gamma = 1.0;

  s.ir_degraded = apply_degradation(s.ir_clean, s.spec);
  s.vi_degraded_rgb = cfg.train.darken_augment ? darken(vi, d.lowlight_gamma) : vi;
  s.vi_reference_rgb = reference_enhance(vi);
  s.vi_y_in = luminance(s.vi_degraded_rgb);
  s.vi_y_ref = luminance(s.vi_reference_rgb);
  return s;
}

std::vector<SamplePair> build_dataset(const std::string& ir_dir, const std::string& vi_dir,
                                      const ProjectConfig& cfg, int64_t max_pairs) {
  auto list_pngs = [](const std::string& dir) {
    std::vector<std::string> names;
    if (!fs::is_directory(dir)) throw std::runtime_error("dataset: not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".png") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
  };
  auto ir_names = list_pngs(ir_dir);
  auto vi_names = list_pngs(vi_dir);
  std::vector<std::string> unpaired;
  std::set_symmetric_difference(ir_names.begin(), ir_names.end(), vi_names.begin(),
                                vi_names.end(), std::back_inserter(unpaired));
  if (!unpaired.empty()) {
    std::string msg = "dataset: unpaired files:";
    for (const auto& n : unpaired) msg += " " + n;
    throw std::runtime_error(msg);
  }
  if (ir_names.empty()) throw std::runtime_error("dataset: no PNG pairs in " + ir_dir);

  std::vector<SamplePair> samples;
  int64_t index = 0;
  for (const auto& name : ir_names) {
    if (max_pairs >= 0 && index >= max_pairs) break;
    auto ir = luminance(load_png((fs::path(ir_dir) / name).string()));
    auto vi = load_png((fs::path(vi_dir) / name).string());
    if (vi.size(0) == 1) vi = vi.expand({3, vi.size(1), vi.size(2)}).contiguous();
    samples.push_back(make_sample(name, ir, vi, cfg, index));
    ++index;
  }
  return samples;
}

Checkpoint make_checkpoint(const ProjectConfig& cfg, Ddon& ddon, Ilgfn* ilgfn,
                           int64_t stage1_steps, int64_t stage2_steps) {
  Checkpoint ck;
  ck.config_digest = cfg.digest();
  ck.stage1_steps = stage1_steps;
  ck.stage2_steps = stage2_steps;
  ck.put_module("ddon", *ddon);
  if (ilgfn) ck.put_module("ilgfn", **ilgfn);
  return ck;
}

StageOutcome train_stage1(const std::vector<SamplePair>& samples, const ProjectConfig& cfg,
                          Ddon& ddon, const std::string& log_path, int64_t start_step) {
  if (samples.empty()) throw std::runtime_error("stage 1: empty dataset");
  ddon->to(torch::kFloat32);
  ddon->train();
  torch::optim::Adam opt(ddon->parameters(),
                         torch::optim::AdamOptions(cfg.train.learning_rate));
  PerceptualExtractor extractor(cfg.perceptual_seed);

  StageOutcome out;
  for (int64_t k = 0; k < cfg.train.stage1_steps; ++k) {
    const int64_t step = start_step + k;
    auto idx = batch_indices(cfg.seed, 1, step, cfg.train.batch_size, samples.size());
    auto ir_de = stack_f32(samples, idx, [](const SamplePair& s) { return s.ir_degraded; });
    auto vi_de = stack_f32(samples, idx, [](const SamplePair& s) { return s.vi_y_in; });
    auto ir_ref = stack_f32(samples, idx, [](const SamplePair& s) { return s.ir_clean; });
    auto vi_ref = stack_f32(samples, idx, [](const SamplePair& s) { return s.vi_y_ref; });

    auto [f_ir, f_vi] = ddon->forward(ir_de, vi_de);
    auto [ir_en, vi_en] = ddon->reconstruct(f_ir, f_vi);
    auto loss = loss_do(ir_en, vi_en, ir_ref, vi_ref, cfg.loss, extractor);
    if (!std::isfinite(loss.recomposed))
      throw std::runtime_error("stage 1: non-finite loss at step " + std::to_string(step));

    opt.zero_grad();
    loss.total.backward();
    opt.step();

    append_log(log_path, "step,l_total,l_ir,l_vi,l_illu,l_tv,l_per", step,
               {loss.recomposed, loss.terms["l_ir"], loss.terms["l_vi"], loss.terms["l_illu"],
                loss.terms["l_tv"], loss.terms["l_per"]},
               k == 0 && start_step == 0);
    out.losses.push_back(loss.recomposed);
  }
  out.checkpoint = make_checkpoint(cfg, ddon, nullptr, start_step + cfg.train.stage1_steps, 0);
  return out;
}

StageOutcome train_stage2(const std::vector<SamplePair>& samples, const ProjectConfig& cfg,
                          Ddon& ddon, Ilgfn& ilgfn, const std::string& log_path,
                          int64_t start_step) {
  if (samples.empty()) throw std::runtime_error("stage 2: empty dataset");
  ddon->to(torch::kFloat32);
  ddon->eval();
  for (auto& p : ddon->parameters()) p.requires_grad_(false);
  ilgfn->to(torch::kFloat32);
  ilgfn->train();
  torch::optim::Adam opt(ilgfn->parameters(),
                         torch::optim::AdamOptions(cfg.train.learning_rate));

  StageOutcome out;
  for (int64_t k = 0; k < cfg.train.stage2_steps; ++k) {
    const int64_t step = start_step + k;
    auto idx = batch_indices(cfg.seed, 2, step, cfg.train.batch_size, samples.size());
    auto ir_de = stack_f32(samples, idx, [](const SamplePair& s) { return s.ir_degraded; });
    auto vi_de = stack_f32(samples, idx, [](const SamplePair& s) { return s.vi_y_in; });
    auto ir_ref = stack_f32(samples, idx, [](const SamplePair& s) { return s.ir_clean; });
    auto vi_ref = stack_f32(samples, idx, [](const SamplePair& s) { return s.vi_y_ref; });

    torch::Tensor f_ir, f_vi;
    {
      torch::NoGradGuard g;
      std::tie(f_ir, f_vi) = ddon->forward(ir_de, vi_de);
    }
    auto fu_y = ilgfn->reconstruct(ilgfn->forward(f_vi, f_ir));
    auto loss = loss_fu(fu_y, ir_ref, vi_ref, cfg.loss);
    if (!std::isfinite(loss.recomposed))
      throw std::runtime_error("stage 2: non-finite loss at step " + std::to_string(step));

    opt.zero_grad();
    loss.total.backward();
    opt.step();

    append_log(log_path, "step,l_total,l_int,l_text", step,
               {loss.recomposed, loss.terms["l_int"], loss.terms["l_text"]},
               k == 0 && start_step == 0);
    out.losses.push_back(loss.recomposed);
  }
  out.checkpoint = make_checkpoint(cfg, ddon, &ilgfn, 0, start_step + cfg.train.stage2_steps);
  return out;
}

}  // namespace ddf
