#include "ddfusion/checkpoint.hpp"
#include "ddfusion/config.hpp"
#include "ddfusion/ddon.hpp"
#include "ddfusion/decomposition.hpp"
#include "ddfusion/ilgfn.hpp"
#include "ddfusion/imaging.hpp"
#include "ddfusion/losses.hpp"
#include "ddfusion/metrics.hpp"
#include "ddfusion/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

namespace fs = std::filesystem;
using namespace ddf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

uint64_t mix(uint64_t a, uint64_t b) {
  return fnv1a64(&b, sizeof(b), fnv1a64(&a, sizeof(a)));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> list_pngs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".png") names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

// filenames must agree across all directories; offenders are listed
std::vector<std::string> aligned_pngs(const std::vector<std::string>& dirs) {
  auto names = list_pngs(dirs[0]);
  for (size_t d = 1; d < dirs.size(); ++d) {
    auto other = list_pngs(dirs[d]);
    std::vector<std::string> off;
    std::set_symmetric_difference(names.begin(), names.end(), other.begin(), other.end(),
                                  std::back_inserter(off));
    if (!off.empty()) {
      std::string msg = "unpaired files between " + dirs[0] + " and " + dirs[d] + ":";
      for (const auto& n : off) msg += " " + n;
      throw UsageError(msg);
    }
  }
  if (names.empty()) throw UsageError("no PNG files in " + dirs[0]);
  return names;
}

// per-image parallelism; exceptions are captured and rethrown on the caller
void parallel_for(int64_t count, int jobs, const std::function<void(int64_t)>& body) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  if (jobs == 1) {
    for (int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int64_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------- degrade

struct DegradeArgs {
  std::string in_dir, out_dir;
  int64_t seed = 7;
  double sigma_min = 5.0, sigma_max = 30.0;
  double stripe_min = 10.0, stripe_max = 30.0;
  std::string orientation = "vertical";
  double gamma = 1.0;
  int jobs = 1;
};

int cmd_degrade(const DegradeArgs& a) {
  auto names = list_pngs(a.in_dir);
  if (names.empty()) throw UsageError("empty input directory: " + a.in_dir);
  if (a.sigma_min > a.sigma_max || a.stripe_min > a.stripe_max)
    throw UsageError("degrade: empty parameter range");
  fs::create_directories(a.out_dir);

  std::vector<DegradationSpec> specs(names.size());
  std::vector<std::string> written(names.size());
  try {
    parallel_for(static_cast<int64_t>(names.size()), a.jobs, [&](int64_t i) {
      std::mt19937_64 rng(mix(static_cast<uint64_t>(a.seed), static_cast<uint64_t>(i)));
      auto uniform = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
      };
      DegradationSpec spec;
      spec.gaussian_sigma = uniform(a.sigma_min, a.sigma_max);
      spec.stripe_intensity = uniform(a.stripe_min, a.stripe_max);
      if (a.orientation == "horizontal")
        spec.stripe_orientation = StripeOrientation::kHorizontal;
      else if (a.orientation == "random")
        spec.stripe_orientation =
            (rng() & 1) ? StripeOrientation::kHorizontal : StripeOrientation::kVertical;
      spec.lowlight_gamma = a.gamma;
      spec.seed = static_cast<int64_t>(mix(static_cast<uint64_t>(a.seed), 0x5eed + i));
      specs[i] = spec;

      auto img = load_png((fs::path(a.in_dir) / names[i]).string());
      auto out_path = (fs::path(a.out_dir) / names[i]).string();
      save_png(apply_degradation(img, spec), out_path);
      written[i] = out_path;
    });
  } catch (...) {
    for (const auto& p : written)
      if (!p.empty()) fs::remove(p);
    throw;
  }

  std::ofstream manifest(fs::path(a.out_dir) / "manifest.json");
  if (!manifest) throw UsageError("cannot write manifest in " + a.out_dir);
  manifest << "{\n  \"seed\": " << a.seed << ",\n  \"files\": [\n";
  for (size_t i = 0; i < names.size(); ++i) {
    const auto& s = specs[i];
    manifest << "    {\"name\": \"" << names[i] << "\", \"sigma\": " << fmt_double(s.gaussian_sigma)
             << ", \"stripe\": " << fmt_double(s.stripe_intensity) << ", \"orientation\": \""
             << (s.stripe_orientation == StripeOrientation::kVertical ? "vertical" : "horizontal")
             << "\", \"gamma\": " << fmt_double(s.lowlight_gamma) << ", \"seed\": " << s.seed
             << "}" << (i + 1 < names.size() ? "," : "") << "\n";
  }
  manifest << "  ]\n}\n";
  std::cout << "degraded " << names.size() << " images into " << a.out_dir << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- decompose

int cmd_decompose(const std::string& image, const std::string& out_dir,
                  const std::string& mode, double tau) {
  torch::Tensor img;
  try {
    img = load_png(image);
  } catch (const std::exception& e) {
    throw UsageError(std::string("cannot read image: ") + e.what());
  }
  auto y = luminance(img).squeeze(0);  // (H, W) double
  fs::create_directories(out_dir);

  std::vector<std::pair<std::string, torch::Tensor>> comps;
  if (mode == "dct") {
    auto pair = split_frequency(dct2(y), tau);
    comps = {{"low", idct2(pair.low)}, {"high", idct2(pair.high)}};
  } else if (mode == "retinex") {
    auto pair = retinex_decompose(y);
    auto residual = (pair.reflectance * pair.illumination - y).abs().max().item<double>();
    if (residual > 1e-6)
      throw std::runtime_error("retinex recomposition residual " + fmt_double(residual));
    comps = {{"reflectance", pair.reflectance}, {"illumination", pair.illumination}};
  } else {
    throw UsageError("unknown --mode: " + mode);
  }

  std::ofstream sidecar(fs::path(out_dir) / "scaling.txt");
  sidecar << "component,min,max\n";
  for (const auto& [name, comp] : comps) {
    const double lo = comp.min().item<double>();
    const double hi = comp.max().item<double>();
    auto vis = hi > lo ? (comp - lo) / (hi - lo) : torch::zeros_like(comp);
    save_png(vis.unsqueeze(0), (fs::path(out_dir) / (name + ".png")).string());
    sidecar << name << "," << fmt_double(lo) << "," << fmt_double(hi) << "\n";
  }
  std::cout << "wrote " << comps.size() << " components into " << out_dir << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ train

int cmd_train(const std::string& config_path, const std::string& stage,
              const std::string& resume) {
  ProjectConfig cfg;
  try {
    cfg = ProjectConfig::load(config_path);
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("config error: ") + e.what());
  }
  if (stage != "1" && stage != "2" && stage != "all")
    throw UsageError("--stage must be 1, 2 or all");

  fs::create_directories(cfg.paths.out_dir);
  auto samples = build_dataset(cfg.paths.ir_dir, cfg.paths.vi_dir, cfg);

  torch::manual_seed(cfg.seed);
  Ddon ddon(cfg.block, cfg.tau, !cfg.model.use_ddon);
  Ilgfn ilgfn(cfg.block, !cfg.model.use_ilgfn);

  int64_t s1_start = 0, s2_start = 0;
  if (!resume.empty()) {
    auto ck = Checkpoint::load(resume);
    if (ck.config_digest != cfg.digest())
      throw UsageError("checkpoint was produced with a different config: " + resume);
    ck.load_into("ddon", *ddon);
    if (ck.stage2_steps > 0) ck.load_into("ilgfn", *ilgfn);
    s1_start = ck.stage1_steps;
    s2_start = ck.stage2_steps;
  }

  const auto stage1_ckpt = (fs::path(cfg.paths.out_dir) / "stage1.ckpt").string();
  const auto stage2_ckpt = (fs::path(cfg.paths.out_dir) / "stage2.ckpt").string();
  int64_t s1_total = s1_start;

  if (stage == "1" || stage == "all") {
    auto out = train_stage1(samples, cfg, ddon,
                            (fs::path(cfg.paths.out_dir) / "stage1_log.csv").string(), s1_start);
    s1_total = out.checkpoint.stage1_steps;
    out.checkpoint.save(stage1_ckpt);
    std::cout << "stage 1: " << cfg.train.stage1_steps << " steps, final loss "
              << fmt_double(out.losses.back()) << "\n";
  }
  if (stage == "2" || stage == "all") {
    if (stage == "2" && resume.empty()) {
      if (!fs::exists(stage1_ckpt))
        throw UsageError("stage 2 needs a stage-1 checkpoint (missing " + stage1_ckpt + ")");
      auto ck = Checkpoint::load(stage1_ckpt);
      if (ck.config_digest != cfg.digest())
        throw UsageError("checkpoint was produced with a different config: " + stage1_ckpt);
      ck.load_into("ddon", *ddon);
      s1_total = ck.stage1_steps;
    }
    auto out = train_stage2(samples, cfg, ddon, ilgfn,
                            (fs::path(cfg.paths.out_dir) / "stage2_log.csv").string(), s2_start);
    out.checkpoint.stage1_steps = s1_total;
    out.checkpoint.save(stage2_ckpt);
    std::cout << "stage 2: " << cfg.train.stage2_steps << " steps, final loss "
              << fmt_double(out.losses.back()) << "\n";
  }
  return kExitOk;
}

// ------------------------------------------------------------------- fuse

int cmd_fuse(const std::string& ckpt_path, const std::string& config_path,
             const std::string& ir_dir, const std::string& vi_dir, const std::string& out_dir,
             int jobs) {
  ProjectConfig cfg;
  try {
    cfg = ProjectConfig::load(config_path);
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("config error: ") + e.what());
  }
  auto ck = Checkpoint::load(ckpt_path);
  if (ck.config_digest != cfg.digest())
    throw UsageError("checkpoint was produced with a different config: " + ckpt_path);

  torch::manual_seed(cfg.seed);
  Ddon ddon(cfg.block, cfg.tau, !cfg.model.use_ddon);
  Ilgfn ilgfn(cfg.block, !cfg.model.use_ilgfn);
  ck.load_into("ddon", *ddon);
  ck.load_into("ilgfn", *ilgfn);
  ddon->eval();
  ilgfn->eval();

  auto names = aligned_pngs({ir_dir, vi_dir});
  fs::create_directories(out_dir);
  parallel_for(static_cast<int64_t>(names.size()), jobs, [&](int64_t i) {
    auto ir = luminance(load_png((fs::path(ir_dir) / names[i]).string()));
    auto vi = load_png((fs::path(vi_dir) / names[i]).string());
    if (vi.size(0) == 1) vi = vi.expand({3, vi.size(1), vi.size(2)}).contiguous();
    auto fused = fuse_image(ir, vi, ddon, ilgfn);
    save_png(fused, (fs::path(out_dir) / names[i]).string());
  });
  std::cout << "fused " << names.size() << " pairs into " << out_dir << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- evaluate

int cmd_evaluate(const std::string& ir_dir, const std::string& vi_dir,
                 const std::string& fused_dir, const std::string& out_csv, int jobs) {
  auto names = aligned_pngs({ir_dir, vi_dir, fused_dir});
  std::vector<metrics::EvalTriple> triples(names.size());
  parallel_for(static_cast<int64_t>(names.size()), jobs, [&](int64_t i) {
    triples[i] = {names[i], luminance(load_png((fs::path(ir_dir) / names[i]).string())),
                  luminance(load_png((fs::path(vi_dir) / names[i]).string())),
                  luminance(load_png((fs::path(fused_dir) / names[i]).string()))};
  });
  auto report = metrics::evaluate(triples);
  std::ofstream out(out_csv);
  if (!out) throw UsageError("cannot write " + out_csv);
  out << report.to_csv();
  std::cout << report.to_table();
  return kExitOk;
}

// --------------------------------------------------------------- gradcheck

struct GradCase {
  std::string name;
  std::function<double()> run;  // returns max relative error
};

std::vector<GradCase> gradcheck_suite() {
  const auto opts = torch::dtype(torch::kFloat64);
  auto rand_img = [opts](int64_t seed, int64_t c = 1) {
    auto gen = at::detail::createCPUGenerator(seed);
    return (torch::rand({1, c, 12, 12}, gen, opts) * 0.8 + 0.1).set_requires_grad(true);
  };
  std::vector<GradCase> cases;
  cases.push_back({"charbonnier", [=] {
                     auto en = rand_img(1), ref = rand_img(2);
                     return gradcheck([&] { return charbonnier_loss(en, ref, 1e-6); }, {en, ref});
                   }});
  cases.push_back({"illumination", [=] {
                     auto en = rand_img(3), ref = rand_img(4);
                     return gradcheck([&] { return illumination_loss(en, ref, 1e-6); }, {en, ref});
                   }});
  cases.push_back({"tv", [=] {
                     auto x = rand_img(5);
                     return gradcheck([&] { return tv_loss(x); }, {x});
                   }});
  cases.push_back({"perceptual", [=] {
                     PerceptualExtractor ex(17);
                     auto en = rand_img(6), ref = rand_img(7);
                     return gradcheck([&] { return perceptual_loss(en, ref, ex); }, {en, ref});
                   }});
  cases.push_back({"intensity", [=] {
                     // keep |fu - ref| well away from the L1 kink
                     auto fu = rand_img(8);
                     auto ref_a = (fu + 0.3).detach();
                     auto ref_b = (fu - 0.25).detach();
                     return gradcheck([&] { return intensity_loss(fu, ref_a, ref_b); }, {fu});
                   }});
  cases.push_back({"texture", [=] {
                     // structured refs keep the max() and |.| arguments away from ties
                     auto fu = rand_img(9);
                     auto ramp = torch::linspace(0.0, 1.0, 12, opts);
                     auto ref_a = (ramp.view({1, 1, 1, 12}) * torch::ones({1, 1, 12, 1}, opts));
                     auto ref_b = (ref_a * 0.2).detach();
                     return gradcheck([&] { return texture_loss(fu, ref_a, ref_b); }, {fu});
                   }});
  return cases;
}

int cmd_gradcheck(bool all, const std::string& loss_name) {
  auto suite = gradcheck_suite();
  std::vector<GradCase> selected;
  if (all || loss_name.empty()) {
    selected = suite;
  } else {
    for (auto& c : suite)
      if (c.name == loss_name) selected.push_back(c);
    if (selected.empty()) throw UsageError("unknown loss name: " + loss_name);
  }
  bool ok = true;
  for (auto& c : selected) {
    const double err = c.run();
    const bool pass = err < 1e-4;
    ok = ok && pass;
    std::printf("%-13s max_rel_err=%.3e %s\n", c.name.c_str(), err, pass ? "PASS" : "FAIL");
  }
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ddfusion: degraded infrared/visible image fusion pipeline"};
  app.require_subcommand(1);

  DegradeArgs dg;
  auto* degrade = app.add_subcommand("degrade", "apply synthetic degradations to a directory");
  degrade->add_option("--in", dg.in_dir, "input PNG directory")->required();
  degrade->add_option("--out", dg.out_dir, "output directory")->required();
  degrade->add_option("--seed", dg.seed, "base seed");
  degrade->add_option("--sigma-min", dg.sigma_min, "Gaussian sigma lower bound (0-255)");
  degrade->add_option("--sigma-max", dg.sigma_max, "Gaussian sigma upper bound (0-255)");
  degrade->add_option("--stripe-min", dg.stripe_min, "stripe amplitude lower bound (0-255)");
  degrade->add_option("--stripe-max", dg.stripe_max, "stripe amplitude upper bound (0-255)");
  degrade->add_option("--orientation", dg.orientation, "vertical|horizontal|random");
  degrade->add_option("--gamma", dg.gamma, "low-light gamma (1 disables darkening)");
  degrade->add_option("--jobs", dg.jobs, "parallel workers");

  std::string dc_image, dc_out, dc_mode = "dct";
  double dc_tau = kDefaultTau;
  auto* decompose = app.add_subcommand("decompose", "write decomposition component images");
  decompose->add_option("image", dc_image, "input PNG")->required();
  decompose->add_option("--out", dc_out, "output directory")->required();
  decompose->add_option("--mode", dc_mode, "dct|retinex");
  decompose->add_option("--tau", dc_tau, "frequency split threshold");

  std::string tr_config, tr_stage = "all", tr_resume;
  auto* train = app.add_subcommand("train", "run the two-stage training pipeline");
  train->add_option("--config", tr_config, "project config JSON")->required();
  train->add_option("--stage", tr_stage, "1|2|all");
  train->add_option("--resume", tr_resume, "checkpoint to continue from");

  std::string fu_ckpt, fu_config, fu_ir, fu_vi, fu_out;
  int fu_jobs = 1;
  auto* fuse = app.add_subcommand("fuse", "fuse aligned infrared/visible pairs");
  fuse->add_option("--ckpt", fu_ckpt, "trained checkpoint")->required();
  fuse->add_option("--config", fu_config, "project config JSON")->required();
  fuse->add_option("--ir", fu_ir, "infrared directory")->required();
  fuse->add_option("--vi", fu_vi, "visible directory")->required();
  fuse->add_option("--out", fu_out, "output directory")->required();
  fuse->add_option("--jobs", fu_jobs, "parallel workers");

  std::string ev_ir, ev_vi, ev_fused, ev_csv;
  int ev_jobs = 1;
  auto* evaluate = app.add_subcommand("evaluate", "compute fusion quality metrics");
  evaluate->add_option("--ir", ev_ir, "infrared directory")->required();
  evaluate->add_option("--vi", ev_vi, "visible directory")->required();
  evaluate->add_option("--fused", ev_fused, "fused output directory")->required();
  evaluate->add_option("--out", ev_csv, "output CSV path")->required();
  evaluate->add_option("--jobs", ev_jobs, "parallel workers");

  bool gc_all = false;
  std::string gc_loss;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck_cmd->add_flag("--all", gc_all, "run every check");
  gradcheck_cmd->add_option("--loss", gc_loss, "single loss to check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand(degrade)) return cmd_degrade(dg);
    if (app.got_subcommand(decompose)) return cmd_decompose(dc_image, dc_out, dc_mode, dc_tau);
    if (app.got_subcommand(train)) return cmd_train(tr_config, tr_stage, tr_resume);
    if (app.got_subcommand(fuse)) return cmd_fuse(fu_ckpt, fu_config, fu_ir, fu_vi, fu_out, fu_jobs);
    if (app.got_subcommand(evaluate)) return cmd_evaluate(ev_ir, ev_vi, ev_fused, ev_csv, ev_jobs);
    if (app.got_subcommand(gradcheck_cmd)) return cmd_gradcheck(gc_all, gc_loss);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    return what.find("non-finite") != std::string::npos ? kExitNumeric : kExitUsage;
  }
  return kExitUsage;
}
