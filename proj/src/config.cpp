#include "ddfusion/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ddf {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& known) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

void ProjectConfig::validate() const {
  block.validate();
  loss.validate();
  if (tau < 0 || tau > 2) throw std::invalid_argument("config: tau must be in [0, 2]");
  if (degradation.sigma_min < 0 || degradation.sigma_max < degradation.sigma_min ||
      degradation.sigma_max > 30.0)
    throw std::invalid_argument("config: sigma range must satisfy 0 <= min <= max <= 30");
  if (degradation.stripe_min < 0 || degradation.stripe_max < degradation.stripe_min ||
      degradation.stripe_max > 30.0)
    throw std::invalid_argument("config: stripe range must satisfy 0 <= min <= max <= 30");
  if (degradation.orientation != "vertical" && degradation.orientation != "horizontal" &&
      degradation.orientation != "random")
    throw std::invalid_argument("config: orientation must be vertical|horizontal|random");
  if (degradation.lowlight_gamma < 1.0)
    throw std::invalid_argument("config: lowlight_gamma must be >= 1");
  if (train.crop_size < 8 || train.crop_size % block.window != 0)
    throw std::invalid_argument("config: crop_size must be a positive multiple of the window");
  if (train.batch_size < 1 || train.learning_rate <= 0 || train.stage1_steps < 0 ||
      train.stage2_steps < 0)
    throw std::invalid_argument("config: invalid train settings");
}

std::string ProjectConfig::to_json() const {
  json j;
  j["version"] = version;
  j["seed"] = seed;
  j["tau"] = tau;
  j["block"] = {{"channels", block.channels},     {"window", block.window},
                {"heads", block.heads},           {"mlp_ratio", block.mlp_ratio},
                {"rdscb_repeat", block.rdscb_repeat}, {"cbam_reduction", block.cbam_reduction},
                {"gn_groups", block.gn_groups},   {"leaky_slope", block.leaky_slope}};
  j["loss"] = {{"lambda1", loss.lambda1}, {"lambda2", loss.lambda2},
               {"lambda3", loss.lambda3}, {"gamma1", loss.gamma1},
               {"gamma2", loss.gamma2},   {"epsilon", loss.epsilon},
               {"use_ds", loss.use_ds},   {"use_text", loss.use_text},
               {"tv_on_infrared", loss.tv_on_infrared},
               {"perceptual_seed", perceptual_seed}};
  j["degradation"] = {{"sigma_min", degradation.sigma_min},
                      {"sigma_max", degradation.sigma_max},
                      {"stripe_min", degradation.stripe_min},
                      {"stripe_max", degradation.stripe_max},
                      {"orientation", degradation.orientation},
                      {"lowlight_gamma", degradation.lowlight_gamma}};
  j["train"] = {{"crop_size", train.crop_size},       {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate}, {"stage1_steps", train.stage1_steps},
                {"stage2_steps", train.stage2_steps},  {"darken_augment", train.darken_augment}};
  j["model"] = {{"use_ddon", model.use_ddon}, {"use_ilgfn", model.use_ilgfn}};
  j["paths"] = {{"ir_dir", paths.ir_dir}, {"vi_dir", paths.vi_dir}, {"out_dir", paths.out_dir}};
  return j.dump(2);
}

ProjectConfig ProjectConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j, "root",
             {"version", "seed", "tau", "block", "loss", "degradation", "train", "model", "paths"});
  ProjectConfig c;
  get(j, "version", c.version);
  get(j, "seed", c.seed);
  get(j, "tau", c.tau);
  if (j.contains("block")) {
    const auto& b = j["block"];
    check_keys(b, "block", {"channels", "window", "heads", "mlp_ratio", "rdscb_repeat",
                            "cbam_reduction", "gn_groups", "leaky_slope"});
    get(b, "channels", c.block.channels);
    get(b, "window", c.block.window);
    get(b, "heads", c.block.heads);
    get(b, "mlp_ratio", c.block.mlp_ratio);
    get(b, "rdscb_repeat", c.block.rdscb_repeat);
    get(b, "cbam_reduction", c.block.cbam_reduction);
    get(b, "gn_groups", c.block.gn_groups);
    get(b, "leaky_slope", c.block.leaky_slope);
  }
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    check_keys(l, "loss", {"lambda1", "lambda2", "lambda3", "gamma1", "gamma2", "epsilon",
                           "use_ds", "use_text", "tv_on_infrared", "perceptual_seed"});
    get(l, "lambda1", c.loss.lambda1);
    get(l, "lambda2", c.loss.lambda2);
    get(l, "lambda3", c.loss.lambda3);
    get(l, "gamma1", c.loss.gamma1);
    get(l, "gamma2", c.loss.gamma2);
    get(l, "epsilon", c.loss.epsilon);
    get(l, "use_ds", c.loss.use_ds);
    get(l, "use_text", c.loss.use_text);
    get(l, "tv_on_infrared", c.loss.tv_on_infrared);
    get(l, "perceptual_seed", c.perceptual_seed);
  }
  if (j.contains("degradation")) {
    const auto& d = j["degradation"];
    check_keys(d, "degradation", {"sigma_min", "sigma_max", "stripe_min", "stripe_max",
                                  "orientation", "lowlight_gamma"});
    get(d, "sigma_min", c.degradation.sigma_min);
    get(d, "sigma_max", c.degradation.sigma_max);
    get(d, "stripe_min", c.degradation.stripe_min);
    get(d, "stripe_max", c.degradation.stripe_max);
    get(d, "orientation", c.degradation.orientation);
    get(d, "lowlight_gamma", c.degradation.lowlight_gamma);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, "train", {"crop_size", "batch_size", "learning_rate", "stage1_steps",
                            "stage2_steps", "darken_augment"});
    get(t, "crop_size", c.train.crop_size);
    get(t, "batch_size", c.train.batch_size);
    get(t, "learning_rate", c.train.learning_rate);
    get(t, "stage1_steps", c.train.stage1_steps);
    get(t, "stage2_steps", c.train.stage2_steps);
    get(t, "darken_augment", c.train.darken_augment);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, "model", {"use_ddon", "use_ilgfn"});
    get(m, "use_ddon", c.model.use_ddon);
    get(m, "use_ilgfn", c.model.use_ilgfn);
  }
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    check_keys(p, "paths", {"ir_dir", "vi_dir", "out_dir"});
    get(p, "ir_dir", c.paths.ir_dir);
    get(p, "vi_dir", c.paths.vi_dir);
    get(p, "out_dir", c.paths.out_dir);
  }
  c.validate();
  return c;
}

ProjectConfig ProjectConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void ProjectConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << to_json() << "\n";
}

uint64_t ProjectConfig::digest() const {
  auto s = to_json();
  return fnv1a64(s.data(), s.size());
}

}  // namespace ddf
