#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "testing.hpp"

#include "ddfusion/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace ddf;

TEST_CASE("config: json round trip preserves every field") {
  ProjectConfig cfg;
  cfg.seed = 123;
  cfg.tau = 0.3;
  cfg.perceptual_seed = 29;
  cfg.block.channels = 8;
  cfg.block.window = 4;
  cfg.loss.lambda2 = 50.0;
  cfg.loss.use_text = false;
  cfg.degradation.orientation = "random";
  cfg.degradation.lowlight_gamma = 2.5;
  cfg.train.crop_size = 64;
  cfg.train.darken_augment = true;
  cfg.model.use_ddon = false;
  cfg.paths.ir_dir = "a";
  cfg.paths.vi_dir = "b";
  cfg.paths.out_dir = "c";

  auto back = ProjectConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.seed == 123);
  CHECK(back.tau == 0.3);
  CHECK(back.block.channels == 8);
  CHECK(back.loss.lambda2 == 50.0);
  CHECK(back.loss.use_text == false);
  CHECK(back.degradation.orientation == "random");
  CHECK(back.train.darken_augment == true);
  CHECK(back.model.use_ddon == false);
  CHECK(back.paths.out_dir == "c");
  CHECK(back.digest() == cfg.digest());
}

TEST_CASE("config: missing keys fall back to defaults") {
  auto cfg = ProjectConfig::from_json(R"({"seed": 5})");
  CHECK(cfg.seed == 5);
  CHECK(cfg.tau == kDefaultTau);
  CHECK(cfg.block.channels == BlockConfig{}.channels);
  CHECK(cfg.train.stage1_steps == TrainSettings{}.stage1_steps);
  CHECK(cfg.loss.lambda2 == 100.0);
}

TEST_CASE("config: unknown keys are rejected at the root and nested") {
  CHECK_THROWS_AS(ProjectConfig::from_json(R"({"sead": 5})"), std::invalid_argument);
  CHECK_THROWS_AS(ProjectConfig::from_json(R"({"block": {"channles": 16}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ProjectConfig::from_json(R"({"train": {"lr": 0.1}})"), std::invalid_argument);
  CHECK_THROWS_AS(ProjectConfig::from_json("not json"), std::invalid_argument);
}

TEST_CASE("config: validation rejects inconsistent settings") {
  ProjectConfig cfg;
  cfg.validate();

  auto expect_invalid = [](ProjectConfig c) { CHECK_THROWS_AS(c.validate(), std::invalid_argument); };
  {
    ProjectConfig c;
    c.tau = 2.5;
    expect_invalid(c);
  }
  {
    ProjectConfig c;
    c.train.crop_size = 0;
    expect_invalid(c);
  }
  {
    ProjectConfig c;
    c.train.crop_size = 100;  // not a multiple of the window
    c.block.window = 8;
    expect_invalid(c);
  }
  {
    ProjectConfig c;
    c.degradation.orientation = "diagonal";
    expect_invalid(c);
  }
  {
    ProjectConfig c;
    c.degradation.sigma_min = 20.0;
    c.degradation.sigma_max = 10.0;
    expect_invalid(c);
  }
  {
    ProjectConfig c;
    c.block.channels = 6;  // violates the block constraints
    expect_invalid(c);
  }
}

TEST_CASE("config: save and load through a file") {
  auto path = std::filesystem::temp_directory_path() / "ddf_cfg_test.json";
  ProjectConfig cfg;
  cfg.seed = 99;
  cfg.paths.out_dir = "runs/x";
  cfg.save(path.string());
  auto back = ProjectConfig::load(path.string());
  CHECK(back.seed == 99);
  CHECK(back.paths.out_dir == "runs/x");
  CHECK(back.digest() == cfg.digest());
  std::filesystem::remove(path);

  CHECK_THROWS(ProjectConfig::load("/nonexistent/cfg.json"));
}

TEST_CASE("config: digest is sensitive to each functional field") {
  ProjectConfig base;
  const auto d0 = base.digest();

  auto changed = [&](auto mutate) {
    ProjectConfig c;
    mutate(c);
    return c.digest();
  };
  CHECK(changed([](ProjectConfig& c) { c.seed = 8; }) != d0);
  CHECK(changed([](ProjectConfig& c) { c.tau = 0.26; }) != d0);
  CHECK(changed([](ProjectConfig& c) { c.block.channels = 32; }) != d0);
  CHECK(changed([](ProjectConfig& c) { c.loss.gamma2 = 4.0; }) != d0);
  CHECK(changed([](ProjectConfig& c) { c.train.batch_size = 8; }) != d0);
  CHECK(changed([](ProjectConfig& c) { c.model.use_ilgfn = false; }) != d0);
  // unchanged copy matches
  CHECK(changed([](ProjectConfig&) {}) == d0);
}

TEST_CASE("fnv1a64 reference values") {
  // published FNV-1a test vectors
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);
}
