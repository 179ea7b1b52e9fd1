#include "sdlab/config.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace sdlab;

TEST_CASE("defaults and typed access") {
  const ExperimentConfig c = ExperimentConfig::defaults();
  CHECK(c.i64("schedule.t_max") == 1000);
  CHECK(c.f64("guidance.omega") == 7.5);
  CHECK(c.flag("bias.enabled"));
  CHECK_FALSE(c.flag("distill.rv_compare"));
  CHECK(c.str("distill.engine") == "usd");

  const auto lams = c.f64_list("lambda_sweep.values");
  REQUIRE(lams.size() == 3);
  CHECK(lams[1] == 0.5);
  const auto ts = c.int_list("denoise.t_levels");
  REQUIRE(ts.size() == 4);
  CHECK(ts[3] == 300);
}

TEST_CASE("unknown keys and malformed values fail loudly") {
  ExperimentConfig c = ExperimentConfig::defaults();
  CHECK_THROWS_AS(c.set("world.shape", "round"), ConfigError);
  CHECK_THROWS_AS(c.set("world.n", ""), ConfigError);
  CHECK_THROWS_AS(c.str("no.such.key"), ConfigError);

  c.set("world.n", "banana");
  CHECK_THROWS_AS(c.i64("world.n"), ConfigError);
  c.set("world.n", "12.5");
  CHECK_THROWS_AS(c.i64("world.n"), ConfigError);
  c.set("world.sigma_c", "0.05x");
  CHECK_THROWS_AS(c.f64("world.sigma_c"), ConfigError);
  c.set("bias.enabled", "maybe");
  CHECK_THROWS_AS(c.flag("bias.enabled"), ConfigError);
  c.set("denoise.t_levels", "50,,100");
  CHECK_THROWS_AS(c.int_list("denoise.t_levels"), ConfigError);
  c.set("denoise.t_levels", "50,100.5");
  CHECK_THROWS_AS(c.int_list("denoise.t_levels"), ConfigError);
}

TEST_CASE("boolean spellings") {
  ExperimentConfig c = ExperimentConfig::defaults();
  for (const char* v : {"true", "1", "on"}) {
    c.set("bias.enabled", v);
    CHECK(c.flag("bias.enabled"));
  }
  for (const char* v : {"false", "0", "off"}) {
    c.set("bias.enabled", v);
    CHECK_FALSE(c.flag("bias.enabled"));
  }
}

TEST_CASE("set_pair splits on the first equals sign") {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.set_pair("guidance.omega=5");
  CHECK(c.f64("guidance.omega") == 5.0);
  c.set_pair(" world.n = 24 ");
  CHECK(c.i64("world.n") == 24);
  CHECK_THROWS_AS(c.set_pair("guidance.omega"), ConfigError);
}

TEST_CASE("canonical form and hashing") {
  const ExperimentConfig a = ExperimentConfig::defaults();
  ExperimentConfig b = ExperimentConfig::defaults();
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);

  b.set("guidance.omega", "5");
  CHECK(a.hash() != b.hash());
  b.set("guidance.omega", "7.5");
  CHECK(a.hash() == b.hash());

  // canonical output is sorted, one key per line
  const std::string canon = a.canonical();
  CHECK(canon.find("alpha_sweep.values=5,7.5,10\n") == 0);
  CHECK(canon.find("schedule.t_max=1000\n") != std::string::npos);

  // reference vectors for the underlying hash
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("config files parse with comments and report bad lines") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "sdlab_config_test";
  fs::create_directories(dir);
  const fs::path good = dir / "good.cfg";
  {
    std::ofstream os(good);
    os << "# reconstruction run\n"
       << "\n"
       << "world.n = 24   # smaller grid\n"
       << "guidance.omega=5\n";
  }
  const ExperimentConfig c = ExperimentConfig::from_file(good.string());
  CHECK(c.i64("world.n") == 24);
  CHECK(c.f64("guidance.omega") == 5.0);
  CHECK(c.i64("schedule.t_max") == 1000);  // untouched defaults remain

  const fs::path bad_key = dir / "bad_key.cfg";
  {
    std::ofstream os(bad_key);
    os << "world.n = 24\nworld.shape = round\n";
  }
  try {
    ExperimentConfig::from_file(bad_key.string());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("world.shape") != std::string::npos);
    CHECK(msg.find(":2") != std::string::npos);  // line number
  }

  const fs::path no_eq = dir / "no_eq.cfg";
  {
    std::ofstream os(no_eq);
    os << "world.n 24\n";
  }
  CHECK_THROWS_AS(ExperimentConfig::from_file(no_eq.string()), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_file((dir / "missing.cfg").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("typed builders assemble the run objects") {
  ExperimentConfig c = ExperimentConfig::defaults();
  const NoiseSchedule s = c.schedule();
  CHECK(s.t_max == 1000);
  CHECK(s.beta(1) == 0.0001);

  const WorldConfig w = c.world_config();
  CHECK(w.n == 32);
  CHECK(w.d == 48);
  CHECK(w.pose_count == 16);
  CHECK(w.sigma_c == 0.05);
  CHECK(c.world_seed() == 42);

  const BiasConfig biased = c.bias_config(8);
  CHECK(biased.gamma == 2.0);
  // offset magnitudes are per latent unit: Euclidean norm scales with sqrt(dim)
  CHECK(biased.offset_train.norm() == doctest::Approx(0.1 * std::sqrt(8.0)).epsilon(1e-12));
  CHECK(biased.offset_zero.norm() == doctest::Approx(0.3 * std::sqrt(8.0)).epsilon(1e-12));
  CHECK((3.0 * biased.offset_train - biased.offset_zero).norm() < 1e-12);
  c.set("bias.enabled", "false");
  const BiasConfig off = c.bias_config(8);
  CHECK(off.gamma == 0.0);
  CHECK(off.offset_zero.norm() == 0.0);

  CHECK(c.bias_mode() == BiasMode::InferenceZero);
  c.set("bias.mode", "train_matched");
  CHECK(c.bias_mode() == BiasMode::TrainMatched);
  c.set("bias.mode", "sideways");
  CHECK_THROWS_AS(c.bias_mode(), ConfigError);

  c = ExperimentConfig::defaults();
  DistillConfig d = c.distill_config();
  CHECK(d.engine == Engine::Usd);
  CHECK(d.omega == 7.5);
  CHECK(d.steps == 800);
  CHECK(d.optimizer == OptimizerKind::AdaptiveMoment);
  CHECK(d.wt == WtKind::Uniform);
  CHECK(d.include_sqrt_alpha_in_chain);
  CHECK(d.annealer.hi_start == 0.98);
  CHECK(d.seed == 1234);

  c.set("distill.optimizer", "sgd");
  c.set("distill.wt", "one_minus_alpha_bar");
  d = c.distill_config();
  CHECK(d.optimizer == OptimizerKind::PlainSgd);
  CHECK(d.wt == WtKind::OneMinusAlphaBar);
  c.set("distill.optimizer", "lion");
  CHECK_THROWS_AS(c.distill_config(), ConfigError);
  c.set("distill.optimizer", "adam");
  c.set("distill.wt", "cosine");
  CHECK_THROWS_AS(c.distill_config(), ConfigError);
  c.set("distill.wt", "uniform");
  c.set("distill.engine", "warp");
  CHECK_THROWS_AS(c.distill_config(), ConfigError);
}
