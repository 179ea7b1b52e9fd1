#include "sdlab/distill.hpp"

#include <doctest.h>

#include <cmath>

using namespace sdlab;

namespace {

struct Fixture {
  WorldConfig cfg;
  World w;
  NoiseSchedule sched;

  Fixture()
      : cfg(make_cfg()),
        w(make_world(21, cfg)),
        sched(make_linear_schedule(1000, 1e-4, 0.02)) {}

  static WorldConfig make_cfg() {
    WorldConfig c;
    c.n = 16;
    c.d = 20;
    c.pose_count = 8;
    return c;
  }
};

}  // namespace

TEST_CASE("engine names round trip") {
  for (Engine e : {Engine::Sds, Engine::Lambda, Engine::Usd, Engine::Dds, Engine::Csd,
                   Engine::VsdLite})
    CHECK(engine_from_name(engine_name(e)) == e);
  CHECK_THROWS_AS(engine_from_name("pixie"), ConfigError);
}

TEST_CASE("residual algebra") {
  Rng rng(3);
  const Vec c = rng.normal_vec(6), u = rng.normal_vec(6), e = rng.normal_vec(6);
  const double omega = 7.5;

  CHECK((sds_residual(c, e) - (c - e)).norm() == 0.0);

  // lambda = 1 recovers the classic guided residual
  const Vec classic = sds_residual(cfg_collapsed(c, u, omega), e);
  CHECK((lambda_residual(c, u, e, omega, 1.0) - classic).norm() < 1e-12);

  // lambda = 0 drops the noise-vs-unconditional term entirely
  CHECK((lambda_residual(c, u, e, omega, 0.0) - omega * (c - u)).norm() == 0.0);
  CHECK((usd_residual(c, u, omega) - omega * (c - u)).norm() == 0.0);
  CHECK((dds_residual(c, u, omega) - omega * (c - u)).norm() == 0.0);
}

TEST_CASE("vsd aux predictor") {
  VsdAux aux = VsdAux::make(5, 1000);
  CHECK(aux.bucket_of(1) == 0);
  CHECK(aux.bucket_of(125) == 0);
  CHECK(aux.bucket_of(126) == 1);
  CHECK(aux.bucket_of(1000) == 7);
  CHECK_THROWS_AS(aux.bucket_of(0), std::out_of_range);
  CHECK_THROWS_AS(aux.bucket_of(1001), std::out_of_range);
  CHECK_THROWS_AS(VsdAux::make(0, 1000), std::invalid_argument);

  // zero-initialized: predicts zero, so the residual reduces to
  // omega (c - u) + u
  Rng rng(9);
  const Vec c = rng.normal_vec(5), u = rng.normal_vec(5), z = rng.normal_vec(5);
  CHECK((vsd_lite_residual(c, u, aux, z, 100, 7.5) - (7.5 * (c - u) + u)).norm() == 0.0);

  // online updates pull the bucket toward a fixed target
  const Vec target = Vec::Constant(5, 0.8);
  for (int i = 0; i < 400; ++i) aux.update(rng.normal_vec(5), 50, target);
  const Vec pred = aux.predict(rng.normal_vec(5), 50);
  CHECK((pred - target).norm() < 0.25 * target.norm());
  // other buckets untouched
  CHECK(aux.predict(z, 900).norm() == 0.0);
}

TEST_CASE("oracle set wiring") {
  const Fixture f;
  const OracleSet plain =
      make_oracle_set(f.w, f.sched, BiasConfig::none(f.cfg.d), BiasMode::TrainMatched);
  CHECK(plain.conditional.size() == 8);
  CHECK(plain.pose_marginal.size() == 8);
  CHECK(plain.mode_means.size() == 8);
  CHECK(plain.mode_means[0].size() == 3);
  CHECK(plain.sigma_c == f.cfg.sigma_c);

  Rng rng(14);
  const Vec z = 0.3 * rng.normal_vec(f.cfg.d);
  // bias disabled: the run branch is the exact prior
  CHECK((plain.uncond_run->predict(z, 300) - plain.uncond_exact->predict(z, 300)).norm() < 1e-12);

  const OracleSet biased =
      make_oracle_set(f.w, f.sched, BiasConfig::defaults(f.cfg.d), BiasMode::InferenceZero);
  CHECK((biased.uncond_run->predict(z, 300) - biased.uncond_exact->predict(z, 300)).norm() > 0.01);
  // conditional branches are never biased
  CHECK((biased.conditional[0]->predict(z, 300) - plain.conditional[0]->predict(z, 300)).norm() ==
        0.0);
}

TEST_CASE("reference view loss vanishes when the render matches the observation") {
  const Fixture f;
  const MixtureOracle uncond(prior_gmm(f.w), f.sched);
  const Vec y = render(f.w.gt, f.w.input_op);
  const RefViewEval ev = reference_view_loss(f.w.gt, y, f.w, uncond, 300, f.sched, 4242);
  CHECK(ev.loss <= 1e-12);
  CHECK(ev.grad.norm() <= 1e-12);
}

TEST_CASE("reference view gradient matches finite differences") {
  const Fixture f;
  const MixtureOracle uncond(prior_gmm(f.w), f.sched);
  const Vec y = input_view(f.w).first;

  ObjectGrid theta = f.w.gt;
  theta.values = 0.8 * theta.values + Vec::Constant(theta.values.size(), 0.05);

  const int t = 300;
  const std::uint64_t seed = 99;
  const RefViewEval ev = reference_view_loss(theta, y, f.w, uncond, t, f.sched, seed);
  CHECK(ev.loss > 0.0);

  const double h = 1e-6;
  for (int p : {0, 37, 128, 200, 255}) {
    ObjectGrid up = theta, dn = theta;
    up.values[p] += h;
    dn.values[p] -= h;
    const double fd = (reference_view_loss(up, y, f.w, uncond, t, f.sched, seed).loss -
                       reference_view_loss(dn, y, f.w, uncond, t, f.sched, seed).loss) /
                      (2 * h);
    CHECK(ev.grad[p] == doctest::Approx(fd).epsilon(1e-4));
  }

  // implicit-observation overload routes through the stored input view
  const RefViewEval via = reference_view_loss(theta, f.w, uncond, t, f.sched, seed);
  CHECK(via.loss == ev.loss);

  ObjectGrid wrong = ObjectGrid::zero(8);
  CHECK_THROWS_AS(reference_view_loss(wrong, y, f.w, uncond, t, f.sched, seed),
                  std::invalid_argument);
}

TEST_CASE("distill config validation") {
  DistillConfig cfg;
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = DistillConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = DistillConfig{};
  cfg.omega = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = DistillConfig{};
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = DistillConfig{};
  cfg.beta_rv = -0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  DistillConfig ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("distillation improves the render and stays deterministic") {
  const Fixture f;
  const OracleSet o =
      make_oracle_set(f.w, f.sched, BiasConfig::none(f.cfg.d), BiasMode::TrainMatched);

  DistillConfig cfg;
  cfg.engine = Engine::Usd;
  cfg.steps = 200;
  cfg.seed = 5;

  const DistillRun run = distill_run(f.w, o, cfg);
  REQUIRE(run.trajectory.size() == 200);
  CHECK(run.trajectory.front().step == 0);
  CHECK(run.trajectory.back().step == 199);
  for (const auto& p : run.trajectory) {
    CHECK(p.t >= 20);   // annealer floor: 0.02 * 1000
    CHECK(p.t <= 980);  // annealer ceiling: 0.98 * 1000
  }
  // after the anneal window (steps/2 = 100) the ceiling has dropped to 0.5
  for (std::size_t i = 150; i < run.trajectory.size(); ++i)
    CHECK(run.trajectory[i].t <= 500);

  CHECK(run.trajectory.back().psnr_gt > run.trajectory.front().psnr_gt + 3.0);

  const DistillRun again = distill_run(f.w, o, cfg);
  CHECK((run.theta.values - again.theta.values).norm() == 0.0);

  DistillConfig other = cfg;
  other.seed = 6;
  CHECK((run.theta.values - distill_run(f.w, o, other).theta.values).norm() > 0.0);
}

TEST_CASE("every engine runs a few steps without incident") {
  const Fixture f;
  const OracleSet o =
      make_oracle_set(f.w, f.sched, BiasConfig::defaults(f.cfg.d), BiasMode::TrainMatched);
  for (Engine e : {Engine::Sds, Engine::Lambda, Engine::Usd, Engine::Dds, Engine::Csd,
                   Engine::VsdLite}) {
    DistillConfig cfg;
    cfg.engine = e;
    cfg.lambda = 0.5;
    cfg.steps = 12;
    cfg.seed = 77;
    const DistillRun run = distill_run(f.w, o, cfg);
    CHECK(run.trajectory.size() == 12);
    CHECK(run.theta.values.allFinite());
  }

  // the general combiner path on the Sds engine
  DistillConfig gen;
  gen.engine = Engine::Sds;
  gen.use_general_cfg = true;
  gen.alpha1 = 5.0;
  gen.alpha2 = 10.0;
  gen.steps = 12;
  CHECK_NOTHROW(distill_run(f.w, o, gen));
}

TEST_CASE("divergence aborts instead of emitting garbage") {
  const Fixture f;
  const OracleSet o =
      make_oracle_set(f.w, f.sched, BiasConfig::none(f.cfg.d), BiasMode::TrainMatched);
  DistillConfig cfg;
  cfg.optimizer = OptimizerKind::PlainSgd;
  cfg.learning_rate = 1e308;
  cfg.steps = 8;
  CHECK_THROWS_AS(distill_run(f.w, o, cfg), NumericalAbort);
}

TEST_CASE("residual variance estimator") {
  const Fixture f;
  const OracleSet o =
      make_oracle_set(f.w, f.sched, BiasConfig::defaults(f.cfg.d), BiasMode::InferenceZero);
  const int t = 600;

  CHECK_THROWS_AS(residual_variance(f.w, o, Engine::Usd, f.w.gt, t, 1, 7.5, 0.0, 1),
                  std::invalid_argument);

  const double v1 = residual_variance(f.w, o, Engine::Usd, f.w.gt, t, 500, 7.5, 0.0, 11);
  const double v2 = residual_variance(f.w, o, Engine::Usd, f.w.gt, t, 500, 7.5, 0.0, 11);
  CHECK(v1 == v2);
  CHECK(v1 > 0.0);

  // csd is the lambda = 0 point of the family, so the estimates coincide
  const double vc = residual_variance(f.w, o, Engine::Csd, f.w.gt, t, 300, 7.5, 0.0, 13);
  const double vl = residual_variance(f.w, o, Engine::Lambda, f.w.gt, t, 300, 7.5, 0.0, 13);
  CHECK(vc == vl);
}
