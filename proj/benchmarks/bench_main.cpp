#include "sdlab/distill.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace sdlab;

struct BenchLab {
  World w;
  NoiseSchedule s;
  GaussianMixture prior;
  MixtureOracle uncond;
  OracleSet oracles;

  BenchLab()
      : w(make_world(42, WorldConfig{})),
        s(make_linear_schedule(1000, 1e-4, 0.02)),
        prior(prior_gmm(w)),
        uncond(prior, s),
        oracles(make_oracle_set(w, s, BiasConfig::defaults(w.cfg.d), BiasMode::InferenceZero)) {}
};

const BenchLab& lab() {
  static BenchLab l;
  return l;
}

void BM_PriorScore(benchmark::State& state) {
  const auto& l = lab();
  Rng rng(1);
  const Vec z = 0.3 * rng.normal_vec(l.w.cfg.d);
  for (auto _ : state) benchmark::DoNotOptimize(l.prior.score(z));
}
BENCHMARK(BM_PriorScore);

void BM_OraclePredict(benchmark::State& state) {
  const auto& l = lab();
  Rng rng(2);
  const Vec z = rng.normal_vec(l.w.cfg.d);
  for (auto _ : state) benchmark::DoNotOptimize(l.uncond.predict(z, 500));
}
BENCHMARK(BM_OraclePredict);

void BM_PredictJacobian(benchmark::State& state) {
  const auto& l = lab();
  Rng rng(3);
  const Vec z = rng.normal_vec(l.w.cfg.d);
  for (auto _ : state) benchmark::DoNotOptimize(l.uncond.predict_jacobian(z, 500));
}
BENCHMARK(BM_PredictJacobian);

void BM_Render(benchmark::State& state) {
  const auto& l = lab();
  for (auto _ : state) benchmark::DoNotOptimize(render(l.w.gt, l.w.input_op));
}
BENCHMARK(BM_Render);

void BM_ViewOperatorBuild(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(view_operator(Pose(0.7), 32, 48));
}
BENCHMARK(BM_ViewOperatorBuild);

void BM_GuidedSample50(benchmark::State& state) {
  const auto& l = lab();
  const auto cond = std::make_shared<MixtureOracle>(conditional_gmm(l.w, l.w.input_pose), l.s);
  GuidedPredictor guided = [&](const Vec& z, int t) {
    return cfg_collapsed(cond->predict(z, t), l.uncond.predict(z, t), 7.5);
  };
  for (auto _ : state)
    benchmark::DoNotOptimize(guided_sample(guided, l.s, FromPureNoise{l.w.cfg.d}, 50, 0.0, 7));
}
BENCHMARK(BM_GuidedSample50)->Unit(benchmark::kMillisecond);

void BM_DistillStep(benchmark::State& state) {
  const auto& l = lab();
  Rng rng(4);
  const ObjectGrid theta = l.w.gt;
  const Vec render_now = render_at(l.w, theta, 0);
  const int t = 600;
  const double ab = l.s.alpha_bar(t);
  for (auto _ : state) {
    const Vec eps = rng.normal_vec(l.w.cfg.d);
    const Vec z_t = std::sqrt(ab) * render_now + std::sqrt(1.0 - ab) * eps;
    const Vec r = usd_residual(l.oracles.conditional[0]->predict(z_t, t),
                               l.oracles.uncond_exact->predict(z_t, t), 7.5);
    benchmark::DoNotOptimize(Vec(std::sqrt(ab) * (l.w.op_at(0).m.transpose() * r)));
  }
}
BENCHMARK(BM_DistillStep);

void BM_ReferenceViewLoss(benchmark::State& state) {
  const auto& l = lab();
  const Vec y = input_view(l.w).first;
  for (auto _ : state)
    benchmark::DoNotOptimize(reference_view_loss(l.w.gt, y, l.w, l.uncond, 300, l.s, 5));
}
BENCHMARK(BM_ReferenceViewLoss);

}  // namespace

BENCHMARK_MAIN();
