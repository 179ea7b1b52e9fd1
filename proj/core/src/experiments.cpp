#include "sdlab/experiments.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace sdlab {

std::vector<double> SweepResult::medians() const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& cell : values) out.push_back(median(cell));
  return out;
}

std::vector<double> SweepResult::iqrs() const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& cell : values) out.push_back(iqr(cell));
  return out;
}

int SweepResult::best_cell(bool higher_is_better) const {
  const std::vector<double> med = medians();
  int best = 0;
  for (int i = 1; i < static_cast<int>(med.size()); ++i) {
    const bool better = higher_is_better ? med[static_cast<std::size_t>(i)] > med[static_cast<std::size_t>(best)]
                                         : med[static_cast<std::size_t>(i)] < med[static_cast<std::size_t>(best)];
    if (better) best = i;
  }
  return best;
}

int worker_count() {
  if (const char* env = std::getenv("SDLAB_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_jobs(int n_jobs, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n_jobs);
  if (workers <= 1) {
    for (int i = 0; i < n_jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mu;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int wi = 0; wi < workers; ++wi) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_jobs) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, int count) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    seeds[static_cast<std::size_t>(i)] = mix_seed(base, 7000 + static_cast<std::uint64_t>(i));
  return seeds;
}

namespace {

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct UncondVariant {
  std::string name;
  std::shared_ptr<EpsilonPredictor> pred;
};

std::vector<UncondVariant> uncond_variants(const GaussianMixture& prior, const BiasConfig& bias,
                                           const NoiseSchedule& s) {
  std::vector<UncondVariant> out;
  out.push_back({"exact", std::make_shared<MixtureOracle>(prior, s)});
  out.push_back({"train_matched",
                 std::shared_ptr<EpsilonPredictor>(
                     make_biased_unconditional(prior, bias, BiasMode::TrainMatched, s))});
  out.push_back({"inference_zero",
                 std::shared_ptr<EpsilonPredictor>(
                     make_biased_unconditional(prior, bias, BiasMode::InferenceZero, s))});
  return out;
}

}  // namespace

SweepResult denoise_benchmark(const World& w, const NoiseSchedule& s,
                              const std::vector<int>& t_levels, int n_seeds, double omega,
                              double eta, const BiasConfig& bias, std::uint64_t base_seed) {
  SweepResult res;
  res.experiment = "denoise_bench";
  res.metric = "psnr";
  res.seeds = seed_list(base_seed, n_seeds);

  const GaussianMixture prior = prior_gmm(w);
  const auto variants = uncond_variants(prior, bias, s);
  const auto cond = std::make_shared<MixtureOracle>(conditional_gmm(w, w.input_pose), s);
  const Vec z0 = render(w.gt, w.input_op);

  for (const auto& var : variants)
    for (int t : t_levels) res.cells.push_back(var.name + "_t" + std::to_string(t));
  res.values.assign(res.cells.size(), std::vector<double>(static_cast<std::size_t>(n_seeds)));
  std::vector<std::vector<double>> ssim_vals = res.values;

  const int n_cells = static_cast<int>(res.cells.size());
  const int n_t = static_cast<int>(t_levels.size());
  parallel_jobs(n_cells * n_seeds, [&](int job) {
    const int ci = job / n_seeds;
    const int si = job % n_seeds;
    const auto& variant = variants[static_cast<std::size_t>(ci / n_t)];
    const int t = t_levels[static_cast<std::size_t>(ci % n_t)];

    Rng noise_rng(mix_seed(res.seeds[static_cast<std::size_t>(si)], static_cast<std::uint64_t>(t)));
    const Vec z_t = forward_diffuse(z0, t, noise_rng.normal_vec(w.cfg.d), s);

    GuidedPredictor guided = [&](const Vec& z, int tt) {
      return cfg_collapsed(cond->predict(z, tt), variant.pred->predict(z, tt), omega);
    };
    const Vec z_rec = guided_sample(guided, s, FromNoisedLatent{z_t, t}, t, eta,
                                    mix_seed(res.seeds[static_cast<std::size_t>(si)], 77));
    res.values[static_cast<std::size_t>(ci)][static_cast<std::size_t>(si)] = psnr(z_rec, z0);
    ssim_vals[static_cast<std::size_t>(ci)][static_cast<std::size_t>(si)] =
        ssim_signal(z_rec, z0);
  });

  res.extra.emplace_back("ssim", std::move(ssim_vals));
  return res;
}

SweepResult gap_curve(const World& w, const NoiseSchedule& s, const std::vector<int>& t_levels,
                      int n_draws, int n_seeds, const BiasConfig& bias, std::uint64_t base_seed) {
  SweepResult res;
  res.experiment = "gap_curve";
  res.metric = "gap";
  res.seeds = seed_list(base_seed, n_seeds);

  const GaussianMixture prior = prior_gmm(w);
  const auto variants = uncond_variants(prior, bias, s);
  const Vec z0 = render(w.gt, w.input_op);

  for (const auto& var : variants)
    for (int t : t_levels) res.cells.push_back(var.name + "_t" + std::to_string(t));
  res.values.assign(res.cells.size(), std::vector<double>(static_cast<std::size_t>(n_seeds)));

  const int n_t = static_cast<int>(t_levels.size());
  parallel_jobs(static_cast<int>(res.cells.size()) * n_seeds, [&](int job) {
    const int ci = job / n_seeds;
    const int si = job % n_seeds;
    const auto& variant = variants[static_cast<std::size_t>(ci / n_t)];
    const int t = t_levels[static_cast<std::size_t>(ci % n_t)];
    res.values[static_cast<std::size_t>(ci)][static_cast<std::size_t>(si)] = noise_prediction_gap(
        *variant.pred, z0, t, n_draws,
        s, mix_seed(res.seeds[static_cast<std::size_t>(si)], static_cast<std::uint64_t>(t)));
  });
  return res;
}

namespace {

SweepResult distill_sweep(const std::string& name, const World& w, const OracleSet& o,
                          const std::vector<std::string>& cells,
                          const std::function<DistillConfig(int)>& cell_config, int n_seeds,
                          std::uint64_t base_seed) {
  SweepResult res;
  res.experiment = name;
  res.metric = "psnr";
  res.cells = cells;
  res.seeds = seed_list(base_seed, n_seeds);
  res.values.assign(cells.size(), std::vector<double>(static_cast<std::size_t>(n_seeds)));
  std::vector<std::vector<double>> ssim_vals = res.values;

  parallel_jobs(static_cast<int>(cells.size()) * n_seeds, [&](int job) {
    const int ci = job / n_seeds;
    const int si = job % n_seeds;
    DistillConfig cfg = cell_config(ci);
    cfg.seed = res.seeds[static_cast<std::size_t>(si)];
    const DistillRun run = distill_run(w, o, cfg);
    const ObjectGrid rec = clamp01(run.theta);
    res.values[static_cast<std::size_t>(ci)][static_cast<std::size_t>(si)] = psnr(rec, w.gt);
    ssim_vals[static_cast<std::size_t>(ci)][static_cast<std::size_t>(si)] = ssim(rec, w.gt);
  });

  res.extra.emplace_back("ssim", std::move(ssim_vals));
  return res;
}

}  // namespace

SweepResult lambda_sweep(const World& w, const OracleSet& o, const std::vector<double>& lambdas,
                         const DistillConfig& base, int n_seeds) {
  std::vector<std::string> cells;
  for (double l : lambdas) cells.push_back("lambda=" + fmt_num(l));
  return distill_sweep("lambda_sweep", w, o, cells,
                       [&](int ci) {
                         DistillConfig cfg = base;
                         cfg.engine = Engine::Lambda;
                         cfg.lambda = lambdas[static_cast<std::size_t>(ci)];
                         return cfg;
                       },
                       n_seeds, base.seed);
}

SweepResult alpha_sweep(const World& w, const OracleSet& o, const std::vector<double>& alphas,
                        const DistillConfig& base, int n_seeds) {
  const int g = static_cast<int>(alphas.size());
  std::vector<std::string> cells;
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      cells.push_back("a1=" + fmt_num(alphas[static_cast<std::size_t>(i)]) +
                      "_a2=" + fmt_num(alphas[static_cast<std::size_t>(j)]));
  return distill_sweep("alpha_sweep", w, o, cells,
                       [&](int ci) {
                         DistillConfig cfg = base;
                         cfg.engine = Engine::Sds;
                         cfg.use_general_cfg = true;
                         cfg.alpha1 = alphas[static_cast<std::size_t>(ci / g)];
                         cfg.alpha2 = alphas[static_cast<std::size_t>(ci % g)];
                         return cfg;
                       },
                       n_seeds, base.seed);
}

SweepResult engine_compare(const World& w, const OracleSet& o, const std::vector<Engine>& engines,
                           const DistillConfig& base, int n_seeds) {
  std::vector<std::string> cells;
  for (Engine e : engines) cells.push_back(engine_name(e));
  SweepResult res = distill_sweep("engine_compare", w, o, cells,
                                  [&](int ci) {
                                    DistillConfig cfg = base;
                                    cfg.engine = engines[static_cast<std::size_t>(ci)];
                                    return cfg;
                                  },
                                  n_seeds, base.seed);

  // residual spread at a fixed mid-chain noise level, secondary metric
  std::vector<std::vector<double>> var_vals(cells.size(),
                                            std::vector<double>(static_cast<std::size_t>(n_seeds)));
  const int t_var = std::max(1, static_cast<int>(0.6 * o.sched.t_max));
  parallel_jobs(static_cast<int>(cells.size()) * n_seeds, [&](int job) {
    const int ci = job / n_seeds;
    const int si = job % n_seeds;
    var_vals[static_cast<std::size_t>(ci)][static_cast<std::size_t>(si)] = residual_variance(
        w, o, engines[static_cast<std::size_t>(ci)], w.gt, t_var, 2000, base.omega, base.lambda,
        mix_seed(res.seeds[static_cast<std::size_t>(si)], 0x7A));
  });
  res.extra.emplace_back("residual_variance", std::move(var_vals));
  return res;
}

SweepResult sampler_compare(const World& w, const NoiseSchedule& s, double omega, int steps,
                            int n_seeds, const BiasConfig& bias, BiasMode mode,
                            std::uint64_t base_seed) {
  SweepResult res;
  res.experiment = "sampler_compare";
  res.metric = "l2_error";
  res.seeds = seed_list(base_seed, n_seeds);
  res.cells = {"collapsed", "rectified"};
  res.values.assign(res.cells.size(), std::vector<double>(static_cast<std::size_t>(n_seeds)));

  const GaussianMixture prior = prior_gmm(w);
  const auto cond = std::make_shared<MixtureOracle>(conditional_gmm(w, w.input_pose), s);
  const auto uncond_exact = std::make_shared<MixtureOracle>(prior, s);
  const std::shared_ptr<EpsilonPredictor> uncond_run(
      make_biased_unconditional(prior, bias, mode, s));
  const Vec target = render(w.gt, w.input_op);

  parallel_jobs(2 * n_seeds, [&](int job) {
    const int ci = job / n_seeds;
    const int si = job % n_seeds;
    GuidedPredictor guided;
    if (ci == 0) {
      guided = [&](const Vec& z, int t) {
        return cfg_collapsed(cond->predict(z, t), uncond_run->predict(z, t), omega);
      };
    } else {
      guided = [&](const Vec& z, int t) {
        return cfg_rectified(cond->predict(z, t), uncond_exact->predict(z, t), omega);
      };
    }
    const Vec sample = guided_sample(guided, s, FromPureNoise{w.cfg.d}, steps, 0.0,
                                     res.seeds[static_cast<std::size_t>(si)]);
    res.values[static_cast<std::size_t>(ci)][static_cast<std::size_t>(si)] =
        (sample - target).norm();
  });
  return res;
}

}  // namespace sdlab
