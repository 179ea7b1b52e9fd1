#pragma once

#include "sdlab/distill.hpp"
#include "sdlab/metrics.hpp"

#include <functional>

namespace sdlab {

// One sweep: a grid of named cells, each evaluated over the same list of
// seeds (paired comparisons), one primary metric per (cell, seed).
struct SweepResult {
  std::string experiment;
  std::string metric = "psnr";
  std::vector<std::string> cells;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> values;  // [cell][seed]
  // secondary metrics, same shape as values, keyed by name
  std::vector<std::pair<std::string, std::vector<std::vector<double>>>> extra;

  std::vector<double> medians() const;
  std::vector<double> iqrs() const;
  int best_cell(bool higher_is_better = true) const;
};

// Worker budget: SDLAB_WORKERS when set (>= 1), else hardware concurrency.
int worker_count();

// Runs fn(0..n_jobs) on the worker pool; fn must write only to its own slot.
void parallel_jobs(int n_jobs, const std::function<void(int)>& fn);

std::vector<std::uint64_t> seed_list(std::uint64_t base, int count);

// Reconstruction from a noised input-view latent, guided by the conditional
// oracle combined with each unconditional variant. Cells are
// {exact, train_matched, inference_zero} x t_levels.
SweepResult denoise_benchmark(const World& w, const NoiseSchedule& s,
                              const std::vector<int>& t_levels, int n_seeds, double omega,
                              double eta, const BiasConfig& bias, std::uint64_t base_seed);

// noise_prediction_gap of the three unconditional variants across noise
// levels, at the clean input-view latent.
SweepResult gap_curve(const World& w, const NoiseSchedule& s, const std::vector<int>& t_levels,
                      int n_draws, int n_seeds, const BiasConfig& bias, std::uint64_t base_seed);

// Distillation PSNR across the lambda family (biased unconditional branch).
SweepResult lambda_sweep(const World& w, const OracleSet& o, const std::vector<double>& lambdas,
                         const DistillConfig& base, int n_seeds);

// Distillation PSNR over a grid of two-scale guidance weights
// (general combiner inside an Sds-style residual).
SweepResult alpha_sweep(const World& w, const OracleSet& o, const std::vector<double>& alphas,
                        const DistillConfig& base, int n_seeds);

// Distillation PSNR per engine, plus residual variance as a secondary metric.
SweepResult engine_compare(const World& w, const OracleSet& o, const std::vector<Engine>& engines,
                           const DistillConfig& base, int n_seeds);

// Error of pure-noise guided samples against the true input-view latent,
// collapsed combiner on the run branch vs rectified combiner on the exact
// branch. Lower is better (metric = l2 error).
SweepResult sampler_compare(const World& w, const NoiseSchedule& s, double omega, int steps,
                            int n_seeds, const BiasConfig& bias, BiasMode mode,
                            std::uint64_t base_seed);

}  // namespace sdlab
