#pragma once

#include "sdlab/types.hpp"

#include <utility>
#include <vector>

namespace sdlab {

// Variance schedule of the forward noising chain. Timesteps are 1-based:
// beta(1) is the first noising step, alpha_bar(t) = prod_{s<=t} (1 - beta_s).
// alpha_bar(0) is defined as 1 (the clean distribution).
struct NoiseSchedule {
  int t_max = 0;
  std::vector<double> betas;       // betas[t-1]
  std::vector<double> alpha_bars;  // alpha_bars[t-1]

  double beta(int t) const;
  double alpha_bar(int t) const;  // accepts t = 0
  double sigma(int t) const;      // sqrt(1 - alpha_bar(t))
};

NoiseSchedule make_linear_schedule(int t_max, double beta_start, double beta_end);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
Vec forward_diffuse(const Vec& z0, int t, const Vec& eps, const NoiseSchedule& s);

// Shrinks the upper end of the sampled timestep range linearly over the first
// anneal_steps optimization steps, then holds. Bounds are fractions of t_max.
struct TimestepAnnealer {
  double hi_start = 0.98;
  double hi_end = 0.5;
  double lo = 0.02;
  int anneal_steps = 1;

  void validate() const;
  // {lo_frac, hi_frac} for a given optimization step (0-based)
  std::pair<double, double> bounds(int opt_step) const;
};

int sample_timestep(const TimestepAnnealer& a, int opt_step, int t_max, Rng& rng);

}  // namespace sdlab
