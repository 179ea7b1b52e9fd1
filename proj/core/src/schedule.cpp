#include "sdlab/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace sdlab {

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > t_max) throw std::out_of_range("schedule: beta(t) with t outside [1, t_max]");
  return betas[static_cast<std::size_t>(t) - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  if (t < 0 || t > t_max) throw std::out_of_range("schedule: alpha_bar(t) with t outside [0, t_max]");
  return alpha_bars[static_cast<std::size_t>(t) - 1];
}

double NoiseSchedule::sigma(int t) const { return std::sqrt(1.0 - alpha_bar(t)); }

NoiseSchedule make_linear_schedule(int t_max, double beta_start, double beta_end) {
  if (t_max < 1) throw std::invalid_argument("schedule: t_max must be >= 1");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || !(beta_start <= beta_end))
    throw std::invalid_argument("schedule: need 0 < beta_start <= beta_end < 1");

  NoiseSchedule s;
  s.t_max = t_max;
  s.betas.resize(static_cast<std::size_t>(t_max));
  s.alpha_bars.resize(static_cast<std::size_t>(t_max));
  double prod = 1.0;
  for (int t = 1; t <= t_max; ++t) {
    const double frac = (t_max == 1) ? 0.0 : static_cast<double>(t - 1) / (t_max - 1);
    const double b = beta_start + (beta_end - beta_start) * frac;
    prod *= 1.0 - b;
    s.betas[static_cast<std::size_t>(t) - 1] = b;
    s.alpha_bars[static_cast<std::size_t>(t) - 1] = prod;
  }
  return s;
}

Vec forward_diffuse(const Vec& z0, int t, const Vec& eps, const NoiseSchedule& s) {
  if (z0.size() != eps.size()) throw std::invalid_argument("forward_diffuse: z0/eps size mismatch");
  const double ab = s.alpha_bar(t);
  return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * eps;
}

void TimestepAnnealer::validate() const {
  auto in01 = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in01(hi_start) || !in01(hi_end) || !in01(lo))
    throw std::invalid_argument("annealer: bounds must lie strictly inside (0, 1)");
  if (lo >= hi_end || lo >= hi_start)
    throw std::invalid_argument("annealer: lo must stay below both hi bounds");
  if (anneal_steps < 1) throw std::invalid_argument("annealer: anneal_steps must be >= 1");
}

std::pair<double, double> TimestepAnnealer::bounds(int opt_step) const {
  validate();
  const double f = std::clamp(static_cast<double>(opt_step) / anneal_steps, 0.0, 1.0);
  return {lo, hi_start + (hi_end - hi_start) * f};
}

int sample_timestep(const TimestepAnnealer& a, int opt_step, int t_max, Rng& rng) {
  const auto [lo_f, hi_f] = a.bounds(opt_step);
  const int t_lo = std::max(1, static_cast<int>(std::ceil(lo_f * t_max)));
  const int t_hi = std::max(t_lo, static_cast<int>(std::floor(hi_f * t_max)));
  return rng.uniform_int(t_lo, t_hi);
}

}  // namespace sdlab
