#include "sdlab/guidance.hpp"

#include <algorithm>
#include <cmath>

namespace sdlab {

Vec cfg_general(const Vec& eps_full, const Vec& eps_partial, const Vec& eps_uncond, double a1,
                double a2) {
  return a1 * (eps_full - eps_partial) + a2 * (eps_partial - eps_uncond) + eps_uncond;
}

Vec cfg_collapsed(const Vec& eps_cond, const Vec& eps_uncond, double omega) {
  return omega * (eps_cond - eps_uncond) + eps_uncond;
}

Vec cfg_rectified(const Vec& eps_cond_finetuned, const Vec& eps_uncond_base, double omega) {
  return cfg_collapsed(eps_cond_finetuned, eps_uncond_base, omega);
}

namespace {

// Descending timesteps from t_start down to 1. With fewer steps than the
// chain length the schedule is strided evenly (endpoints kept).
std::vector<int> sub_schedule(int t_start, int steps) {
  if (t_start < 1) throw std::invalid_argument("sampler: start level must be >= 1");
  if (steps < 1) throw std::invalid_argument("sampler: steps must be >= 1");
  std::vector<int> ts;
  if (steps >= t_start) {
    ts.resize(static_cast<std::size_t>(t_start));
    for (int i = 0; i < t_start; ++i) ts[static_cast<std::size_t>(i)] = t_start - i;
    return ts;
  }
  ts.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double f = (steps == 1) ? 0.0 : static_cast<double>(i) / (steps - 1);
    const int t = static_cast<int>(std::lround(t_start + f * (1 - t_start)));
    if (ts.empty() || t < ts.back()) ts.push_back(t);
  }
  if (ts.back() != 1) ts.push_back(1);
  return ts;
}

}  // namespace

Vec guided_sample(const GuidedPredictor& eps, const NoiseSchedule& s, const SampleStart& start,
                  int steps, double eta, std::uint64_t seed) {
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("sampler: eta must lie in [0, 1]");

  Rng rng(seed);
  Vec z;
  int t_start = 0;
  if (const auto* pn = std::get_if<FromPureNoise>(&start)) {
    if (pn->dim < 1) throw std::invalid_argument("sampler: dim must be >= 1");
    t_start = s.t_max;
    z = rng.normal_vec(pn->dim);
  } else {
    const auto& nl = std::get<FromNoisedLatent>(start);
    if (nl.t_start < 1 || nl.t_start > s.t_max)
      throw std::invalid_argument("sampler: t_start outside schedule");
    t_start = nl.t_start;
    z = nl.z_t;
  }

  const std::vector<int> ts = sub_schedule(t_start, steps);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_next = (i + 1 < ts.size()) ? ts[i + 1] : 0;
    const double ab = s.alpha_bar(t);
    const double ab_next = s.alpha_bar(t_next);

    const Vec e = eps(z, t);
    const Vec z0_hat = (z - std::sqrt(1.0 - ab) * e) / std::sqrt(ab);

    const double var_ratio = (1.0 - ab_next) / (1.0 - ab);
    const double sigma = eta * std::sqrt(var_ratio * (1.0 - ab / ab_next));
    const double dir_scale = std::sqrt(std::max(1.0 - ab_next - sigma * sigma, 0.0));
    z = std::sqrt(ab_next) * z0_hat + dir_scale * e;
    if (sigma > 0.0) z += sigma * rng.normal_vec(static_cast<int>(z.size()));
  }
  return z;
}

Vec ddim_invert(const GuidedPredictor& eps, const NoiseSchedule& s, const Vec& z0, int t_target,
                int steps) {
  // Walk the eta = 0 update in reverse over the same sub-schedule the sampler
  // would use from t_target.
  std::vector<int> ts = sub_schedule(t_target, steps);
  std::reverse(ts.begin(), ts.end());  // ascending, ends at t_target
  Vec z = z0;
  int t_prev = 0;
  for (int t : ts) {
    const double ab_prev = s.alpha_bar(t_prev);
    const double ab = s.alpha_bar(t);
    // invert: z_t = sqrt(ab) z0_hat + sqrt(1-ab) e, with z0_hat from level t_prev
    const Vec e = eps(z, t_prev == 0 ? t : t_prev);
    const Vec z0_hat = (z - std::sqrt(1.0 - ab_prev) * e) / std::sqrt(ab_prev);
    z = std::sqrt(ab) * z0_hat + std::sqrt(1.0 - ab) * e;
    t_prev = t;
  }
  return z;
}

}  // namespace sdlab
