#pragma once

#include "sdlab/schedule.hpp"
#include "sdlab/types.hpp"

#include <functional>
#include <variant>

namespace sdlab {

// Two-scale combination over a chain of conditioning signals:
//   a1 (eps_full - eps_partial) + a2 (eps_partial - eps_uncond) + eps_uncond
// where "full" conditions on everything and "partial" on a subset.
Vec cfg_general(const Vec& eps_full, const Vec& eps_partial, const Vec& eps_uncond, double a1,
                double a2);

// Single-scale form: omega (eps_cond - eps_uncond) + eps_uncond.
Vec cfg_collapsed(const Vec& eps_cond, const Vec& eps_uncond, double omega);

// Same algebra as cfg_collapsed, but the caller is expected to feed the
// unconditional prediction of the unadapted base model rather than the
// finetuned branch. Kept as its own entry point so call sites document which
// variant they run.
Vec cfg_rectified(const Vec& eps_cond_finetuned, const Vec& eps_uncond_base, double omega);

using GuidedPredictor = std::function<Vec(const Vec& z_t, int t)>;

struct FromPureNoise {
  int dim = 0;
};
struct FromNoisedLatent {
  Vec z_t;    // latent already noised to level t_start
  int t_start = 0;
};
using SampleStart = std::variant<FromPureNoise, FromNoisedLatent>;

// Reverse-process sampler. eta = 0 gives the deterministic (DDIM-style) rule,
// eta = 1 the ancestral chain with posterior variance; intermediate values
// interpolate. steps >= chain length walks every timestep, fewer steps use an
// evenly strided sub-schedule.
Vec guided_sample(const GuidedPredictor& eps, const NoiseSchedule& s, const SampleStart& start,
                  int steps, double eta, std::uint64_t seed);

// Deterministic inverse of the eta = 0 rule: maps z0 to the z_t that
// guided_sample would denoise back to z0 under the same predictor.
Vec ddim_invert(const GuidedPredictor& eps, const NoiseSchedule& s, const Vec& z0, int t_target,
                int steps);

}  // namespace sdlab
