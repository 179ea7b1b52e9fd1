#pragma once

#include "sdlab/guidance.hpp"
#include "sdlab/oracle.hpp"
#include "sdlab/scene.hpp"

#include <memory>
#include <string>
#include <vector>

namespace sdlab {

// Score-distillation engines. Lambda is the one-parameter family that
// interpolates between plain guidance descent (lambda = 0) and the
// noise-subtracting form (lambda = 1); Csd is the lambda = 0 point kept as a
// named engine, Usd swaps the unconditional branch for the exact one.
enum class Engine { Sds, Lambda, Usd, Dds, Csd, VsdLite };

std::string engine_name(Engine e);
Engine engine_from_name(const std::string& name);

// --- residuals -------------------------------------------------------------
// All residuals are "latent gradients": the parameter gradient is w(t) times
// the render Jacobian transpose applied to them.

// eps_cfg - eps
Vec sds_residual(const Vec& eps_cfg, const Vec& eps);

// omega (eps_cond - eps_uncond) + lambda (eps_uncond - eps)
Vec lambda_residual(const Vec& eps_cond, const Vec& eps_uncond, const Vec& eps, double omega,
                    double lambda);

// omega (eps_cond - eps_uncond_exact); the lambda term vanishes because the
// exact unconditional branch is an unbiased estimate of the added noise.
Vec usd_residual(const Vec& eps_cond, const Vec& eps_uncond_exact, double omega);

// omega (eps_cond_target - eps_cond_source)
Vec dds_residual(const Vec& eps_cond_target, const Vec& eps_cond_source, double omega);

// Cheap stand-in for a learned per-run predictor: one affine map per
// timestep bucket, adapted online by normalized LMS toward the drawn noise.
struct VsdAux {
  int buckets = 8;
  double rate = 0.05;
  int t_max = 0;
  std::vector<Mat> a;  // per bucket, d x d, zero-initialized
  std::vector<Vec> c;  // per bucket, d

  static VsdAux make(int dim, int t_max, int buckets = 8, double rate = 0.05);
  int bucket_of(int t) const;
  Vec predict(const Vec& z_t, int t) const;
  void update(const Vec& z_t, int t, const Vec& eps);
};

// omega (eps_cond - eps_uncond) + (eps_uncond - aux(z_t, t))
Vec vsd_lite_residual(const Vec& eps_cond, const Vec& eps_uncond, const VsdAux& aux,
                      const Vec& z_t, int t, double omega);

// --- oracle plumbing ---------------------------------------------------------

// Everything a distillation run needs to query, built once per world. The
// "run" unconditional branch is the one the lambda-family residuals see and
// may be biased; the exact branch is always available for Usd and the
// reference-view loss.
struct OracleSet {
  std::vector<std::shared_ptr<MixtureOracle>> conditional;    // per train pose
  std::vector<std::shared_ptr<MixtureOracle>> pose_marginal;  // per train pose
  std::shared_ptr<EpsilonPredictor> uncond_run;
  std::shared_ptr<MixtureOracle> uncond_exact;
  std::vector<std::vector<Vec>> mode_means;  // per pose, conditional mode means
  double sigma_c = 0.0;
  NoiseSchedule sched;
};

OracleSet make_oracle_set(const World& w, const NoiseSchedule& sched, const BiasConfig& bias,
                          BiasMode mode);

// --- reference-view loss -----------------------------------------------------

struct RefViewEval {
  double loss = 0.0;
  Vec grad;  // d loss / d theta, flat
};

// || eps(z*_t) - eps(y_t) ||^2 with one shared noise draw diffusing both the
// current render of the input view and the observed latent y. The gradient
// is exact (analytic predictor Jacobian).
RefViewEval reference_view_loss(const ObjectGrid& theta, const Vec& y, const World& w,
                                const MixtureOracle& uncond, int t, const NoiseSchedule& s,
                                std::uint64_t seed);
RefViewEval reference_view_loss(const ObjectGrid& theta, const World& w,
                                const MixtureOracle& uncond, int t, const NoiseSchedule& s,
                                std::uint64_t seed);

// --- optimization loop -------------------------------------------------------

enum class WtKind { Uniform, OneMinusAlphaBar };
enum class OptimizerKind { PlainSgd, AdaptiveMoment };

struct DistillConfig {
  Engine engine = Engine::Usd;
  double omega = 7.5;
  double lambda = 0.0;  // Lambda engine only
  bool use_general_cfg = false;
  double alpha1 = 7.5, alpha2 = 7.5;  // general-combiner scales (Sds engine)
  WtKind wt = WtKind::Uniform;
  bool include_sqrt_alpha_in_chain = true;
  int steps = 800;
  double learning_rate = 0.01;
  OptimizerKind optimizer = OptimizerKind::AdaptiveMoment;
  double beta1 = 0.9, beta2 = 0.95, adam_eps = 1e-8;
  TimestepAnnealer annealer;  // anneal_steps <= 0 means "steps / 2"
  double theta_init = 0.5;    // gray start
  double beta_rv = 0.1;  // weight of the reference-view term, 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrajectoryPoint {
  int step = 0;
  int t = 0;
  double residual_norm = 0.0;
  double psnr_gt = 0.0;
};

struct DistillRun {
  DistillConfig config;
  std::vector<TrajectoryPoint> trajectory;
  ObjectGrid theta;  // final parameters, unclamped
};

DistillRun distill_run(const World& w, const OracleSet& oracles, const DistillConfig& cfg);

// Mean per-coordinate variance of an engine's residual over n noise draws at
// a fixed (theta, t, first training pose).
double residual_variance(const World& w, const OracleSet& oracles, Engine engine,
                         const ObjectGrid& theta, int t, int n, double omega, double lambda,
                         std::uint64_t seed);

}  // namespace sdlab
