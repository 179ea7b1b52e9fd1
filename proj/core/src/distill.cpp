#include "sdlab/distill.hpp"

#include "sdlab/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sdlab {

std::string engine_name(Engine e) {
  switch (e) {
    case Engine::Sds: return "sds";
    case Engine::Lambda: return "lambda";
    case Engine::Usd: return "usd";
    case Engine::Dds: return "dds";
    case Engine::Csd: return "csd";
    case Engine::VsdLite: return "vsd_lite";
  }
  throw std::invalid_argument("engine_name: unknown engine");
}

Engine engine_from_name(const std::string& name) {
  if (name == "sds") return Engine::Sds;
  if (name == "lambda") return Engine::Lambda;
  if (name == "usd") return Engine::Usd;
  if (name == "dds") return Engine::Dds;
  if (name == "csd") return Engine::Csd;
  if (name == "vsd_lite") return Engine::VsdLite;
  throw ConfigError("unknown engine: " + name);
}

Vec sds_residual(const Vec& eps_cfg, const Vec& eps) { return eps_cfg - eps; }

Vec lambda_residual(const Vec& eps_cond, const Vec& eps_uncond, const Vec& eps, double omega,
                    double lambda) {
  return omega * (eps_cond - eps_uncond) + lambda * (eps_uncond - eps);
}

Vec usd_residual(const Vec& eps_cond, const Vec& eps_uncond_exact, double omega) {
  return omega * (eps_cond - eps_uncond_exact);
}

Vec dds_residual(const Vec& eps_cond_target, const Vec& eps_cond_source, double omega) {
  return omega * (eps_cond_target - eps_cond_source);
}

VsdAux VsdAux::make(int dim, int t_max, int buckets, double rate) {
  if (buckets < 1 || t_max < 1 || dim < 1 || !(rate > 0.0))
    throw std::invalid_argument("vsd aux: bad parameters");
  VsdAux aux;
  aux.buckets = buckets;
  aux.rate = rate;
  aux.t_max = t_max;
  aux.a.assign(static_cast<std::size_t>(buckets), Mat::Zero(dim, dim));
  aux.c.assign(static_cast<std::size_t>(buckets), Vec::Zero(dim));
  return aux;
}

int VsdAux::bucket_of(int t) const {
  if (t < 1 || t > t_max) throw std::out_of_range("vsd aux: t outside schedule");
  return std::min(buckets - 1, (t - 1) * buckets / t_max);
}

Vec VsdAux::predict(const Vec& z_t, int t) const {
  const auto b = static_cast<std::size_t>(bucket_of(t));
  return a[b] * z_t + c[b];
}

void VsdAux::update(const Vec& z_t, int t, const Vec& eps) {
  const auto b = static_cast<std::size_t>(bucket_of(t));
  const Vec err = eps - (a[b] * z_t + c[b]);
  const double scale = rate / (z_t.squaredNorm() + 1.0);
  a[b].noalias() += scale * (err * z_t.transpose());
  c[b] += rate * err;
}

Vec vsd_lite_residual(const Vec& eps_cond, const Vec& eps_uncond, const VsdAux& aux,
                      const Vec& z_t, int t, double omega) {
  return omega * (eps_cond - eps_uncond) + (eps_uncond - aux.predict(z_t, t));
}

OracleSet make_oracle_set(const World& w, const NoiseSchedule& sched, const BiasConfig& bias,
                          BiasMode mode) {
  OracleSet set;
  set.sched = sched;
  set.sigma_c = w.cfg.sigma_c;
  const GaussianMixture prior = prior_gmm(w);
  set.uncond_exact = std::make_shared<MixtureOracle>(prior, sched);
  set.uncond_run = std::shared_ptr<EpsilonPredictor>(
      make_biased_unconditional(prior, bias, mode, sched));
  for (std::size_t j = 0; j < w.train_poses.size(); ++j) {
    const GaussianMixture cond = conditional_gmm(w, w.train_poses[j]);
    std::vector<Vec> means;
    means.reserve(static_cast<std::size_t>(cond.size()));
    for (const auto& c : cond.components()) means.push_back(c.mean);
    set.mode_means.push_back(std::move(means));
    set.conditional.push_back(std::make_shared<MixtureOracle>(cond, sched));
    set.pose_marginal.push_back(
        std::make_shared<MixtureOracle>(pose_marginal_gmm(w, w.train_poses[j]), sched));
  }
  return set;
}

namespace {

// eps* of a single isotropic Gaussian prior: closed form, no mixture needed.
Vec point_mode_epsilon(const Vec& mean, double var, const Vec& z_t, int t,
                       const NoiseSchedule& s) {
  const double ab = s.alpha_bar(t);
  const double var_t = ab * var + (1.0 - ab);
  return s.sigma(t) * (z_t - std::sqrt(ab) * mean) / var_t;
}

int nearest_source_mode(const std::vector<Vec>& means, const Vec& render_now) {
  // prefer the distractor modes; fall back to the true mode when there are none
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const std::size_t first = means.size() > 1 ? 1 : 0;
  for (std::size_t k = first; k < means.size(); ++k) {
    const double dist = (means[k] - render_now).squaredNorm();
    if (dist < best_d) {
      best_d = dist;
      best = static_cast<int>(k);
    }
  }
  return best;
}

struct EngineStep {
  Vec residual;
};

EngineStep engine_residual(const DistillConfig& cfg, const OracleSet& o, int pose_index,
                           const Vec& render_now, const Vec& z_t, int t, const Vec& eps,
                           VsdAux* aux) {
  const Vec e_cond = o.conditional[static_cast<std::size_t>(pose_index)]->predict(z_t, t);
  switch (cfg.engine) {
    case Engine::Sds: {
      const Vec e_u = o.uncond_run->predict(z_t, t);
      Vec e_cfg;
      if (cfg.use_general_cfg) {
        const Vec e_partial =
            o.pose_marginal[static_cast<std::size_t>(pose_index)]->predict(z_t, t);
        e_cfg = cfg_general(e_cond, e_partial, e_u, cfg.alpha1, cfg.alpha2);
      } else {
        e_cfg = cfg_collapsed(e_cond, e_u, cfg.omega);
      }
      return {sds_residual(e_cfg, eps)};
    }
    case Engine::Lambda: {
      const Vec e_u = o.uncond_run->predict(z_t, t);
      return {lambda_residual(e_cond, e_u, eps, cfg.omega, cfg.lambda)};
    }
    case Engine::Csd: {
      const Vec e_u = o.uncond_run->predict(z_t, t);
      return {lambda_residual(e_cond, e_u, eps, cfg.omega, 0.0)};
    }
    case Engine::Usd: {
      const Vec e_exact = o.uncond_exact->predict(z_t, t);
      return {usd_residual(e_cond, e_exact, cfg.omega)};
    }
    case Engine::Dds: {
      const auto& means = o.mode_means[static_cast<std::size_t>(pose_index)];
      const int src = nearest_source_mode(means, render_now);
      const Vec e_src = point_mode_epsilon(means[static_cast<std::size_t>(src)],
                                           o.sigma_c * o.sigma_c, z_t, t, o.sched);
      return {dds_residual(e_cond, e_src, cfg.omega)};
    }
    case Engine::VsdLite: {
      const Vec e_u = o.uncond_run->predict(z_t, t);
      Vec r = vsd_lite_residual(e_cond, e_u, *aux, z_t, t, cfg.omega);
      aux->update(z_t, t, eps);
      return {std::move(r)};
    }
  }
  throw std::invalid_argument("engine_residual: unknown engine");
}

}  // namespace

RefViewEval reference_view_loss(const ObjectGrid& theta, const Vec& y, const World& w,
                                const MixtureOracle& uncond, int t, const NoiseSchedule& s,
                                std::uint64_t seed) {
  if (theta.side != w.cfg.n) throw std::invalid_argument("reference_view_loss: theta side mismatch");
  Rng rng(seed);
  const Vec eps = rng.normal_vec(w.cfg.d);
  const double root_ab = std::sqrt(s.alpha_bar(t));
  const double root_1mab = s.sigma(t);

  const Vec z_star = render(theta, w.input_op);
  const Vec zt = root_ab * z_star + root_1mab * eps;
  const Vec yt = root_ab * y + root_1mab * eps;

  const Vec diff = uncond.predict(zt, t) - uncond.predict(yt, t);
  RefViewEval out;
  out.loss = diff.squaredNorm();
  // dL/dtheta = sqrt(abar) M^T J^T (2 diff); J = d eps / d z_t at z*_t
  const Mat jac = uncond.predict_jacobian(zt, t);
  out.grad = root_ab * (w.input_op.m.transpose() * (jac.transpose() * (2.0 * diff)));
  return out;
}

RefViewEval reference_view_loss(const ObjectGrid& theta, const World& w,
                                const MixtureOracle& uncond, int t, const NoiseSchedule& s,
                                std::uint64_t seed) {
  return reference_view_loss(theta, input_view(w).first, w, uncond, t, s, seed);
}

void DistillConfig::validate() const {
  if (steps < 1) throw ConfigError("distill: steps must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("distill: learning_rate must be > 0");
  if (!(omega >= 0.0)) throw ConfigError("distill: omega must be >= 0");
  if (!std::isfinite(lambda)) throw ConfigError("distill: lambda must be finite");
  if (beta_rv < 0.0) throw ConfigError("distill: beta_rv must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("distill: moment decays must lie in [0, 1)");
}

DistillRun distill_run(const World& w, const OracleSet& o, const DistillConfig& cfg_in) {
  DistillConfig cfg = cfg_in;
  cfg.validate();
  if (cfg.annealer.anneal_steps <= 0) cfg.annealer.anneal_steps = std::max(1, cfg.steps / 2);
  cfg.annealer.validate();

  const int n2 = w.cfg.n * w.cfg.n;
  const int t_max = o.sched.t_max;
  Vec theta = Vec::Constant(n2, cfg.theta_init);
  Vec m = Vec::Zero(n2), v = Vec::Zero(n2);

  VsdAux aux = VsdAux::make(w.cfg.d, t_max);
  Rng rng(mix_seed(cfg.seed, 0xD157));
  const Vec y = input_view(w).first;

  DistillRun run;
  run.config = cfg;
  run.trajectory.reserve(static_cast<std::size_t>(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    const int pose_index = rng.uniform_int(0, w.cfg.pose_count - 1);
    const int t = sample_timestep(cfg.annealer, step, t_max, rng);
    const Vec eps = rng.normal_vec(w.cfg.d);

    const ObjectGrid theta_grid = ObjectGrid::from_flat(w.cfg.n, theta);
    const Vec render_now = render_at(w, theta_grid, pose_index);
    const double ab = o.sched.alpha_bar(t);
    const Vec z_t = std::sqrt(ab) * render_now + std::sqrt(1.0 - ab) * eps;

    EngineStep es = engine_residual(cfg, o, pose_index, render_now, z_t, t, eps, &aux);

    const double wt = (cfg.wt == WtKind::Uniform) ? 1.0 : (1.0 - ab);
    const double chain = cfg.include_sqrt_alpha_in_chain ? std::sqrt(ab) : 1.0;
    Vec grad = wt * chain * (w.op_at(pose_index).m.transpose() * es.residual);

    if (cfg.beta_rv > 0.0) {
      const std::uint64_t rv_seed = rng.raw();
      const RefViewEval rv =
          reference_view_loss(theta_grid, y, w, *o.uncond_exact, t, o.sched, rv_seed);
      grad += cfg.beta_rv * rv.grad;
    }

    if (!grad.allFinite()) {
      std::ostringstream msg;
      msg << "distill: non-finite gradient at step " << step << " (t = " << t << ")";
      throw NumericalAbort(msg.str());
    }

    if (cfg.optimizer == OptimizerKind::PlainSgd) {
      theta -= cfg.learning_rate * grad;
    } else {
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      const double bc1 = 1.0 - std::pow(cfg.beta1, step + 1);
      const double bc2 = 1.0 - std::pow(cfg.beta2, step + 1);
      theta -= cfg.learning_rate *
               (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + cfg.adam_eps).matrix());
    }

    if (!theta.allFinite()) {
      std::ostringstream msg;
      msg << "distill: parameters diverged at step " << step;
      throw NumericalAbort(msg.str());
    }

    run.trajectory.push_back({step, t, es.residual.norm(),
                              psnr(clamp01(ObjectGrid::from_flat(w.cfg.n, theta)), w.gt)});
  }

  run.theta = ObjectGrid::from_flat(w.cfg.n, std::move(theta));
  return run;
}

double residual_variance(const World& w, const OracleSet& o, Engine engine,
                         const ObjectGrid& theta, int t, int n, double omega, double lambda,
                         std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("residual_variance: n must be >= 2");
  DistillConfig cfg;
  cfg.engine = engine;
  cfg.omega = omega;
  cfg.lambda = lambda;

  VsdAux aux = VsdAux::make(w.cfg.d, o.sched.t_max);
  Rng rng(seed);
  const Vec render_now = render_at(w, theta, 0);
  const double ab = o.sched.alpha_bar(t);

  const int d = w.cfg.d;
  Vec mean = Vec::Zero(d), m2 = Vec::Zero(d);
  for (int i = 0; i < n; ++i) {
    const Vec eps = rng.normal_vec(d);
    const Vec z_t = std::sqrt(ab) * render_now + std::sqrt(1.0 - ab) * eps;
    const Vec r = engine_residual(cfg, o, 0, render_now, z_t, t, eps, &aux).residual;
    const Vec delta = r - mean;
    mean += delta / (i + 1);
    m2 += delta.cwiseProduct(r - mean);
  }
  return m2.sum() / ((n - 1) * static_cast<double>(d));
}

}  // namespace sdlab
