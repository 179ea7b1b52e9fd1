#pragma once

#include "sdlab/schedule.hpp"
#include "sdlab/types.hpp"

#include <vector>

namespace sdlab {

struct IsotropicGaussian {
  Vec mean;
  double var = 1.0;  // per-coordinate variance
};

// Mixture of isotropic Gaussians with closed-form density, score and score
// Jacobian. Everything here is exact up to floating point; responsibilities
// are evaluated in log space to survive large timestep / far-tail queries.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<IsotropicGaussian> components);

  int dim() const { return static_cast<int>(comps_.front().mean.size()); }
  int size() const { return static_cast<int>(comps_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<IsotropicGaussian>& components() const { return comps_; }

  double log_density(const Vec& z) const;
  Vec score(const Vec& z) const;           // grad_z log p(z)
  Mat score_jacobian(const Vec& z) const;  // Hessian of log p(z)
  Vec sample(Rng& rng) const;
  Vec mean() const;

 private:
  // log responsibilities at z; returns total log density
  double log_resp(const Vec& z, std::vector<double>& lr) const;

  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<IsotropicGaussian> comps_;
};

// Distribution of z_t = sqrt(abar_t) z0 + sqrt(1-abar_t) eps when z0 ~ g:
// component k becomes N(sqrt(abar) mu_k, abar var_k + (1 - abar)).
GaussianMixture noised_mixture(const GaussianMixture& g, int t, const NoiseSchedule& s);

// Exact conditional expectation E[eps | z_t] for the noised mixture:
// eps*(z_t) = -sqrt(1 - abar_t) * score_t(z_t).
Vec epsilon_star(const GaussianMixture& clean, const Vec& z_t, int t, const NoiseSchedule& s);

inline Vec score(const GaussianMixture& g, const Vec& z) { return g.score(z); }
inline double log_density(const GaussianMixture& g, const Vec& z) { return g.log_density(z); }

}  // namespace sdlab
