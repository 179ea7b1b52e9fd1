#include "sdlab/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sdlab {

GaussianMixture::GaussianMixture(std::vector<double> weights,
                                 std::vector<IsotropicGaussian> components)
    : weights_(std::move(weights)), comps_(std::move(components)) {
  if (comps_.empty() || weights_.size() != comps_.size())
    throw std::invalid_argument("gmm: weight/component count mismatch");
  const auto d = comps_.front().mean.size();
  double total = 0.0;
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    if (comps_[k].mean.size() != d) throw std::invalid_argument("gmm: inconsistent dimensions");
    if (!(comps_[k].var > 0.0)) throw std::invalid_argument("gmm: component variance must be > 0");
    if (!(weights_[k] > 0.0) || !std::isfinite(weights_[k]))
      throw std::invalid_argument("gmm: weights must be positive and finite");
    total += weights_[k];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("gmm: weights must sum to 1");
  log_weights_.resize(weights_.size());
  std::transform(weights_.begin(), weights_.end(), log_weights_.begin(),
                 [](double w) { return std::log(w); });
}

double GaussianMixture::log_resp(const Vec& z, std::vector<double>& lr) const {
  const int K = size();
  const double d = static_cast<double>(dim());
  lr.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto& c = comps_[static_cast<std::size_t>(k)];
    const double sq = (z - c.mean).squaredNorm();
    lr[static_cast<std::size_t>(k)] = log_weights_[static_cast<std::size_t>(k)] -
                                      0.5 * d * std::log(2.0 * M_PI * c.var) -
                                      0.5 * sq / c.var;
  }
  const double m = *std::max_element(lr.begin(), lr.end());
  double acc = 0.0;
  for (double v : lr) acc += std::exp(v - m);
  const double log_p = m + std::log(acc);
  for (double& v : lr) v -= log_p;  // now log responsibilities
  return log_p;
}

double GaussianMixture::log_density(const Vec& z) const {
  std::vector<double> lr;
  return log_resp(z, lr);
}

Vec GaussianMixture::score(const Vec& z) const {
  std::vector<double> lr;
  log_resp(z, lr);
  Vec g = Vec::Zero(z.size());
  for (int k = 0; k < size(); ++k) {
    const auto& c = comps_[static_cast<std::size_t>(k)];
    g += std::exp(lr[static_cast<std::size_t>(k)]) * (c.mean - z) / c.var;
  }
  return g;
}

Mat GaussianMixture::score_jacobian(const Vec& z) const {
  // H = sum_k r_k [ g_k g_k^T - I/var_k ] - s s^T, with g_k = (mu_k - z)/var_k
  // and s = sum_k r_k g_k the mixture score.
  std::vector<double> lr;
  log_resp(z, lr);
  const auto n = z.size();
  Mat h = Mat::Zero(n, n);
  Vec s = Vec::Zero(n);
  for (int k = 0; k < size(); ++k) {
    const auto& c = comps_[static_cast<std::size_t>(k)];
    const double r = std::exp(lr[static_cast<std::size_t>(k)]);
    const Vec gk = (c.mean - z) / c.var;
    h.noalias() += r * (gk * gk.transpose());
    h.diagonal().array() -= r / c.var;
    s += r * gk;
  }
  h.noalias() -= s * s.transpose();
  return h;
}

Vec GaussianMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  int pick = size() - 1;
  for (int k = 0; k < size(); ++k) {
    acc += weights_[static_cast<std::size_t>(k)];
    if (u < acc) {
      pick = k;
      break;
    }
  }
  const auto& c = comps_[static_cast<std::size_t>(pick)];
  return c.mean + std::sqrt(c.var) * rng.normal_vec(dim());
}

Vec GaussianMixture::mean() const {
  Vec m = Vec::Zero(dim());
  for (int k = 0; k < size(); ++k)
    m += weights_[static_cast<std::size_t>(k)] * comps_[static_cast<std::size_t>(k)].mean;
  return m;
}

GaussianMixture noised_mixture(const GaussianMixture& g, int t, const NoiseSchedule& s) {
  const double ab = s.alpha_bar(t);
  const double root = std::sqrt(ab);
  std::vector<IsotropicGaussian> comps;
  comps.reserve(static_cast<std::size_t>(g.size()));
  for (const auto& c : g.components())
    comps.push_back({root * c.mean, ab * c.var + (1.0 - ab)});
  return GaussianMixture(g.weights(), std::move(comps));
}

Vec epsilon_star(const GaussianMixture& clean, const Vec& z_t, int t, const NoiseSchedule& s) {
  const GaussianMixture gt = noised_mixture(clean, t, s);
  return -s.sigma(t) * gt.score(z_t);
}

}  // namespace sdlab
