#pragma once

#include "sdlab/gmm.hpp"

#include <memory>

namespace sdlab {

// A noise predictor eps(z_t, t). Implementations must be safe to call
// concurrently from multiple threads.
class EpsilonPredictor {
 public:
  virtual ~EpsilonPredictor() = default;
  virtual Vec predict(const Vec& z_t, int t) const = 0;
  virtual int dim() const = 0;
};

// Exact posterior-mean predictor for a known clean mixture. This is the
// analytic stand-in for a perfectly trained network.
class MixtureOracle : public EpsilonPredictor {
 public:
  MixtureOracle(GaussianMixture clean, NoiseSchedule sched);

  Vec predict(const Vec& z_t, int t) const override;
  int dim() const override { return clean_.dim(); }
  // d eps / d z_t, needed for analytic gradients through the predictor
  Mat predict_jacobian(const Vec& z_t, int t) const;
  const GaussianMixture& clean() const { return clean_; }

 private:
  GaussianMixture clean_;
  NoiseSchedule sched_;
};

// How an imperfect unconditional branch deviates from the exact one.
// TrainMatched uses the (small) offset the branch was trained with;
// InferenceZero uses the (larger) offset seen when the conditioning input is
// replaced by a zero placeholder at inference time.
enum class BiasMode { TrainMatched, InferenceZero };

struct BiasConfig {
  static constexpr double kDefaultMeanShift = 6.0;

  double gamma = 2.0;       // prior weight exponent; 0 means "leave weights alone"
  Vec mean_offset;          // shift applied to every prior mode (empty = zero)
  Vec offset_train;         // additive prediction offset, TrainMatched
  Vec offset_zero;          // additive prediction offset, InferenceZero
  void validate(int dim) const;

  static BiasConfig defaults(int dim);  // gamma 2, offsets 0.1/0.3 per latent unit, shift 6
  static BiasConfig none(int dim);
};

// Fixed unit vectors the default offsets and mean shift point along; they
// depend only on dim, so biased predictors across worlds share one error axis.
Vec bias_offset_direction(int dim);
Vec bias_shift_direction(int dim);

// Predictor for an unconditional branch that has drifted from the true prior:
// exact eps* of a re-weighted / shifted prior, plus a constant offset chosen
// by mode.
std::unique_ptr<EpsilonPredictor> make_biased_unconditional(const GaussianMixture& prior,
                                                            const BiasConfig& bias, BiasMode mode,
                                                            const NoiseSchedule& sched);

// Dimension-normalized prediction error at one clean point:
// mean over n noise draws of |pred(z_t) - eps| / sqrt(d).
double noise_prediction_gap(const EpsilonPredictor& pred, const Vec& z0, int t, int n,
                            const NoiseSchedule& s, std::uint64_t seed);

}  // namespace sdlab
