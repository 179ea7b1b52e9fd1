#include "sdlab/gmm.hpp"

#include <doctest.h>

#include <cmath>

using namespace sdlab;

namespace {

GaussianMixture random_mixture(Rng& rng, int d, int k) {
  std::vector<double> w(static_cast<std::size_t>(k));
  double total = 0.0;
  for (auto& x : w) {
    x = rng.uniform(0.2, 1.0);
    total += x;
  }
  for (auto& x : w) x /= total;
  std::vector<IsotropicGaussian> comps;
  for (int i = 0; i < k; ++i) comps.push_back({2.0 * rng.normal_vec(d), rng.uniform(0.2, 2.0)});
  return GaussianMixture(w, comps);
}

}  // namespace

TEST_CASE("mixture construction validates") {
  const Vec m = Vec::Zero(2);
  CHECK_THROWS_AS(GaussianMixture({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({0.5}, {{m, 1.0}, {m, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({0.7, 0.2}, {{m, 1.0}, {m, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({1.0}, {{m, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({1.0}, {{m, -1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({0.5, 0.5}, {{m, 1.0}, {Vec::Zero(3), 1.0}}),
                  std::invalid_argument);
  CHECK_NOTHROW(GaussianMixture({0.5, 0.5}, {{m, 1.0}, {m, 2.0}}));
}

TEST_CASE("single gaussian log density is exact") {
  Vec mu(2);
  mu << 1.0, -2.0;
  const GaussianMixture g({1.0}, {{mu, 0.5}});
  Vec z(2);
  z << 0.0, 0.0;
  const double expected = -std::log(2.0 * M_PI * 0.5) - 0.5 * (1.0 + 4.0) / 0.5;
  CHECK(g.log_density(z) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("score matches finite differences of log density") {
  Rng rng(21);
  for (int trial = 0; trial < 6; ++trial) {
    const int d = 2 + trial % 3;
    const GaussianMixture g = random_mixture(rng, d, 1 + trial % 4);
    for (int i = 0; i < 20; ++i) {
      const Vec z = g.sample(rng) + 0.5 * rng.normal_vec(d);
      const Vec s = g.score(z);
      Vec fd(d);
      const double h = 1e-6;
      for (int k = 0; k < d; ++k) {
        Vec zp = z, zm = z;
        zp[k] += h;
        zm[k] -= h;
        fd[k] = (g.log_density(zp) - g.log_density(zm)) / (2 * h);
      }
      CHECK((fd - s).norm() / std::max(1.0, s.norm()) < 1e-6);
    }
  }
}

TEST_CASE("score jacobian matches finite differences of score") {
  Rng rng(22);
  const GaussianMixture g = random_mixture(rng, 3, 3);
  for (int i = 0; i < 10; ++i) {
    const Vec z = g.sample(rng);
    const Mat jac = g.score_jacobian(z);
    CHECK((jac - jac.transpose()).cwiseAbs().maxCoeff() < 1e-12);  // Hessian symmetry
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Vec zp = z, zm = z;
      zp[k] += h;
      zm[k] -= h;
      const Vec col = (g.score(zp) - g.score(zm)) / (2 * h);
      CHECK((jac.col(k) - col).norm() < 1e-5 * std::max(1.0, jac.col(k).norm()));
    }
  }
}

TEST_CASE("log density stays finite in the far tail") {
  Rng rng(23);
  const GaussianMixture g = random_mixture(rng, 4, 3);
  const Vec z = Vec::Constant(4, 300.0);
  CHECK(std::isfinite(g.log_density(z)));
  CHECK(g.score(z).allFinite());
}

TEST_CASE("noised mixture transforms means and variances") {
  Rng rng(24);
  const GaussianMixture g = random_mixture(rng, 3, 2);
  const NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  const int t = 400;
  const double ab = s.alpha_bar(t);
  const GaussianMixture gt = noised_mixture(g, t, s);
  REQUIRE(gt.size() == g.size());
  for (int k = 0; k < g.size(); ++k) {
    const auto& c0 = g.components()[static_cast<std::size_t>(k)];
    const auto& c1 = gt.components()[static_cast<std::size_t>(k)];
    CHECK((c1.mean - std::sqrt(ab) * c0.mean).norm() < 1e-12);
    CHECK(c1.var == doctest::Approx(ab * c0.var + (1 - ab)).epsilon(1e-12));
  }
}

TEST_CASE("epsilon_star closed forms") {
  const NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  Rng rng(25);

  SUBCASE("standard normal prior gives sqrt(1-abar) * z") {
    const GaussianMixture g({1.0}, {{Vec::Zero(4), 1.0}});
    const int t = 300;
    const Vec z = rng.normal_vec(4);
    const Vec e = epsilon_star(g, z, t, s);
    CHECK((e - std::sqrt(1 - s.alpha_bar(t)) * z).norm() < 1e-12);
  }

  SUBCASE("single off-center gaussian") {
    Vec mu(3);
    mu << 1.0, -0.5, 2.0;
    const double var = 0.3;
    const GaussianMixture g({1.0}, {{mu, var}});
    const int t = 550;
    const double ab = s.alpha_bar(t);
    const Vec z = rng.normal_vec(3);
    const Vec expected =
        std::sqrt(1 - ab) * (z - std::sqrt(ab) * mu) / (ab * var + (1 - ab));
    CHECK((epsilon_star(g, z, t, s) - expected).norm() < 1e-12);
  }
}

TEST_CASE("epsilon_star is the posterior mean of the added noise") {
  // brute-force check in 1-D: discretize the posterior over z0
  const NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
  Vec m1(1), m2(1);
  m1 << -1.5;
  m2 << 2.0;
  const GaussianMixture g({0.3, 0.7}, {{m1, 0.4}, {m2, 0.9}});
  const int t = 60;
  const double ab = s.alpha_bar(t);
  Vec z(1);
  z << 0.7;

  double num = 0.0, den = 0.0;
  const int grid = 40000;
  for (int i = 0; i < grid; ++i) {
    Vec z0(1);
    z0 << -12.0 + 24.0 * i / (grid - 1);
    const double prior = std::exp(g.log_density(z0));
    const double like =
        std::exp(-(z[0] - std::sqrt(ab) * z0[0]) * (z[0] - std::sqrt(ab) * z0[0]) /
                 (2 * (1 - ab)));
    const double eps_implied = (z[0] - std::sqrt(ab) * z0[0]) / std::sqrt(1 - ab);
    num += prior * like * eps_implied;
    den += prior * like;
  }
  CHECK(epsilon_star(g, z, t, s)[0] == doctest::Approx(num / den).epsilon(1e-6));
}

TEST_CASE("sampling is deterministic and hits mixture moments") {
  Rng rng(26);
  Vec m1(2), m2(2);
  m1 << -2.0, 0.0;
  m2 << 3.0, 1.0;
  const GaussianMixture g({0.4, 0.6}, {{m1, 0.5}, {m2, 0.5}});

  Rng ra(5), rb(5);
  for (int i = 0; i < 10; ++i) CHECK((g.sample(ra) - g.sample(rb)).norm() == 0.0);

  Vec acc = Vec::Zero(2);
  const int n = 20000;
  for (int i = 0; i < n; ++i) acc += g.sample(rng);
  CHECK(((acc / n) - g.mean()).norm() < 0.05);
}
