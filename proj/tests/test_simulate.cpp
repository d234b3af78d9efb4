#include <cmath>
#include <set>
#include <vector>

#include <doctest.h>

#include "stvc/errors.hpp"
#include "stvc/simulate.hpp"
#include "support.hpp"

using namespace stvc;

TEST_CASE("zero variance gives a zero field") {
  Rng rng(1);
  const auto c = testing::random_coords(6, rng);
  CHECK(gp_sample(c, 0.0, KernelParams::space_time(1, 1), rng).isZero(0));
}

TEST_CASE("field covariance matches sigma2 R") {
  Rng rng(2);
  const auto c = testing::random_coords(5, rng);
  const auto k = KernelParams::space_time(0.5, 2.0);
  const Eigen::MatrixXd R = corr_matrix(c, k);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(5, 5);
  const int N = 10000;
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd z = gp_sample(c, 0.5, k, rng);
    S += z * z.transpose();
  }
  S /= N;
  // standard error of a covariance entry is at most sigma2 sqrt(2 / N)
  CHECK((S - 0.5 * R).cwiseAbs().maxCoeff() < 4 * 0.5 * std::sqrt(2.0 / N));

  const auto far = KernelParams::space_time(100.0, 1e4);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd z = gp_sample(c, 1.0, far, rng);
    T += z * z.transpose();
  }
  T /= N;
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < i; ++j) CHECK(std::abs(T(i, j)) < 4 * std::sqrt(1.0 / N));
}

TEST_CASE("study presets") {
  const auto p = SimConfig::poisson_study();
  CHECK(p.beta_true(0) == 5.0);
  CHECK(p.beta_true(1) == -0.5);
  CHECK(p.sigma2_z_true == std::vector<double>{0.25, 0.5});
  CHECK(p.kernels_true[0] == KernelParams::space_time(0.5, 2.0));
  CHECK(p.kernels_true[1] == KernelParams::space_time(1.0, 4.0));
  const auto b = SimConfig::binomial_study();
  CHECK(b.beta_true(0) == 1.0);
  CHECK(b.family == Family::Binomial);
  CHECK(b.trials_mean == 20.0);
}

TEST_CASE("simulated Poisson data") {
  const SimResult r = simulate_dataset(SimConfig::poisson_study(200, 100, 1));
  CHECK(r.train.n() == 200);
  CHECK(r.holdout.n() == 100);
  CHECK_NOTHROW(r.train.validate());
  int zeros = 0;
  for (int y : r.train.y) zeros += y == 0;
  CHECK(zeros < 10);
  std::set<std::tuple<double, double, double>> train;
  for (const auto& c : r.train.coords) {
    CHECK(c.s[0] >= 0.0);
    CHECK(c.s[0] <= 1.0);
    CHECK(c.t >= 0.0);
    CHECK(c.t <= 1.0);
    train.insert({c.s[0], c.s[1], c.t});
  }
  for (const auto& c : r.holdout.coords) CHECK(train.count({c.s[0], c.s[1], c.t}) == 0);
  CHECK((r.train.X.col(0).array() == 1.0).all());
  const Eigen::VectorXd eta = r.train.X * r.truth.beta +
                              (r.train.X.array() * r.truth.z_train.array()).rowwise().sum().matrix();
  CHECK((eta - r.truth.eta_train).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("simulated binomial data") {
  const SimResult r = simulate_dataset(SimConfig::binomial_study(300, 50, 2));
  CHECK_NOTHROW(r.train.validate());
  double total = 0;
  for (std::size_t i = 0; i < r.train.y.size(); ++i) {
    CHECK(r.train.family.trials[i] >= 1);
    CHECK(r.train.y[i] <= r.train.family.trials[i]);
    total += r.train.family.trials[i];
  }
  CHECK(total / 300 == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("same config, same data") {
  const SimResult a = simulate_dataset(SimConfig::poisson_study(50, 10, 4));
  const SimResult b = simulate_dataset(SimConfig::poisson_study(50, 10, 4));
  CHECK(a.train.y == b.train.y);
  CHECK(a.train.X == b.train.X);
  CHECK(a.holdout.coords == b.holdout.coords);
}

TEST_CASE("spatial-only Matern preset") {
  const SimResult r = simulate_dataset(SimConfig::matern_study(100, 20, 5));
  CHECK(r.train.r() == 1);
  for (const auto& c : r.train.coords) CHECK(c.t == 0.0);
}

TEST_CASE("invalid configurations") {
  SimConfig c = SimConfig::poisson_study(10, 10, 1);
  CHECK_THROWS_AS(simulate_dataset(c), ConfigError);
  c = SimConfig::poisson_study(10, 2, 1);
  c.sigma2_z_true = {0.1};
  CHECK_THROWS_AS(simulate_dataset(c), ConfigError);
}
