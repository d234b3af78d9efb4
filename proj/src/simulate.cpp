#include "stvc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "stvc/chol.hpp"
#include "stvc/errors.hpp"

namespace stvc {

Eigen::VectorXd gp_sample(std::span<const SpaceTimeCoord> coords, double sigma2,
                          const KernelParams& kernel, Rng& rng) {
  if (!(sigma2 >= 0.0)) throw ParameterError("variance must be non-negative");
  const auto n = static_cast<Eigen::Index>(coords.size());
  Eigen::VectorXd e(n);
  fill_standard_normal({e.data(), coords.size()}, rng);
  if (sigma2 == 0.0) return Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd U = cholesky(corr_matrix(coords, kernel));
  Eigen::VectorXd draw = U.triangularView<Eigen::Upper>().transpose() * e;
  return std::sqrt(sigma2) * draw;
}

SimConfig SimConfig::poisson_study(Eigen::Index n, Eigen::Index holdout, std::uint64_t seed) {
  SimConfig c;
  c.n = n;
  c.holdout = holdout;
  c.family = Family::Poisson;
  c.beta_true = Eigen::Vector2d(5.0, -0.5);
  c.sigma2_z_true = {0.25, 0.5};
  c.kernels_true = {KernelParams::space_time(0.5, 2.0), KernelParams::space_time(1.0, 4.0)};
  c.seed = seed;
  return c;
}

SimConfig SimConfig::binomial_study(Eigen::Index n, Eigen::Index holdout, std::uint64_t seed) {
  SimConfig c = poisson_study(n, holdout, seed);
  c.family = Family::Binomial;
  c.beta_true = Eigen::Vector2d(1.0, -0.5);
  return c;
}

SimConfig SimConfig::matern_study(Eigen::Index n, Eigen::Index holdout, std::uint64_t seed) {
  SimConfig c;
  c.n = n;
  c.holdout = holdout;
  c.family = Family::Poisson;
  c.beta_true = Eigen::Vector2d(5.0, -0.5);
  c.sigma2_z_true = {0.4};
  c.kernels_true = {KernelParams::matern(3.5, 0.5)};
  c.varying_cols = {0};
  c.spatial_only = true;
  c.seed = seed;
  return c;
}

std::vector<int> SimConfig::varying() const {
  if (!varying_cols.empty()) return varying_cols;
  std::vector<int> all(static_cast<std::size_t>(beta_true.size()));
  std::iota(all.begin(), all.end(), 0);
  return all;
}

void SimConfig::validate() const {
  if (n < 1) throw ConfigError("n must be positive");
  if (holdout < 0 || holdout >= n) throw ConfigError("holdout must satisfy 0 <= holdout < n");
  if (beta_true.size() < 1) throw ConfigError("beta must have at least one entry");
  const auto r = varying().size();
  if (sigma2_z_true.size() != r || kernels_true.size() != r)
    throw ConfigError("need one variance and one kernel per varying coefficient");
  for (int c : varying())
    if (c < 0 || c >= beta_true.size()) throw ConfigError("varying column out of range");
  for (double s : sigma2_z_true)
    if (!(s > 0.0)) throw ConfigError("process variances must be positive");
  for (const auto& k : kernels_true) {
    try {
      k.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (family == Family::Binomial && !(trials_mean > 0.0)) throw ConfigError("trials mean must be positive");
}

SimResult simulate_dataset(const SimConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const Eigen::Index total = config.n + config.holdout;
  const Eigen::Index p = config.beta_true.size();
  const std::vector<int> vary = config.varying();
  const auto r = static_cast<Eigen::Index>(vary.size());

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<SpaceTimeCoord> coords(static_cast<std::size_t>(total));
  for (auto& c : coords) {
    c.s[0] = unif(rng);
    c.s[1] = unif(rng);
    c.t = config.spatial_only ? 0.0 : unif(rng);
  }

  Eigen::MatrixXd X(total, p);
  X.col(0).setOnes();
  for (Eigen::Index j = 1; j < p; ++j)
    for (Eigen::Index i = 0; i < total; ++i) X(i, j) = standard_normal(rng);

  Eigen::MatrixXd z(total, r);
  for (Eigen::Index j = 0; j < r; ++j)
    z.col(j) = gp_sample(coords, config.sigma2_z_true[static_cast<std::size_t>(j)],
                         config.kernels_true[static_cast<std::size_t>(j)], rng);

  Eigen::VectorXd eta = X * config.beta_true;
  for (Eigen::Index j = 0; j < r; ++j)
    eta += X.col(vary[static_cast<std::size_t>(j)]).cwiseProduct(z.col(j));

  std::vector<int> trials(static_cast<std::size_t>(total), 1);
  std::vector<int> y(static_cast<std::size_t>(total));
  std::poisson_distribution<int> trial_dist(config.trials_mean);
  for (Eigen::Index i = 0; i < total; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (config.family == Family::Poisson) {
      std::poisson_distribution<int> d(std::exp(eta(i)));
      y[iu] = d(rng);
    } else {
      int m = 0;
      while (m == 0) m = trial_dist(rng);
      trials[iu] = m;
      std::binomial_distribution<int> d(m, ilogit(eta(i)));
      y[iu] = d(rng);
    }
  }

  Dataset all;
  all.coords = std::move(coords);
  all.y = std::move(y);
  all.family.kind = config.family;
  all.family.trials = std::move(trials);
  all.X = std::move(X);
  all.varying_cols = vary;
  all.names.push_back("intercept");
  for (Eigen::Index j = 1; j < p; ++j) all.names.push_back("x" + std::to_string(j));

  // Random holdout split.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (Eigen::Index i = total - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<Eigen::Index> held(order.begin(), order.begin() + config.holdout);
  std::vector<Eigen::Index> train(order.begin() + config.holdout, order.end());
  std::sort(held.begin(), held.end());
  std::sort(train.begin(), train.end());

  SimResult out;
  out.train = all.subset(train);
  out.holdout = all.subset(held);
  out.truth.beta = config.beta_true;
  out.truth.z_train.resize(config.n, r);
  out.truth.eta_train.resize(config.n);
  for (std::size_t i = 0; i < train.size(); ++i) {
    out.truth.z_train.row(static_cast<Eigen::Index>(i)) = z.row(train[i]);
    out.truth.eta_train(static_cast<Eigen::Index>(i)) = eta(train[i]);
  }
  out.truth.z_holdout.resize(config.holdout, r);
  out.truth.eta_holdout.resize(config.holdout);
  for (std::size_t i = 0; i < held.size(); ++i) {
    out.truth.z_holdout.row(static_cast<Eigen::Index>(i)) = z.row(held[i]);
    out.truth.eta_holdout(static_cast<Eigen::Index>(i)) = eta(held[i]);
  }
  return out;
}

}  // namespace stvc
