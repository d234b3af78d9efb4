#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stvc/kernel.hpp"
#include "stvc/model.hpp"

namespace stvc {

// sqrt(sigma2) U^T e with R = U^T U.
Eigen::VectorXd gp_sample(std::span<const SpaceTimeCoord> coords, double sigma2,
                          const KernelParams& kernel, Rng& rng);

struct SimConfig {
  Eigen::Index n = 200;        // training size
  Eigen::Index holdout = 100;  // additional held-out locations
  Family family = Family::Poisson;
  Eigen::VectorXd beta_true;
  std::vector<double> sigma2_z_true;
  std::vector<KernelParams> kernels_true;
  std::vector<int> varying_cols;  // empty: every column varies
  double trials_mean = 20.0;
  bool spatial_only = false;  // all times set to 0
  std::uint64_t seed = 0;

  static SimConfig poisson_study(Eigen::Index n = 200, Eigen::Index holdout = 100, std::uint64_t seed = 0);
  static SimConfig binomial_study(Eigen::Index n = 200, Eigen::Index holdout = 100, std::uint64_t seed = 0);
  // Spatial-only Poisson field with a Matern(3.5, 0.5) intercept process.
  static SimConfig matern_study(Eigen::Index n = 1000, Eigen::Index holdout = 0, std::uint64_t seed = 0);

  std::vector<int> varying() const;
  void validate() const;  // throws ConfigError
};

struct SimTruth {
  Eigen::VectorXd beta;
  Eigen::MatrixXd z_train, z_holdout;  // rows x r
  Eigen::VectorXd eta_train, eta_holdout;
};

struct SimResult {
  Dataset train;
  Dataset holdout;
  SimTruth truth;
};

SimResult simulate_dataset(const SimConfig& config);

}  // namespace stvc
