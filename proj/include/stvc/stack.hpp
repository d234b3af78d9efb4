#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "stvc/chol.hpp"
#include "stvc/model.hpp"
#include "stvc/predict.hpp"

namespace stvc {

// Cartesian product alpha_eps x sigma_xi x phi1 x phi2 (last index fastest),
// each with a shared space-time kernel.
std::vector<CandidateModel> build_grid(const std::vector<double>& alpha_eps,
                                       const std::vector<double>& sigma_xi,
                                       const std::vector<double>& phi1,
                                       const std::vector<double>& phi2, Family family);

// A random permutation of 0..n-1 cut into K consecutive blocks.
struct FoldPartition {
  std::vector<Eigen::Index> permutation;
  Partition blocks;

  Eigen::Index folds() const { return blocks.blocks(); }
  // Original indices of the observations held out in fold k.
  std::vector<Eigen::Index> held_out(Eigen::Index k) const;
};

FoldPartition make_folds(Eigen::Index n, Eigen::Index K, std::uint64_t seed);

// n x L leave-one-out predictive densities, log scale.
struct LooDensityMatrix {
  Eigen::MatrixXd log_values;

  Eigen::Index rows() const { return log_values.rows(); }
  Eigen::Index models() const { return log_values.cols(); }
  Eigen::MatrixXd values() const { return log_values.array().exp().matrix(); }
};

struct CellRecord {
  std::size_t model = 0;
  std::size_t fold = 0;
  std::uint64_t seed = 0;
};

struct LooOptions {
  int S = 500;
  std::uint64_t seed = 0;
  int workers = 1;
  // Refactorize every fold directly instead of the block-deletion update.
  bool naive_factors = false;
  // Stream seed for cell (model, fold); defaults to derive_seed(seed, {l, k}).
  std::function<std::uint64_t(std::size_t, std::size_t)> cell_seed;
};

struct LooResult {
  LooDensityMatrix loo;
  long floored = 0;
  long jitter_events = 0;
  std::vector<CellRecord> cells;
};

LooResult compute_loo_matrix(const Dataset& data, const std::vector<CandidateModel>& models,
                             const Hyperparams& hyper, const FoldPartition& folds,
                             const LooOptions& options);

struct StackingWeights {
  Eigen::VectorXd w;
  double objective = 0.0;  // (1/n) sum_i log sum_l w_l p_il
  long iterations = 0;
  bool used_fallback = false;
  std::vector<double> trace;  // objective after each iteration, when requested
};

struct SolveOptions {
  double rel_tol = 1e-10;
  long max_em_iterations = 100000;
  long max_fallback_iterations = 100000;
  bool record_trace = false;
};

// Mixture-weight EM on the simplex, with a projected-gradient fallback once
// the EM budget is exhausted.
StackingWeights solve_weights(const LooDensityMatrix& loo, const SolveOptions& options = {});

// (1/n) sum_i log sum_l w_l exp(log_p_il)
double stacking_objective(const Eigen::MatrixXd& log_p, const Eigen::VectorXd& w);

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

struct StackedIndex {
  std::size_t model = 0;
  std::size_t draw = 0;
};

// Model l with probability w_l, then one of its stored draws uniformly.
std::vector<StackedIndex> stacked_sample(const Eigen::VectorXd& weights,
                                         const std::vector<std::size_t>& draws_per_model,
                                         std::size_t count, Rng& rng);

std::vector<PosteriorDraw> stacked_sample(const Eigen::VectorXd& weights,
                                          const std::vector<std::vector<PosteriorDraw>>& draws,
                                          std::size_t count, Rng& rng);

// Mean over held-out points of log sum_l w_l p_l. Takes log densities.
double mlpd(const Eigen::MatrixXd& holdout_log_densities, const Eigen::VectorXd& weights);

struct StackingConfig {
  int K = 10;
  int S = 500;
  int N = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
  bool all_draws = false;
  double retain_threshold = 1e-4;
};

struct StackingFit {
  std::vector<CandidateModel> models;
  FoldPartition folds;
  LooResult loo;
  StackingWeights weights;
  std::vector<bool> retained;
  std::vector<std::vector<PosteriorDraw>> draws;  // empty for models not retained
  double loo_seconds = 0.0;
  double weights_seconds = 0.0;
  double draws_seconds = 0.0;
  long jitter_events = 0;
};

StackingFit fit_stacking(const Dataset& data, const std::vector<CandidateModel>& models,
                         const Hyperparams& hyper, const StackingConfig& config);

// Weights renormalized over the models that have stored draws.
Eigen::VectorXd retained_weights(const Eigen::VectorXd& w,
                                 const std::vector<std::vector<PosteriorDraw>>& draws);

// n~ x L log predictive densities at held-out data from each model's stored
// draws. Columns of models without draws are NaN.
Eigen::MatrixXd holdout_log_densities(const Dataset& train, const std::vector<CandidateModel>& models,
                                      const std::vector<std::vector<PosteriorDraw>>& draws,
                                      const Hyperparams& hyper, const Dataset& holdout,
                                      std::uint64_t seed, int workers = 1);

struct StackedPrediction {
  std::vector<StackedIndex> source;
  Eigen::MatrixXd eta;  // count x n~
  Eigen::MatrixXd y;    // count x n~
  std::vector<Eigen::MatrixXd> z;  // r entries, each count x n~
};

// Draws from the stacked posterior predictive at new coordinates. `target`
// supplies coordinates, design, and trials; its responses are ignored.
StackedPrediction stacked_predict(const Dataset& train, const std::vector<CandidateModel>& models,
                                  const std::vector<std::vector<PosteriorDraw>>& draws,
                                  const Eigen::VectorXd& weights, const Hyperparams& hyper,
                                  const Dataset& target, std::size_t count, std::uint64_t seed);

}  // namespace stvc
