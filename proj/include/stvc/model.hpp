#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stvc/expfam.hpp"
#include "stvc/kernel.hpp"
#include "stvc/rng.hpp"

namespace stvc {

struct Dataset {
  std::vector<SpaceTimeCoord> coords;
  std::vector<int> y;
  FamilySpec family;
  Eigen::MatrixXd X;               // n x p fixed-effect design
  std::vector<int> varying_cols;   // the r columns of X with varying coefficients
  std::vector<std::string> names;  // optional column names of X

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  Eigen::Index r() const { return static_cast<Eigen::Index>(varying_cols.size()); }

  // n x r matrix whose i-th row is x~(l_i).
  Eigen::MatrixXd xtilde() const;

  // Rows in the given order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

  void validate() const;  // throws InputError
};

// One candidate model M_Delta. The kernel is shared by all r processes.
struct CandidateModel {
  double alpha_eps = 0.5;
  double kappa_eps = 0.0;
  double sigma_xi = 1.0;
  KernelParams kernel;

  // kappa_eps is 0 for Poisson and 2 alpha_eps for binomial.
  static CandidateModel make(Family family, double alpha_eps, double sigma_xi,
                             const KernelParams& kernel);
  void validate(Family family) const;
};

struct Hyperparams {
  double nu_beta = 3.0;
  std::vector<double> nu_z;  // one per varying coefficient

  static Hyperparams uniform(Eigen::Index r, double nu = 3.0);
  void validate(Eigen::Index r) const;
};

struct PosteriorDraw {
  Eigen::VectorXd beta;  // p
  Eigen::MatrixXd z;     // n x r, column j is z_j
  Eigen::VectorXd xi;    // n
  double sigma2_beta = 0.0;
  Eigen::VectorXd sigma2_z;  // r
  Eigen::VectorXd eta;       // natural-parameter draw v_eta
};

struct AuxVector {
  Eigen::VectorXd v_eta, v_xi, v_beta;
  Eigen::MatrixXd v_z;  // n x r
  double sigma2_beta = 0.0;
  Eigen::VectorXd sigma2_z;
};

struct Gamma {
  Eigen::VectorXd xi;
  Eigen::VectorXd beta;
  Eigen::MatrixXd z;  // n x r
};

// Process-major z = (z_1^T, ..., z_r^T)^T  <->  location-major blocks
// z_(i) = (z_1(l_i), ..., z_r(l_i)).
Eigen::VectorXd to_location_major(const Eigen::VectorXd& process_major, Eigen::Index n,
                                  Eigen::Index r);
Eigen::VectorXd to_process_major(const Eigen::VectorXd& location_major, Eigen::Index n,
                                 Eigen::Index r);

// Factors that depend only on the design: per-location r x r factors of
// x~_i x~_i^T + I_r, and the p x p factor of I_p + X^T diag(1/(2+|x~_i|^2)) X.
// Built once per dataset and shared across draws and candidate models.
class ProjectionCache {
 public:
  ProjectionCache() = default;
  ProjectionCache(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xtilde);

  // Cache for a subset of rows; reuses the per-location factors.
  ProjectionCache subset(const std::vector<Eigen::Index>& rows, const Eigen::MatrixXd& X) const;

  Eigen::Index n() const { return static_cast<Eigen::Index>(sqnorm_.size()); }
  Eigen::Index r() const { return r_; }

  Gamma project(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xtilde,
                const Eigen::VectorXd& v_eta, const Eigen::VectorXd& v_xi,
                const Eigen::VectorXd& v_beta, const Eigen::MatrixXd& v_z) const;

 private:
  void finish(const Eigen::MatrixXd& X);

  Eigen::Index r_ = 0;
  Eigen::VectorXd sqnorm_;          // |x~_i|^2
  std::vector<Eigen::LLT<Eigen::MatrixXd>> local_;
  Eigen::MatrixXd local_xt_;        // n x r, row i = (x~_i x~_i^T + I)^-1 x~_i
  Eigen::LLT<Eigen::MatrixXd> schur_;
};

// gamma = (H1^T H1 + I)^-1 (H1^T v_eta + v_gamma), H1 = [I_n : X : X~].
Gamma project(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xtilde,
              const Eigen::VectorXd& v_eta, const Eigen::VectorXd& v_xi,
              const Eigen::VectorXd& v_beta, const Eigen::MatrixXd& v_z);

// Same quantity from the dense (n + p + nr) system. Test oracle.
Gamma project_naive(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xtilde,
                    const Eigen::VectorXd& v_eta, const Eigen::VectorXd& v_xi,
                    const Eigen::VectorXd& v_beta, const Eigen::MatrixXd& v_z);

// corr_upper: upper factor U of the observed correlation matrix, R = U^T U.
AuxVector draw_aux_vector(const Dataset& data, const CandidateModel& model,
                          const Hyperparams& hyper, const Eigen::MatrixXd& corr_upper, Rng& rng);

// Everything needed to draw from one model on one dataset.
struct ModelFit {
  const Dataset* data = nullptr;
  Eigen::MatrixXd xtilde;
  Eigen::MatrixXd corr_upper;
  ProjectionCache cache;
  bool jittered = false;

  static ModelFit prepare(const Dataset& data, const KernelParams& kernel);
  PosteriorDraw draw(const CandidateModel& model, const Hyperparams& hyper, Rng& rng) const;
};

std::vector<PosteriorDraw> posterior_sample(const Dataset& data, const CandidateModel& model,
                                            const Hyperparams& hyper, int N, Rng& rng);

// Splits the N draws into fixed chunks, each with its own stream derived from
// `seed`, and runs them on `workers` threads. Output does not depend on the
// worker count.
std::vector<PosteriorDraw> posterior_sample(const ModelFit& fit, const CandidateModel& model,
                                            const Hyperparams& hyper, int N,
                                            std::uint64_t seed, int workers = 1);

}  // namespace stvc
