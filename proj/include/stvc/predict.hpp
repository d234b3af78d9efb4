#pragma once

#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stvc/expfam.hpp"
#include "stvc/model.hpp"
#include "stvc/rng.hpp"

namespace stvc {

// Multivariate t with df degrees of freedom, location, and scale matrix
// scale_upper^T scale_upper.
struct ConditionalT {
  double df = 0.0;
  Eigen::VectorXd location;
  Eigen::MatrixXd scale_upper;
};

// Draw-independent pieces of the conditional t for one set of observed and
// new coordinates: Q = U^-T C and the upper factor of R~ - C^T R^-1 C.
struct ConditionalTBasis {
  Eigen::MatrixXd corr_upper;  // U, R = U^T U
  Eigen::MatrixXd Q;           // n x n~
  Eigen::MatrixXd base_upper;  // factor of R~ - Q^T Q
  bool jittered = false;

  // allow_jitter: retry with 1e-10 on the diagonal when the conditional
  // correlation is numerically singular; otherwise throws FactorizationError.
  static ConditionalTBasis build(const Eigen::MatrixXd& corr_upper, const Eigen::MatrixXd& C,
                                 const Eigen::MatrixXd& R_tilde, bool allow_jitter = false);

  ConditionalT params(const Eigen::VectorXd& z_j, double nu) const;

  // Conditional draw for one z_j without materializing the scale factor.
  Eigen::VectorXd sample(const Eigen::VectorXd& z_j, double nu, Rng& rng) const;
};

// z~_j | z_j ~ t(nu + n, C^T R^-1 z_j, (nu + z_j^T R^-1 z_j)/(nu + n) (R~ - C^T R^-1 C)).
ConditionalT cond_t_params(const Eigen::VectorXd& z_j, const Eigen::MatrixXd& corr_upper,
                           const Eigen::MatrixXd& C, const Eigen::MatrixXd& R_tilde, double nu);

// location + scale_upper^T eps / sqrt(chi2_df / df)
Eigen::VectorXd sample_cond_t(const ConditionalT& params, Rng& rng);

// A posterior draw paired with z~ at new coordinates (n~ x r).
struct PredictiveDraw {
  Eigen::VectorXd beta;
  Eigen::MatrixXd z_new;
};

// Natural parameter x^T beta + x~^T z~ at each new coordinate; xi and mu
// contribute zero.
Eigen::VectorXd predictive_eta(const PredictiveDraw& draw, const Eigen::MatrixXd& X_new,
                               const Eigen::MatrixXd& Xtilde_new);

// Counts are returned as doubles: Poisson means past 64-bit range use a
// rounded normal draw. Throws NumericalError when exp(eta) overflows.
double sample_response(double eta, int trials, Family family, Rng& rng);

// draws.size() x n~ matrix of sampled responses.
Eigen::MatrixXd predict_response(std::span<const PredictiveDraw> draws, const Eigen::MatrixXd& X_new,
                                 const Eigen::MatrixXd& Xtilde_new, const FamilySpec& family,
                                 Rng& rng);

// Densities below e^-740 are raised to it so that the stacking objective
// stays finite.
inline constexpr double kLogDensityFloor = -740.0;

struct PointDensity {
  double log_value = 0.0;
  double value = 0.0;
  bool floored = false;
};

// log((1/S) sum_s EF(y | eta_s)) by log-sum-exp.
PointDensity pointwise_pred_density(int y, std::span<const double> etas, int trials,
                                    Family family);

PointDensity pointwise_pred_density(int y, const Eigen::VectorXd& x_new,
                                    const Eigen::VectorXd& xtilde_new,
                                    std::span<const PredictiveDraw> draws, Eigen::Index index,
                                    int trials, Family family);

// Streaming log-mean-exp accumulator.
class LogMeanExp {
 public:
  void add(double log_value);
  double value() const;  // log of the mean; -inf when empty or all -inf
  long count() const { return count_; }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
  long count_ = 0;
};

PointDensity finish_density(const LogMeanExp& acc);

}  // namespace stvc
