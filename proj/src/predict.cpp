#include "stvc/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "stvc/chol.hpp"
#include "stvc/errors.hpp"

namespace stvc {

ConditionalTBasis ConditionalTBasis::build(const Eigen::MatrixXd& corr_upper,
                                           const Eigen::MatrixXd& C,
                                           const Eigen::MatrixXd& R_tilde, bool allow_jitter) {
  if (C.rows() != corr_upper.rows() || C.cols() != R_tilde.rows() || R_tilde.rows() != R_tilde.cols())
    throw InputError("conditional t: shape mismatch");
  ConditionalTBasis b;
  b.corr_upper = corr_upper;
  b.Q = corr_upper.triangularView<Eigen::Upper>().transpose().solve(C);
  Eigen::MatrixXd S = R_tilde;
  S.noalias() -= b.Q.transpose() * b.Q;
  if (allow_jitter) {
    auto f = cholesky_with_jitter(S);
    b.base_upper = std::move(f.upper);
    b.jittered = f.jittered;
  } else {
    b.base_upper = cholesky(S);
  }
  return b;
}

ConditionalT ConditionalTBasis::params(const Eigen::VectorXd& z_j, double nu) const {
  const Eigen::VectorXd w = corr_upper.triangularView<Eigen::Upper>().transpose().solve(z_j);
  const double n = static_cast<double>(z_j.size());
  ConditionalT t;
  t.df = nu + n;
  t.location = Q.transpose() * w;
  t.scale_upper = std::sqrt((nu + w.squaredNorm()) / (nu + n)) * base_upper;
  return t;
}

Eigen::VectorXd ConditionalTBasis::sample(const Eigen::VectorXd& z_j, double nu, Rng& rng) const {
  const Eigen::VectorXd w = corr_upper.triangularView<Eigen::Upper>().transpose().solve(z_j);
  const double n = static_cast<double>(z_j.size());
  const double df = nu + n;
  const double c = std::sqrt((nu + w.squaredNorm()) / df);
  Eigen::VectorXd eps(base_upper.rows());
  fill_standard_normal({eps.data(), static_cast<std::size_t>(eps.size())}, rng);
  const double chi2 = 2.0 * gamma_variate(0.5 * df, 1.0, rng);
  Eigen::VectorXd noise = base_upper.triangularView<Eigen::Upper>().transpose() * eps;
  Eigen::VectorXd out = Q.transpose() * w;
  out += (c / std::sqrt(chi2 / df)) * noise;
  return out;
}

ConditionalT cond_t_params(const Eigen::VectorXd& z_j, const Eigen::MatrixXd& corr_upper,
                           const Eigen::MatrixXd& C, const Eigen::MatrixXd& R_tilde, double nu) {
  if (!(nu > 0.0)) throw ParameterError("degrees of freedom must be positive");
  if (z_j.size() != corr_upper.rows()) throw InputError("conditional t: z has wrong length");
  return ConditionalTBasis::build(corr_upper, C, R_tilde).params(z_j, nu);
}

Eigen::VectorXd sample_cond_t(const ConditionalT& params, Rng& rng) {
  Eigen::VectorXd eps(params.location.size());
  fill_standard_normal({eps.data(), static_cast<std::size_t>(eps.size())}, rng);
  const double chi2 = 2.0 * gamma_variate(0.5 * params.df, 1.0, rng);
  Eigen::VectorXd noise = params.scale_upper.triangularView<Eigen::Upper>().transpose() * eps;
  return params.location + noise / std::sqrt(chi2 / params.df);
}

Eigen::VectorXd predictive_eta(const PredictiveDraw& draw, const Eigen::MatrixXd& X_new,
                               const Eigen::MatrixXd& Xtilde_new) {
  Eigen::VectorXd eta = X_new * draw.beta;
  eta += (Xtilde_new.array() * draw.z_new.array()).rowwise().sum().matrix();
  return eta;
}

double sample_response(double eta, int trials, Family family, Rng& rng) {
  if (family == Family::Poisson) {
    const double mean = std::exp(eta);
    if (!std::isfinite(mean)) throw NumericalError("predictive Poisson mean overflows at eta=" + std::to_string(eta));
    if (mean < 1e15) {
      std::poisson_distribution<long long> dist(mean);
      return static_cast<double>(dist(rng));
    }
    std::normal_distribution<double> approx(mean, std::sqrt(mean));
    return std::max(0.0, std::round(approx(rng)));
  }
  std::binomial_distribution<int> dist(trials, ilogit(eta));
  return dist(rng);
}

Eigen::MatrixXd predict_response(std::span<const PredictiveDraw> draws, const Eigen::MatrixXd& X_new,
                                 const Eigen::MatrixXd& Xtilde_new, const FamilySpec& family,
                                 Rng& rng) {
  const Eigen::Index m = X_new.rows();
  if (static_cast<Eigen::Index>(family.trials.size()) != m)
    throw InputError("trial counts do not match the new coordinates");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws.size()), m);
  for (std::size_t s = 0; s < draws.size(); ++s) {
    const Eigen::VectorXd eta = predictive_eta(draws[s], X_new, Xtilde_new);
    for (Eigen::Index i = 0; i < m; ++i)
      out(static_cast<Eigen::Index>(s), i) =
          sample_response(eta(i), family.trials[static_cast<std::size_t>(i)], family.kind, rng);
  }
  return out;
}

void LogMeanExp::add(double v) {
  ++count_;
  if (v == -std::numeric_limits<double>::infinity()) return;
  if (v <= max_) {
    sum_ += std::exp(v - max_);
  } else {
    sum_ = sum_ * std::exp(max_ - v) + 1.0;
    max_ = v;
  }
}

double LogMeanExp::value() const {
  if (count_ == 0 || sum_ == 0.0) return -std::numeric_limits<double>::infinity();
  return max_ + std::log(sum_) - std::log(static_cast<double>(count_));
}

PointDensity finish_density(const LogMeanExp& acc) {
  PointDensity d;
  d.log_value = acc.value();
  if (!(d.log_value >= kLogDensityFloor)) {
    d.log_value = kLogDensityFloor;
    d.floored = true;
  }
  d.value = std::exp(d.log_value);
  return d;
}

PointDensity pointwise_pred_density(int y, std::span<const double> etas, int trials,
                                    Family family) {
  if (etas.empty()) throw InputError("predictive density needs at least one draw");
  LogMeanExp acc;
  for (double eta : etas) acc.add(ef_log_density(y, eta, trials, family));
  return finish_density(acc);
}

PointDensity pointwise_pred_density(int y, const Eigen::VectorXd& x_new,
                                    const Eigen::VectorXd& xtilde_new,
                                    std::span<const PredictiveDraw> draws, Eigen::Index index,
                                    int trials, Family family) {
  std::vector<double> etas;
  etas.reserve(draws.size());
  for (const auto& d : draws)
    etas.push_back(x_new.dot(d.beta) + xtilde_new.dot(d.z_new.row(index).transpose()));
  return pointwise_pred_density(y, etas, trials, family);
}

}  // namespace stvc
