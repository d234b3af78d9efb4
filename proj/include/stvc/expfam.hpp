#pragma once

#include <span>
#include <string>
#include <vector>

#include "stvc/rng.hpp"

namespace stvc {

enum class Family { Poisson, Binomial };

const char* family_name(Family f);
Family parse_family(const std::string& name);

// Response family together with the per-observation trial counts b.
// Poisson always carries unit trials.
struct FamilySpec {
  Family kind = Family::Poisson;
  std::vector<int> trials;

  static FamilySpec poisson(std::size_t n);
  static FamilySpec binomial(std::vector<int> trials);

  std::size_t size() const { return trials.size(); }
  void validate() const;
};

// Unit log-partition functions.
double softplus(double x);  // log(1 + e^x), overflow-safe
double logit(double p);
double ilogit(double x);

// Normalized log density of the natural exponential family: Poisson with
// mean e^eta, or Binomial(trials, ilogit(eta)).
double ef_log_density(int y, double eta, int trials, Family family);

enum class DyKind { Gaussian, LogGamma, LogitBeta };

// Diaconis-Ylvisaker density p(eta) ∝ exp(alpha * eta - kappa * psi(eta)).
//   Gaussian:  psi(t) = t^2, i.e. Normal(alpha / (2 kappa), 1 / (2 kappa))
//   LogGamma:  psi(t) = e^t, eta = log G with G ~ Gamma(alpha, rate kappa)
//   LogitBeta: psi(t) = log(1 + e^t), eta = logit B with B ~ Beta(alpha, kappa - alpha)
struct DyParams {
  double alpha = 0.0;
  double kappa = 1.0;
  DyKind kind = DyKind::Gaussian;

  void validate() const;  // throws ParameterError
};

double dy_sample(const DyParams& params, Rng& rng);
double dy_log_density(const DyParams& params, double eta);

// log of a Gamma(shape, rate 1) variate. Stays finite for shape well below 1
// by drawing Gamma(shape + 1) and applying U^(1/shape) in log space.
double log_gamma_variate(double shape, Rng& rng);

double gamma_variate(double shape, double rate, Rng& rng);

// sigma^2 ~ IG(shape = nu/2, rate = nu/2).
double inverse_gamma_variate(double nu, Rng& rng);

double standard_normal(Rng& rng);
void fill_standard_normal(std::span<double> out, Rng& rng);

}  // namespace stvc
