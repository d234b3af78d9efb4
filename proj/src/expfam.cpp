#include "stvc/expfam.hpp"

#include <cmath>
#include <string>

#include "stvc/errors.hpp"

namespace stvc {

const char* family_name(Family f) {
  return f == Family::Poisson ? "poisson" : "binomial";
}

Family parse_family(const std::string& name) {
  if (name == "poisson") return Family::Poisson;
  if (name == "binomial") return Family::Binomial;
  throw ConfigError("unknown family '" + name + "' (expected poisson or binomial)");
}

FamilySpec FamilySpec::poisson(std::size_t n) {
  return FamilySpec{Family::Poisson, std::vector<int>(n, 1)};
}

FamilySpec FamilySpec::binomial(std::vector<int> trials) {
  FamilySpec f{Family::Binomial, std::move(trials)};
  f.validate();
  return f;
}

void FamilySpec::validate() const {
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (kind == Family::Poisson && trials[i] != 1)
      throw InputError("poisson family requires unit trials (observation " +
                       std::to_string(i) + ")");
    if (kind == Family::Binomial && trials[i] < 1)
      throw InputError("binomial trials must be >= 1 (observation " + std::to_string(i) +
                       ")");
  }
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double ilogit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double ef_log_density(int y, double eta, int trials, Family family) {
  if (!std::isfinite(eta)) throw DomainError("natural parameter is not finite");
  if (y < 0) throw DomainError("response must be non-negative");
  const double yd = y;
  if (family == Family::Poisson) {
    return yd * eta - std::exp(eta) - std::lgamma(yd + 1.0);
  }
  if (trials < 1) throw DomainError("binomial trials must be >= 1");
  if (y > trials) throw DomainError("binomial response exceeds trials");
  const double b = trials;
  const double log_choose =
      std::lgamma(b + 1.0) - std::lgamma(yd + 1.0) - std::lgamma(b - yd + 1.0);
  return yd * eta - b * softplus(eta) + log_choose;
}

void DyParams::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    throw ParameterError("DY kappa must be positive, got " + std::to_string(kappa));
  if (!std::isfinite(alpha)) throw ParameterError("DY alpha must be finite");
  switch (kind) {
    case DyKind::Gaussian:
      break;
    case DyKind::LogGamma:
      if (!(alpha > 0.0))
        throw ParameterError("log-gamma DY requires alpha > 0, got " + std::to_string(alpha));
      break;
    case DyKind::LogitBeta:
      if (!(alpha > 0.0) || !(kappa - alpha > 0.0))
        throw ParameterError("logit-beta DY requires 0 < alpha < kappa, got alpha=" +
                             std::to_string(alpha) + " kappa=" + std::to_string(kappa));
      break;
  }
}

double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist;
  return dist(rng);
}

void fill_standard_normal(std::span<double> out, Rng& rng) {
  std::normal_distribution<double> dist;
  for (auto& v : out) v = dist(rng);
}

namespace {

double uniform_open(Rng& rng) {
  // (0, 1): 53 random bits offset by half an ulp.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Marsaglia-Tsang for shape >= 1, returning log G.
double log_gamma_mt(double shape, Rng& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  std::normal_distribution<double> normal;
  for (;;) {
    double x, v;
    do {
      x = normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open(rng);
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d) + std::log(v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d) + std::log(v);
  }
}

}  // namespace

double log_gamma_variate(double shape, Rng& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape))
    throw ParameterError("gamma shape must be positive, got " + std::to_string(shape));
  if (shape >= 1.0) return log_gamma_mt(shape, rng);
  // G(a) = G(a + 1) * U^(1/a)
  return log_gamma_mt(shape + 1.0, rng) + std::log(uniform_open(rng)) / shape;
}

double gamma_variate(double shape, double rate, Rng& rng) {
  if (!(rate > 0.0)) throw ParameterError("gamma rate must be positive");
  return std::exp(log_gamma_variate(shape, rng)) / rate;
}

double inverse_gamma_variate(double nu, Rng& rng) {
  if (!(nu > 0.0)) throw ParameterError("inverse-gamma degrees of freedom must be positive");
  const double half = 0.5 * nu;
  return half * std::exp(-log_gamma_variate(half, rng));
}

double dy_sample(const DyParams& params, Rng& rng) {
  params.validate();
  switch (params.kind) {
    case DyKind::Gaussian: {
      const double mean = params.alpha / (2.0 * params.kappa);
      const double sd = std::sqrt(1.0 / (2.0 * params.kappa));
      return mean + sd * standard_normal(rng);
    }
    case DyKind::LogGamma:
      return log_gamma_variate(params.alpha, rng) - std::log(params.kappa);
    case DyKind::LogitBeta: {
      // logit(Ga / (Ga + Gb)) = log Ga - log Gb
      const double la = log_gamma_variate(params.alpha, rng);
      const double lb = log_gamma_variate(params.kappa - params.alpha, rng);
      return la - lb;
    }
  }
  return 0.0;
}

double dy_log_density(const DyParams& params, double eta) {
  params.validate();
  const double a = params.alpha;
  const double k = params.kappa;
  switch (params.kind) {
    case DyKind::Gaussian: {
      const double var = 1.0 / (2.0 * k);
      const double d = eta - a / (2.0 * k);
      return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * d * d / var;
    }
    case DyKind::LogGamma:
      return a * std::log(k) - std::lgamma(a) + a * eta - k * std::exp(eta);
    case DyKind::LogitBeta: {
      const double lbeta = std::lgamma(a) + std::lgamma(k - a) - std::lgamma(k);
      return a * eta - k * softplus(eta) - lbeta;
    }
  }
  return 0.0;
}

}  // namespace stvc
