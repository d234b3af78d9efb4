#include "stvc/kernel.hpp"

#include <cmath>
#include <string>

#include "stvc/errors.hpp"

namespace stvc {

double spatial_distance(const SpaceTimeCoord& a, const SpaceTimeCoord& b) {
  return std::hypot(a.s[0] - b.s[0], a.s[1] - b.s[1]);
}

KernelParams KernelParams::space_time(double phi1, double phi2) {
  KernelParams k{KernelKind::SpaceTime, phi1, phi2};
  k.validate();
  return k;
}

KernelParams KernelParams::matern(double phi, double nu) {
  KernelParams k{KernelKind::Matern, phi, nu};
  k.validate();
  return k;
}

void KernelParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw ParameterError("kernel parameters must be strictly positive and finite");
}

namespace {

double matern_at(double d, double phi, double nu) {
  if (d == 0.0) return 1.0;
  const double x = phi * d;
  if (nu == 0.5) return std::exp(-x);
  const double v = std::pow(x, nu) / (std::pow(2.0, nu - 1.0) * std::tgamma(nu)) *
                   std::cyl_bessel_k(nu, x);
  return std::isfinite(v) ? v : 0.0;
}

double eval(const SpaceTimeCoord& x, const SpaceTimeCoord& y, const KernelParams& p) {
  const double d = spatial_distance(x, y);
  if (p.kind == KernelKind::Matern) return matern_at(d, p.a, p.b);
  const double dt = x.t - y.t;
  const double denom = p.a * dt * dt + 1.0;
  return std::exp(-p.b * d / std::sqrt(denom)) / denom;
}

}  // namespace

double corr(const SpaceTimeCoord& a, const SpaceTimeCoord& b, const KernelParams& params) {
  params.validate();
  return eval(a, b, params);
}

Eigen::MatrixXd corr_matrix(std::span<const SpaceTimeCoord> coords, const KernelParams& params) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(coords.size());
  Eigen::MatrixXd R(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    R(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const auto& ci = coords[static_cast<std::size_t>(i)];
      const auto& cj = coords[static_cast<std::size_t>(j)];
      if (ci == cj)
        throw InputError("duplicate coordinates at rows " + std::to_string(j) + " and " +
                         std::to_string(i));
      R(i, j) = eval(ci, cj, params);
    }
  }
  R.triangularView<Eigen::StrictlyUpper>() = R.transpose();
  return R;
}

Eigen::MatrixXd cross_corr_matrix(std::span<const SpaceTimeCoord> coords,
                                  std::span<const SpaceTimeCoord> new_coords,
                                  const KernelParams& params) {
  params.validate();
  Eigen::MatrixXd C(static_cast<Eigen::Index>(coords.size()),
                    static_cast<Eigen::Index>(new_coords.size()));
  for (std::size_t j = 0; j < new_coords.size(); ++j)
    for (std::size_t i = 0; i < coords.size(); ++i)
      C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          eval(coords[i], new_coords[j], params);
  return C;
}

namespace {

// Root of a decreasing function f on (0, inf) with f(lo) > 0 > f(hi).
template <class F>
double bisect_decreasing(F f, double lo, double hi) {
  while (f(hi) > 0.0) hi *= 2.0;
  while (f(lo) < 0.0) lo *= 0.5;
  for (int it = 0; it < 400 && hi - lo > 1e-8 * std::max(1.0, lo); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double spatial_decay_for_range(double distance, KernelKind kind, double nu) {
  if (!(distance > 0.0)) throw ConfigError("effective range distance must be positive");
  if (kind == KernelKind::SpaceTime)
    return bisect_decreasing([&](double phi) { return std::exp(-phi * distance) - 0.05; },
                             1e-6, 1.0);
  return bisect_decreasing([&](double phi) { return matern_at(distance, phi, nu) - 0.05; },
                           1e-6, 1.0);
}

double temporal_decay_for_range(double time_gap) {
  if (!(time_gap > 0.0)) throw ConfigError("effective range time gap must be positive");
  return bisect_decreasing(
      [&](double phi) { return 1.0 / (phi * time_gap * time_gap + 1.0) - 0.05; }, 1e-6, 1.0);
}

}  // namespace stvc
