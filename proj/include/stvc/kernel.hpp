#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stvc {

struct SpaceTimeCoord {
  std::array<double, 2> s{0.0, 0.0};
  double t = 0.0;

  friend bool operator==(const SpaceTimeCoord&, const SpaceTimeCoord&) = default;
};

double spatial_distance(const SpaceTimeCoord& a, const SpaceTimeCoord& b);

enum class KernelKind { SpaceTime, Matern };

// SpaceTime: (phi1 |t-t'|^2 + 1)^-1 exp(-phi2 ||s-s'|| / sqrt(1 + phi1 |t-t'|^2))
// Matern:    (phi d)^nu / (2^(nu-1) Gamma(nu)) K_nu(phi d), spatial only
struct KernelParams {
  KernelKind kind = KernelKind::SpaceTime;
  double a = 1.0;  // phi1 (temporal decay) or Matern phi
  double b = 1.0;  // phi2 (spatial decay) or Matern nu

  static KernelParams space_time(double phi1, double phi2);
  static KernelParams matern(double phi, double nu);

  double phi_temporal() const { return a; }
  double phi_spatial() const { return b; }

  void validate() const;
  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

double corr(const SpaceTimeCoord& a, const SpaceTimeCoord& b, const KernelParams& params);

// Symmetric n x n correlation matrix. The lower triangle is computed and
// mirrored, so the result is bitwise symmetric. Throws InputError on
// duplicate coordinates.
Eigen::MatrixXd corr_matrix(std::span<const SpaceTimeCoord> coords, const KernelParams& params);

Eigen::MatrixXd cross_corr_matrix(std::span<const SpaceTimeCoord> coords,
                                  std::span<const SpaceTimeCoord> new_coords,
                                  const KernelParams& params);

// Spatial decay giving correlation 0.05 at the given spatial distance (zero
// time gap). For Matern the smoothness is held at `nu`. Bisection to 1e-8.
double spatial_decay_for_range(double distance, KernelKind kind = KernelKind::SpaceTime,
                               double nu = 0.5);

// Temporal decay giving correlation 0.05 at the given time gap (zero spatial
// distance): 1 / (phi1 dt^2 + 1) = 0.05.
double temporal_decay_for_range(double time_gap);

}  // namespace stvc
