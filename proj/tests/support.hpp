#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "stvc/kernel.hpp"
#include "stvc/rng.hpp"

namespace testing {

// Asymptotic series after shifting the argument above 10.
inline double digamma(double x) {
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  return acc + std::log(x) - 0.5 / x -
         f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f / 132))));
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double std_error(const std::vector<double>& v) {
  return std::sqrt(variance(v) / static_cast<double>(v.size()));
}

// Two-sided one-sample KS p-value (asymptotic Kolmogorov distribution).
inline double ks_pvalue(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max({d, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k < 200; ++k) p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

inline Eigen::MatrixXd random_spd(Eigen::Index n, stvc::Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = normal(rng);
  Eigen::MatrixXd R = A * A.transpose() / static_cast<double>(n);
  R.diagonal().array() += 1.0;
  return R;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, stvc::Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd A(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) A(i, j) = normal(rng);
  return A;
}

inline std::vector<stvc::SpaceTimeCoord> random_coords(std::size_t n, stvc::Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<stvc::SpaceTimeCoord> c(n);
  for (auto& x : c) {
    x.s = {u(rng), u(rng)};
    x.t = u(rng);
  }
  return c;
}

}  // namespace testing
