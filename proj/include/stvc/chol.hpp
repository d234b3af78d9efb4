#pragma once

#include <vector>

#include <Eigen/Dense>

namespace stvc {

// K consecutive index ranges covering [0, n): block k is [start(k), end(k)).
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<Eigen::Index> boundaries);

  // Sizes differ by at most one; the first n % K blocks are the larger ones.
  static Partition contiguous(Eigen::Index n, Eigen::Index K);

  Eigen::Index blocks() const { return static_cast<Eigen::Index>(bounds_.size()) - 1; }
  Eigen::Index total() const { return bounds_.empty() ? 0 : bounds_.back(); }
  Eigen::Index start(Eigen::Index k) const { return bounds_[static_cast<std::size_t>(k)]; }
  Eigen::Index end(Eigen::Index k) const { return bounds_[static_cast<std::size_t>(k) + 1]; }
  Eigen::Index size(Eigen::Index k) const { return end(k) - start(k); }
  const std::vector<Eigen::Index>& boundaries() const { return bounds_; }

 private:
  std::vector<Eigen::Index> bounds_;
};

// Upper-triangular factor U of R = U^T U, with the block partition of its rows.
struct BlockedFactor {
  Eigen::MatrixXd upper;
  Partition partition;
};

// Upper Cholesky factor. Throws FactorizationError carrying the first
// non-positive pivot.
Eigen::MatrixXd cholesky(const Eigen::MatrixXd& R);

struct JitterResult {
  Eigen::MatrixXd upper;
  bool jittered = false;
};

// Plain factorization first; on failure retries once with `jitter` added to
// the diagonal.
JitterResult cholesky_with_jitter(const Eigen::MatrixXd& R, double jitter = 1e-10);

// Lower triangle of U^T U for upper-triangular U, in about m^3/3 flops.
void upper_gram_lower(const Eigen::Ref<const Eigen::MatrixXd>& U, Eigen::Ref<Eigen::MatrixXd> out);

// Factor of R with block k (0-based) of the stored partition removed from
// both rows and columns.
//   k == K-1 : leading principal block of the stored factor, copied
//   0 < k < K-1 : C11, C13 copied; C33 = chol(U33^T U33 + U23^T U23)
//   k == 0   : fresh factorization of R_{-k}
Eigen::MatrixXd chol_delete_block(const Eigen::MatrixXd& R, const BlockedFactor& factor,
                                  Eigen::Index k);

// R with block k's rows and columns removed.
Eigen::MatrixXd delete_block(const Eigen::MatrixXd& R, const Partition& partition, Eigen::Index k);

enum class TriSide { Lower, Upper, LowerTranspose, UpperTranspose };

// Solves T x = rhs (or T^T x = rhs) by substitution.
Eigen::VectorXd tri_solve(const Eigen::MatrixXd& T, const Eigen::VectorXd& rhs, TriSide side);

}  // namespace stvc
