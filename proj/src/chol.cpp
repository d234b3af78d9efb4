#include "stvc/chol.hpp"

#include <cmath>
#include <string>

#include "stvc/errors.hpp"

namespace stvc {

Partition::Partition(std::vector<Eigen::Index> boundaries) : bounds_(std::move(boundaries)) {
  if (bounds_.size() < 2 || bounds_.front() != 0)
    throw InputError("partition must start at 0 and contain at least one block");
  for (std::size_t i = 1; i < bounds_.size(); ++i)
    if (bounds_[i] <= bounds_[i - 1]) throw InputError("partition blocks must be non-empty");
}

Partition Partition::contiguous(Eigen::Index n, Eigen::Index K) {
  if (K < 1 || K > n)
    throw ConfigError("cannot split " + std::to_string(n) + " indices into " +
                      std::to_string(K) + " blocks");
  std::vector<Eigen::Index> b(static_cast<std::size_t>(K) + 1, 0);
  const Eigen::Index base = n / K, extra = n % K;
  for (Eigen::Index k = 0; k < K; ++k)
    b[static_cast<std::size_t>(k) + 1] = b[static_cast<std::size_t>(k)] + base + (k < extra ? 1 : 0);
  return Partition(std::move(b));
}

namespace {

// Unblocked right-looking factorization used only to locate the failing pivot.
double first_bad_pivot(Eigen::MatrixXd A) {
  const Eigen::Index n = A.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = A(j, j) - A.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) return d;
    const double l = std::sqrt(d);
    A(j, j) = l;
    for (Eigen::Index i = j + 1; i < n; ++i)
      A(i, j) = (A(i, j) - A.row(i).head(j).dot(A.row(j).head(j))) / l;
  }
  return 0.0;
}

Eigen::MatrixXd upper_from_lower(const Eigen::MatrixXd& L) {
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(L.rows(), L.cols());
  U.triangularView<Eigen::Upper>() = L.transpose();
  return U;
}

// Factorizes the lower triangle of A in place.
bool factor_lower_in_place(Eigen::MatrixXd& A) {
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>, Eigen::Lower> llt(A);
  return llt.info() == Eigen::Success;
}

}  // namespace

Eigen::MatrixXd cholesky(const Eigen::MatrixXd& R) {
  if (R.rows() != R.cols()) throw InputError("cholesky requires a square matrix");
  Eigen::MatrixXd A = R;
  if (!factor_lower_in_place(A)) {
    const double pivot = first_bad_pivot(R);
    throw FactorizationError("matrix is not positive definite (pivot " + std::to_string(pivot) + ")",
                             pivot);
  }
  return upper_from_lower(A);
}

JitterResult cholesky_with_jitter(const Eigen::MatrixXd& R, double jitter) {
  Eigen::MatrixXd A = R;
  if (factor_lower_in_place(A)) return {upper_from_lower(A), false};
  Eigen::MatrixXd Rj = R;
  Rj.diagonal().array() += jitter;
  return {cholesky(Rj), true};
}

void upper_gram_lower(const Eigen::Ref<const Eigen::MatrixXd>& U, Eigen::Ref<Eigen::MatrixXd> out) {
  const Eigen::Index m = U.rows();
  if (m <= 64) {
    out.triangularView<Eigen::Lower>() =
        U.transpose().triangularView<Eigen::Lower>() * U.triangularView<Eigen::Upper>().toDenseMatrix();
    return;
  }
  const Eigen::Index h = m / 2, t = m - h;
  auto A = U.topLeftCorner(h, h);
  auto B = U.topRightCorner(h, t);
  auto C = U.bottomRightCorner(t, t);
  upper_gram_lower(A, out.topLeftCorner(h, h));
  out.bottomLeftCorner(t, h).noalias() = B.transpose() * A.triangularView<Eigen::Upper>();
  upper_gram_lower(C, out.bottomRightCorner(t, t));
  out.bottomRightCorner(t, t).selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
}

Eigen::MatrixXd delete_block(const Eigen::MatrixXd& R, const Partition& partition, Eigen::Index k) {
  const Eigen::Index n = R.rows(), a = partition.start(k), e = partition.end(k), m = n - e;
  Eigen::MatrixXd out(n - (e - a), n - (e - a));
  out.topLeftCorner(a, a) = R.topLeftCorner(a, a);
  out.topRightCorner(a, m) = R.topRightCorner(a, m);
  out.bottomLeftCorner(m, a) = R.bottomLeftCorner(m, a);
  out.bottomRightCorner(m, m) = R.bottomRightCorner(m, m);
  return out;
}

Eigen::MatrixXd chol_delete_block(const Eigen::MatrixXd& R, const BlockedFactor& factor,
                                  Eigen::Index k) {
  const Partition& part = factor.partition;
  const Eigen::Index K = part.blocks();
  const Eigen::MatrixXd& U = factor.upper;
  if (k < 0 || k >= K)
    throw IndexError("block index " + std::to_string(k) + " out of range [0, " +
                     std::to_string(K) + ")");
  if (K < 2) throw IndexError("cannot delete the only block of a partition");
  if (U.rows() != part.total() || R.rows() != part.total())
    throw InputError("factor size does not match its partition");

  const Eigen::Index n = U.rows(), a = part.start(k), e = part.end(k), nk = e - a, m = n - e;
  if (k == K - 1) return U.topLeftCorner(a, a);
  if (k == 0) return cholesky(R.bottomRightCorner(m, m));

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n - nk, n - nk);
  out.topLeftCorner(a, a) = U.topLeftCorner(a, a);
  out.topRightCorner(a, m) = U.topRightCorner(a, m);

  Eigen::MatrixXd G(m, m);
  upper_gram_lower(U.bottomRightCorner(m, m), G);
  G.selfadjointView<Eigen::Lower>().rankUpdate(U.block(a, e, nk, m).transpose());
  const Eigen::MatrixXd gram = G.selfadjointView<Eigen::Lower>();
  if (!factor_lower_in_place(G)) {
    const double pivot = first_bad_pivot(gram);
    throw FactorizationError("block-deletion update lost positive definiteness", pivot);
  }
  out.bottomRightCorner(m, m).triangularView<Eigen::Upper>() = G.transpose();
  return out;
}

Eigen::VectorXd tri_solve(const Eigen::MatrixXd& T, const Eigen::VectorXd& rhs, TriSide side) {
  if (T.rows() != T.cols() || T.rows() != rhs.size())
    throw InputError("tri_solve: shape mismatch");
  for (Eigen::Index i = 0; i < T.rows(); ++i)
    if (T(i, i) == 0.0)
      throw FactorizationError("triangular solve: zero diagonal at " + std::to_string(i), 0.0);
  Eigen::VectorXd x = rhs;
  switch (side) {
    case TriSide::Lower:
      T.triangularView<Eigen::Lower>().solveInPlace(x);
      break;
    case TriSide::Upper:
      T.triangularView<Eigen::Upper>().solveInPlace(x);
      break;
    case TriSide::LowerTranspose:
      T.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
      break;
    case TriSide::UpperTranspose:
      T.triangularView<Eigen::Upper>().transpose().solveInPlace(x);
      break;
  }
  return x;
}

}  // namespace stvc
