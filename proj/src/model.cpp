#include "stvc/model.hpp"

#include <cmath>
#include <string>

#include "stvc/chol.hpp"
#include "stvc/errors.hpp"
#include "stvc/parallel.hpp"

namespace stvc {

namespace {

Eigen::Index n_rows_check(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xtilde,
                          const Eigen::VectorXd& v_eta, const Eigen::VectorXd& v_xi,
                          const Eigen::VectorXd& v_beta, const Eigen::MatrixXd& v_z) {
  const Eigen::Index n = X.rows();
  if (Xtilde.rows() != n || v_eta.size() != n || v_xi.size() != n || v_z.rows() != n ||
      v_z.cols() != Xtilde.cols() || v_beta.size() != X.cols())
    throw InputError("projection inputs have inconsistent shapes");
  return n;
}

}  // namespace

Eigen::MatrixXd Dataset::xtilde() const {
  Eigen::MatrixXd out(n(), r());
  for (Eigen::Index j = 0; j < r(); ++j) out.col(j) = X.col(varying_cols[static_cast<std::size_t>(j)]);
  return out;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.family.kind = family.kind;
  out.varying_cols = varying_cols;
  out.names = names;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), p());
  out.coords.reserve(rows.size());
  out.y.reserve(rows.size());
  out.family.trials.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = static_cast<std::size_t>(rows[i]);
    out.coords.push_back(coords[src]);
    out.y.push_back(y[src]);
    out.family.trials.push_back(family.trials[src]);
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  }
  return out;
}

void Dataset::validate() const {
  const auto nn = static_cast<std::size_t>(n());
  if (coords.size() != nn || y.size() != nn || family.trials.size() != nn)
    throw InputError("dataset columns have inconsistent lengths");
  if (varying_cols.empty()) throw InputError("at least one varying coefficient is required");
  for (int c : varying_cols)
    if (c < 0 || c >= p()) throw InputError("varying coefficient column out of range");
  if (n() < p() + 1) throw InputError("need at least p + 1 observations");
  family.validate();
  for (std::size_t i = 0; i < nn; ++i) {
    if (y[i] < 0) throw InputError("negative response at row " + std::to_string(i));
    if (family.kind == Family::Binomial && y[i] > family.trials[i])
      throw InputError("response exceeds trials at row " + std::to_string(i));
    if (!std::isfinite(coords[i].s[0]) || !std::isfinite(coords[i].s[1]) ||
        !std::isfinite(coords[i].t))
      throw InputError("non-finite coordinate at row " + std::to_string(i));
  }
  if (!X.allFinite()) throw InputError("design matrix has non-finite entries");
}

CandidateModel CandidateModel::make(Family family, double alpha_eps, double sigma_xi,
                                    const KernelParams& kernel) {
  CandidateModel m{alpha_eps, family == Family::Binomial ? 2.0 * alpha_eps : 0.0, sigma_xi,
                   kernel};
  m.validate(family);
  return m;
}

void CandidateModel::validate(Family family) const {
  if (!(alpha_eps > 0.0)) throw ConfigError("alpha_eps must be positive");
  if (!(sigma_xi > 0.0)) throw ConfigError("sigma_xi must be positive");
  const double want = family == Family::Binomial ? 2.0 * alpha_eps : 0.0;
  if (kappa_eps != want)
    throw ConfigError("kappa_eps must be " + std::to_string(want) + " for the " +
                      family_name(family) + " family");
  kernel.validate();
}

Hyperparams Hyperparams::uniform(Eigen::Index r, double nu) {
  return Hyperparams{nu, std::vector<double>(static_cast<std::size_t>(r), nu)};
}

void Hyperparams::validate(Eigen::Index r) const {
  if (!(nu_beta > 0.0)) throw ConfigError("nu_beta must be positive");
  if (static_cast<Eigen::Index>(nu_z.size()) != r)
    throw ConfigError("nu_z needs one entry per varying coefficient");
  for (double v : nu_z)
    if (!(v > 0.0)) throw ConfigError("nu_z entries must be positive");
}

Eigen::VectorXd to_location_major(const Eigen::VectorXd& pm, Eigen::Index n, Eigen::Index r) {
  Eigen::VectorXd out(n * r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < n; ++i) out(i * r + j) = pm(j * n + i);
  return out;
}

Eigen::VectorXd to_process_major(const Eigen::VectorXd& lm, Eigen::Index n, Eigen::Index r) {
  Eigen::VectorXd out(n * r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < n; ++i) out(j * n + i) = lm(i * r + j);
  return out;
}

ProjectionCache::ProjectionCache(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xtilde)
    : r_(Xtilde.cols()) {
  const Eigen::Index n = Xtilde.rows();
  if (X.rows() != n) throw InputError("X and X~ must have the same number of rows");
  sqnorm_ = Xtilde.rowwise().squaredNorm();
  local_.reserve(static_cast<std::size_t>(n));
  local_xt_.resize(n, r_);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd xt = Xtilde.row(i).transpose();
    Eigen::MatrixXd Di = xt * xt.transpose();
    Di.diagonal().array() += 1.0;
    local_.emplace_back(Di);
    local_xt_.row(i) = local_.back().solve(xt).transpose();
  }
  finish(X);
}

void ProjectionCache::finish(const Eigen::MatrixXd& X) {
  const Eigen::VectorXd w = (2.0 + sqnorm_.array()).inverse();
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(X.cols(), X.cols());
  S.noalias() += X.transpose() * w.asDiagonal() * X;
  schur_.compute(S);
}

ProjectionCache ProjectionCache::subset(const std::vector<Eigen::Index>& rows,
                                        const Eigen::MatrixXd& X) const {
  ProjectionCache out;
  out.r_ = r_;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.sqnorm_.resize(m);
  out.local_xt_.resize(m, r_);
  out.local_.reserve(rows.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index src = rows[static_cast<std::size_t>(i)];
    out.sqnorm_(i) = sqnorm_(src);
    out.local_.push_back(local_[static_cast<std::size_t>(src)]);
    out.local_xt_.row(i) = local_xt_.row(src);
  }
  out.finish(X);
  return out;
}

Gamma ProjectionCache::project(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xtilde,
                               const Eigen::VectorXd& v_eta, const Eigen::VectorXd& v_xi,
                               const Eigen::VectorXd& v_beta, const Eigen::MatrixXd& v_z) const {
  const Eigen::Index n = n_rows_check(X, Xtilde, v_eta, v_xi, v_beta, v_z);
  const Eigen::Index r = r_;
  if (n != this->n() || Xtilde.cols() != r) throw InputError("projection cache does not match inputs");

  // w_(i) = D_i^-1 (x~_i v_eta,i + v_z,(i)), location-major blocks
  Eigen::VectorXd w(n * r);
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd hi = Xtilde.row(i).transpose() * v_eta(i) + v_z.row(i).transpose();
    local_[static_cast<std::size_t>(i)].solveInPlace(hi);
    w.segment(i * r, r) = hi;
    g(i) = Xtilde.row(i).dot(hi);
  }

  const Eigen::ArrayXd two_plus = 2.0 + sqnorm_.array();
  const Eigen::VectorXd resid = v_eta - g;
  const Eigen::VectorXd e = resid + v_xi;
  Eigen::VectorXd rhs = X.transpose() * resid + v_beta;
  rhs.noalias() -= X.transpose() * (e.array() / two_plus).matrix();

  Gamma out;
  out.beta = schur_.solve(rhs);
  const Eigen::VectorXd xb = X * out.beta;
  out.xi = ((1.0 + sqnorm_.array()) * e.array() - xb.array()) / two_plus;

  out.z.resize(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = out.xi(i) + xb(i);
    out.z.row(i) = w.segment(i * r, r).transpose() - u * local_xt_.row(i);
  }
  return out;
}

Gamma project(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xtilde,
              const Eigen::VectorXd& v_eta, const Eigen::VectorXd& v_xi,
              const Eigen::VectorXd& v_beta, const Eigen::MatrixXd& v_z) {
  return ProjectionCache(X, Xtilde).project(X, Xtilde, v_eta, v_xi, v_beta, v_z);
}

Gamma project_naive(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xtilde,
                    const Eigen::VectorXd& v_eta, const Eigen::VectorXd& v_xi,
                    const Eigen::VectorXd& v_beta, const Eigen::MatrixXd& v_z) {
  const Eigen::Index n = n_rows_check(X, Xtilde, v_eta, v_xi, v_beta, v_z);
  const Eigen::Index p = X.cols(), r = Xtilde.cols(), dim = n + p + n * r;
  Eigen::MatrixXd H1 = Eigen::MatrixXd::Zero(n, dim);
  H1.leftCols(n).setIdentity();
  H1.middleCols(n, p) = X;
  for (Eigen::Index j = 0; j < r; ++j)
    H1.middleCols(n + p + j * n, n).diagonal() = Xtilde.col(j);
  Eigen::MatrixXd M = H1.transpose() * H1;
  M.diagonal().array() += 1.0;
  Eigen::VectorXd v_gamma(dim);
  v_gamma << v_xi, v_beta, Eigen::Map<const Eigen::VectorXd>(v_z.data(), n * r);
  const Eigen::VectorXd sol = M.llt().solve(H1.transpose() * v_eta + v_gamma);
  Gamma out;
  out.xi = sol.head(n);
  out.beta = sol.segment(n, p);
  out.z = Eigen::Map<const Eigen::MatrixXd>(sol.data() + n + p, n, r);
  return out;
}

AuxVector draw_aux_vector(const Dataset& data, const CandidateModel& model,
                          const Hyperparams& hyper, const Eigen::MatrixXd& corr_upper, Rng& rng) {
  const Eigen::Index n = data.n(), p = data.p(), r = data.r();
  if (corr_upper.rows() != n) throw InputError("correlation factor does not match the data");
  AuxVector v;
  v.v_eta.resize(n);
  const bool binomial = data.family.kind == Family::Binomial;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const DyParams dy{data.y[si] + model.alpha_eps, data.family.trials[si] + model.kappa_eps,
                      binomial ? DyKind::LogitBeta : DyKind::LogGamma};
    try {
      v.v_eta(i) = dy_sample(dy, rng);
    } catch (const ParameterError& e) {
      throw ParameterError("observation " + std::to_string(i) + ": " + e.what());
    }
  }

  std::normal_distribution<double> normal;
  v.v_xi.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) v.v_xi(i) = model.sigma_xi * normal(rng);

  v.sigma2_beta = inverse_gamma_variate(hyper.nu_beta, rng);
  const double sb = std::sqrt(v.sigma2_beta);
  v.v_beta.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) v.v_beta(j) = sb * normal(rng);

  v.sigma2_z.resize(r);
  v.v_z.resize(n, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    v.sigma2_z(j) = inverse_gamma_variate(hyper.nu_z[static_cast<std::size_t>(j)], rng);
    const double sz = std::sqrt(v.sigma2_z(j));
    for (Eigen::Index i = 0; i < n; ++i) v.v_z(i, j) = sz * normal(rng);
  }
  // N(0, sigma^2 R) via U^T eps
  v.v_z = corr_upper.triangularView<Eigen::Upper>().transpose() * v.v_z;
  return v;
}

ModelFit ModelFit::prepare(const Dataset& data, const KernelParams& kernel) {
  ModelFit fit;
  fit.data = &data;
  fit.xtilde = data.xtilde();
  auto factor = cholesky_with_jitter(corr_matrix(data.coords, kernel));
  fit.corr_upper = std::move(factor.upper);
  fit.jittered = factor.jittered;
  fit.cache = ProjectionCache(data.X, fit.xtilde);
  return fit;
}

PosteriorDraw ModelFit::draw(const CandidateModel& model, const Hyperparams& hyper,
                             Rng& rng) const {
  AuxVector v = draw_aux_vector(*data, model, hyper, corr_upper, rng);
  Gamma g = cache.project(data->X, xtilde, v.v_eta, v.v_xi, v.v_beta, v.v_z);
  PosteriorDraw d;
  d.beta = std::move(g.beta);
  d.z = std::move(g.z);
  d.xi = std::move(g.xi);
  d.sigma2_beta = v.sigma2_beta;
  d.sigma2_z = std::move(v.sigma2_z);
  d.eta = std::move(v.v_eta);
  return d;
}

std::vector<PosteriorDraw> posterior_sample(const Dataset& data, const CandidateModel& model,
                                            const Hyperparams& hyper, int N, Rng& rng) {
  if (N < 1) throw ConfigError("draw count must be >= 1");
  data.validate();
  model.validate(data.family.kind);
  hyper.validate(data.r());
  const ModelFit fit = ModelFit::prepare(data, model.kernel);
  std::vector<PosteriorDraw> out;
  out.reserve(static_cast<std::size_t>(N));
  for (int s = 0; s < N; ++s) out.push_back(fit.draw(model, hyper, rng));
  return out;
}

std::vector<PosteriorDraw> posterior_sample(const ModelFit& fit, const CandidateModel& model,
                                            const Hyperparams& hyper, int N, std::uint64_t seed,
                                            int workers) {
  if (N < 1) throw ConfigError("draw count must be >= 1");
  constexpr int kChunk = 64;
  const auto chunks = static_cast<std::size_t>((N + kChunk - 1) / kChunk);
  std::vector<PosteriorDraw> out(static_cast<std::size_t>(N));
  parallel_for(chunks, workers, [&](std::size_t c) {
    Rng rng = make_rng(seed, {c});
    const int begin = static_cast<int>(c) * kChunk;
    const int end = std::min(N, begin + kChunk);
    for (int s = begin; s < end; ++s) out[static_cast<std::size_t>(s)] = fit.draw(model, hyper, rng);
  });
  return out;
}

}  // namespace stvc
