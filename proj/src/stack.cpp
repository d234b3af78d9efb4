#include "stvc/stack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "stvc/errors.hpp"
#include "stvc/kernel.hpp"
#include "stvc/parallel.hpp"

namespace stvc {

namespace {

constexpr std::uint64_t kFoldTag = 0xF01D;
constexpr std::uint64_t kFinalTag = 0xF17A1;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

[[noreturn]] void rethrow_with_context(const std::string& where) {
  try {
    throw;
  } catch (const FactorizationError& e) {
    throw FactorizationError(where + ": " + e.what(), e.pivot());
  } catch (const NumericalError& e) {
    throw NumericalError(where + ": " + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(where + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(where + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(where + ": " + e.what());
  }
}

// Distinct kernels in order of first appearance, and each model's group.
std::vector<std::vector<std::size_t>> group_by_kernel(const std::vector<CandidateModel>& models) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<KernelParams> seen;
  for (std::size_t l = 0; l < models.size(); ++l) {
    auto it = std::find(seen.begin(), seen.end(), models[l].kernel);
    if (it == seen.end()) {
      seen.push_back(models[l].kernel);
      groups.push_back({l});
    } else {
      groups[static_cast<std::size_t>(it - seen.begin())].push_back(l);
    }
  }
  return groups;
}

// Training side and held-out side of one fold, in permuted order.
struct FoldData {
  Dataset train;
  std::vector<SpaceTimeCoord> held_coords;
  Eigen::MatrixXd held_X, held_xt;
  std::vector<int> held_y, held_trials;
  std::vector<Eigen::Index> held_original;  // row of each held-out point in the input data
  ProjectionCache cache;
};

Eigen::VectorXd eta_at(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xt, const Eigen::VectorXd& beta,
                       const Eigen::MatrixXd& z_new) {
  Eigen::VectorXd eta = X * beta;
  eta += (Xt.array() * z_new.array()).rowwise().sum().matrix();
  return eta;
}

Eigen::MatrixXd draw_z_new(const ConditionalTBasis& basis, const PosteriorDraw& d,
                           const Hyperparams& hyper, Eigen::Index m, Rng& rng) {
  Eigen::MatrixXd z_new(m, d.z.cols());
  for (Eigen::Index j = 0; j < d.z.cols(); ++j)
    z_new.col(j) = basis.sample(d.z.col(j), hyper.nu_z[static_cast<std::size_t>(j)], rng);
  return z_new;
}

}  // namespace

std::vector<CandidateModel> build_grid(const std::vector<double>& alpha_eps,
                                       const std::vector<double>& sigma_xi,
                                       const std::vector<double>& phi1,
                                       const std::vector<double>& phi2, Family family) {
  auto check = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) throw ConfigError(std::string("grid ") + name + " is empty");
    for (double v : g)
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string("grid ") + name + " has a non-positive entry");
  };
  check(alpha_eps, "alpha_eps");
  check(sigma_xi, "sigma_xi");
  check(phi1, "phi1");
  check(phi2, "phi2");
  std::vector<CandidateModel> out;
  out.reserve(alpha_eps.size() * sigma_xi.size() * phi1.size() * phi2.size());
  for (double a : alpha_eps)
    for (double s : sigma_xi)
      for (double p1 : phi1)
        for (double p2 : phi2) {
          try {
            out.push_back(CandidateModel::make(family, a, s, KernelParams::space_time(p1, p2)));
          } catch (const ParameterError& e) {
            throw ConfigError(std::string("invalid grid point: ") + e.what());
          }
        }
  return out;
}

std::vector<Eigen::Index> FoldPartition::held_out(Eigen::Index k) const {
  if (k < 0 || k >= folds()) throw IndexError("fold index out of range");
  return {permutation.begin() + blocks.start(k), permutation.begin() + blocks.end(k)};
}

FoldPartition make_folds(Eigen::Index n, Eigen::Index K, std::uint64_t seed) {
  if (K < 2) throw ConfigError("K must be at least 2");
  if (K > n) throw ConfigError("K = " + std::to_string(K) + " exceeds n = " + std::to_string(n));
  FoldPartition f;
  f.permutation.resize(static_cast<std::size_t>(n));
  std::iota(f.permutation.begin(), f.permutation.end(), Eigen::Index{0});
  Rng rng(seed);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i);
    std::swap(f.permutation[static_cast<std::size_t>(i)],
              f.permutation[static_cast<std::size_t>(pick(rng))]);
  }
  f.blocks = Partition::contiguous(n, K);
  return f;
}

LooResult compute_loo_matrix(const Dataset& data, const std::vector<CandidateModel>& models,
                             const Hyperparams& hyper, const FoldPartition& folds,
                             const LooOptions& options) {
  data.validate();
  hyper.validate(data.r());
  if (models.empty()) throw ConfigError("no candidate models");
  for (const auto& m : models) m.validate(data.family.kind);
  if (options.S < 1) throw ConfigError("S must be >= 1");
  const Eigen::Index n = data.n();
  if (static_cast<Eigen::Index>(folds.permutation.size()) != n || folds.blocks.total() != n)
    throw InputError("fold partition does not match the data");

  const Dataset perm = data.subset(folds.permutation);
  const Eigen::MatrixXd perm_xt = perm.xtilde();
  const ProjectionCache full_cache(perm.X, perm_xt);
  const Eigen::Index K = folds.folds();
  const auto Ku = static_cast<std::size_t>(K);

  std::vector<FoldData> fold_data(Ku);
  for (std::size_t k = 0; k < Ku; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    std::vector<Eigen::Index> train_rows, held_rows;
    for (Eigen::Index i = 0; i < n; ++i)
      (i >= folds.blocks.start(kk) && i < folds.blocks.end(kk) ? held_rows : train_rows).push_back(i);
    FoldData& fd = fold_data[k];
    fd.train = perm.subset(train_rows);
    const Dataset held = perm.subset(held_rows);
    fd.held_coords = held.coords;
    fd.held_X = held.X;
    fd.held_xt = held.xtilde();
    fd.held_y = held.y;
    fd.held_trials = held.family.trials;
    for (Eigen::Index i : held_rows) fd.held_original.push_back(folds.permutation[static_cast<std::size_t>(i)]);
    fd.cache = full_cache.subset(train_rows, fd.train.X);
  }

  std::function<std::uint64_t(std::size_t, std::size_t)> cell_seed = options.cell_seed;
  if (!cell_seed)
    cell_seed = [&](std::size_t l, std::size_t k) { return derive_seed(options.seed, {l, k}); };

  LooResult result;
  result.loo.log_values.resize(n, static_cast<Eigen::Index>(models.size()));
  result.cells.resize(models.size() * Ku);
  std::vector<long> floored(models.size() * Ku, 0);

  for (const auto& group : group_by_kernel(models)) {
    const KernelParams& kernel = models[group.front()].kernel;
    Eigen::MatrixXd R;
    JitterResult full;
    try {
      R = corr_matrix(perm.coords, kernel);
      full = cholesky_with_jitter(R);
    } catch (...) {
      rethrow_with_context("model " + std::to_string(group.front()) + ": full-data factorization");
    }
    if (full.jittered) {
      R.diagonal().array() += 1e-10;
      ++result.jitter_events;
    }
    const BlockedFactor factor{std::move(full.upper), folds.blocks};

    std::vector<ModelFit> fits(Ku);
    std::vector<ConditionalTBasis> bases(Ku);
    std::vector<int> basis_jitter(Ku, 0);
    parallel_for(Ku, options.workers, [&](std::size_t k) {
      const auto kk = static_cast<Eigen::Index>(k);
      try {
        const FoldData& fd = fold_data[k];
        ModelFit& fit = fits[k];
        fit.data = &fd.train;
        fit.xtilde = fd.train.xtilde();
        fit.corr_upper = options.naive_factors ? cholesky(delete_block(R, folds.blocks, kk))
                                               : chol_delete_block(R, factor, kk);
        fit.cache = fd.cache;
        const Eigen::MatrixXd C = cross_corr_matrix(fd.train.coords, fd.held_coords, kernel);
        const Eigen::MatrixXd Rt = corr_matrix(fd.held_coords, kernel);
        bases[k] = ConditionalTBasis::build(fit.corr_upper, C, Rt, true);
        basis_jitter[k] = bases[k].jittered ? 1 : 0;
      } catch (...) {
        rethrow_with_context("model " + std::to_string(group.front()) + ", fold " + std::to_string(k));
      }
    });
    for (int j : basis_jitter) result.jitter_events += j;

    const std::size_t cells = group.size() * Ku;
    parallel_for(cells, options.workers, [&](std::size_t c) {
      const std::size_t l = group[c / Ku];
      const std::size_t k = c % Ku;
      const std::uint64_t seed = cell_seed(l, k);
      result.cells[l * Ku + k] = {l, k, seed};
      try {
        const FoldData& fd = fold_data[k];
        const auto m = static_cast<Eigen::Index>(fd.held_y.size());
        Rng rng(seed);
        std::vector<LogMeanExp> acc(static_cast<std::size_t>(m));
        for (int s = 0; s < options.S; ++s) {
          const PosteriorDraw d = fits[k].draw(models[l], hyper, rng);
          const Eigen::MatrixXd z_new = draw_z_new(bases[k], d, hyper, m, rng);
          const Eigen::VectorXd eta = eta_at(fd.held_X, fd.held_xt, d.beta, z_new);
          for (Eigen::Index i = 0; i < m; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            acc[iu].add(ef_log_density(fd.held_y[iu], eta(i), fd.held_trials[iu], data.family.kind));
          }
        }
        for (Eigen::Index i = 0; i < m; ++i) {
          const PointDensity pd = finish_density(acc[static_cast<std::size_t>(i)]);
          if (pd.floored) ++floored[l * Ku + k];
          result.loo.log_values(fd.held_original[static_cast<std::size_t>(i)], static_cast<Eigen::Index>(l)) =
              pd.log_value;
        }
      } catch (...) {
        rethrow_with_context("model " + std::to_string(l) + ", fold " + std::to_string(k) +
                             " (seed " + std::to_string(seed) + ")");
      }
    });
  }
  for (long f : floored) result.floored += f;
  return result;
}

double stacking_objective(const Eigen::MatrixXd& log_p, const Eigen::VectorXd& w) {
  if (log_p.cols() != w.size()) throw InputError("weight length does not match the model count");
  if (log_p.rows() == 0) throw InputError("empty density matrix");
  double total = 0.0;
  for (Eigen::Index i = 0; i < log_p.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index l = 0; l < w.size(); ++l)
      if (w(l) > 0.0) mx = std::max(mx, log_p(i, l));
    double sum = 0.0;
    for (Eigen::Index l = 0; l < w.size(); ++l)
      if (w(l) > 0.0) sum += w(l) * std::exp(log_p(i, l) - mx);
    total += mx + std::log(sum);
  }
  return total / static_cast<double>(log_p.rows());
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index L = v.size();
  std::vector<double> u(v.data(), v.data() + L);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (Eigen::Index j = 0; j < L; ++j) {
    cum += u[static_cast<std::size_t>(j)];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  Eigen::VectorXd w = (v.array() - theta).max(0.0).matrix();
  return w / w.sum();
}

StackingWeights solve_weights(const LooDensityMatrix& loo, const SolveOptions& options) {
  const Eigen::MatrixXd& lp = loo.log_values;
  const Eigen::Index n = lp.rows();
  const Eigen::Index L = lp.cols();
  if (n == 0 || L == 0) throw InputError("empty density matrix");
  if (!lp.allFinite()) throw NumericalError("density matrix has non-finite log entries");

  // Row-shifted densities keep the largest entry of each row at 1.
  const Eigen::VectorXd shift = lp.rowwise().maxCoeff();
  const Eigen::MatrixXd P = (lp.colwise() - shift).array().exp().matrix();
  const double offset = shift.mean();
  const auto objective = [&](const Eigen::VectorXd& w) {
    return (P * w).array().log().mean() + offset;
  };

  StackingWeights out;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(L, 1.0 / static_cast<double>(L));
  double f = objective(w);
  if (!std::isfinite(f)) throw NumericalError("stacking objective is not finite");
  bool converged = L == 1;
  for (long it = 0; it < options.max_em_iterations && !converged; ++it) {
    const Eigen::VectorXd mix = P * w;
    const Eigen::VectorXd ratio = (P.transpose() * mix.cwiseInverse()) / static_cast<double>(n);
    Eigen::VectorXd next = w.cwiseProduct(ratio);
    next /= next.sum();
    const double fn = objective(next);
    if (!std::isfinite(fn)) throw NumericalError("stacking objective is not finite");
    if (fn < f - 1e-12 * std::max(1.0, std::abs(f)))
      throw NumericalError("EM objective decreased at iteration " + std::to_string(it));
    ++out.iterations;
    if (options.record_trace) out.trace.push_back(fn);
    converged = std::abs(fn - f) <= options.rel_tol * std::max(1.0, std::abs(f));
    w = std::move(next);
    f = std::max(f, fn);
  }

  // Best vertex, as a floor for the final answer.
  Eigen::Index best_l = 0;
  double best_vertex = -std::numeric_limits<double>::infinity();
  for (Eigen::Index l = 0; l < L; ++l) {
    const double v = lp.col(l).mean();
    if (v > best_vertex) {
      best_vertex = v;
      best_l = l;
    }
  }

  if (!converged || f < best_vertex) {
    out.used_fallback = true;
    if (f < best_vertex) {
      w = Eigen::VectorXd::Unit(L, best_l);
      f = best_vertex;
    }
    double step = 1.0;
    for (long it = 0; it < options.max_fallback_iterations; ++it) {
      const Eigen::VectorXd grad = (P.transpose() * (P * w).cwiseInverse()) / static_cast<double>(n);
      bool moved = false;
      while (step > 1e-16) {
        const Eigen::VectorXd cand = project_to_simplex(w + step * grad);
        const double fc = objective(cand);
        if (std::isfinite(fc) && fc > f) {
          const double gain = fc - f;
          w = cand;
          f = fc;
          moved = gain > options.rel_tol * std::max(1.0, std::abs(f));
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
  }

  w = w.cwiseMax(0.0);
  w /= w.sum();
  out.w = std::move(w);
  out.objective = stacking_objective(lp, out.w);
  if (!std::isfinite(out.objective)) throw NumericalError("stacking objective is not finite");
  return out;
}

std::vector<StackedIndex> stacked_sample(const Eigen::VectorXd& weights,
                                         const std::vector<std::size_t>& draws_per_model,
                                         std::size_t count, Rng& rng) {
  if (static_cast<std::size_t>(weights.size()) != draws_per_model.size())
    throw InputError("weight length does not match the model count");
  std::vector<double> cum(draws_per_model.size());
  double total = 0.0;
  for (std::size_t l = 0; l < cum.size(); ++l) {
    const double wl = weights(static_cast<Eigen::Index>(l));
    if (!(wl >= 0.0)) throw ParameterError("weights must be non-negative");
    if (wl > 0.0 && draws_per_model[l] == 0)
      throw InputError("model " + std::to_string(l) + " has positive weight but no stored draws");
    total += wl;
    cum[l] = total;
  }
  if (!(total > 0.0)) throw ParameterError("weights sum to zero");
  std::vector<StackedIndex> out;
  out.reserve(count);
  std::uniform_real_distribution<double> unif(0.0, total);
  for (std::size_t s = 0; s < count; ++s) {
    const double u = unif(rng);
    auto l = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (l >= cum.size()) l = cum.size() - 1;
    while (draws_per_model[l] == 0) --l;  // u landed on a zero-width edge
    std::uniform_int_distribution<std::size_t> pick(0, draws_per_model[l] - 1);
    out.push_back({l, pick(rng)});
  }
  return out;
}

std::vector<PosteriorDraw> stacked_sample(const Eigen::VectorXd& weights,
                                          const std::vector<std::vector<PosteriorDraw>>& draws,
                                          std::size_t count, Rng& rng) {
  std::vector<std::size_t> sizes;
  for (const auto& d : draws) sizes.push_back(d.size());
  std::vector<PosteriorDraw> out;
  out.reserve(count);
  for (const auto& idx : stacked_sample(weights, sizes, count, rng)) out.push_back(draws[idx.model][idx.draw]);
  return out;
}

double mlpd(const Eigen::MatrixXd& holdout_log_densities, const Eigen::VectorXd& weights) {
  return stacking_objective(holdout_log_densities, weights);
}

Eigen::VectorXd retained_weights(const Eigen::VectorXd& w,
                                 const std::vector<std::vector<PosteriorDraw>>& draws) {
  Eigen::VectorXd out = w;
  for (Eigen::Index l = 0; l < w.size(); ++l)
    if (draws[static_cast<std::size_t>(l)].empty()) out(l) = 0.0;
  const double total = out.sum();
  if (!(total > 0.0)) throw InputError("no model with positive weight has stored draws");
  return out / total;
}

StackingFit fit_stacking(const Dataset& data, const std::vector<CandidateModel>& models,
                         const Hyperparams& hyper, const StackingConfig& config) {
  if (config.N < 1) throw ConfigError("N must be >= 1");
  if (config.workers < 1) throw ConfigError("worker count must be >= 1");
  StackingFit out;
  out.models = models;
  out.folds = make_folds(data.n(), config.K, derive_seed(config.seed, {kFoldTag}));

  auto t0 = std::chrono::steady_clock::now();
  LooOptions lo;
  lo.S = config.S;
  lo.seed = config.seed;
  lo.workers = config.workers;
  out.loo = compute_loo_matrix(data, models, hyper, out.folds, lo);
  out.loo_seconds = seconds_since(t0);
  out.jitter_events = out.loo.jitter_events;

  t0 = std::chrono::steady_clock::now();
  out.weights = solve_weights(out.loo.loo);
  out.weights_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  out.retained.resize(models.size());
  out.draws.resize(models.size());
  for (std::size_t l = 0; l < models.size(); ++l)
    out.retained[l] = config.all_draws || out.weights.w(static_cast<Eigen::Index>(l)) > config.retain_threshold;
  for (const auto& group : group_by_kernel(models)) {
    if (std::none_of(group.begin(), group.end(), [&](std::size_t l) { return out.retained[l]; })) continue;
    const ModelFit fit = ModelFit::prepare(data, models[group.front()].kernel);
    if (fit.jittered) ++out.jitter_events;
    for (std::size_t l : group) {
      if (!out.retained[l]) continue;
      try {
        out.draws[l] = posterior_sample(fit, models[l], hyper, config.N,
                                        derive_seed(config.seed, {kFinalTag, l}), config.workers);
      } catch (...) {
        rethrow_with_context("model " + std::to_string(l) + ": final draws");
      }
    }
  }
  out.draws_seconds = seconds_since(t0);
  return out;
}

namespace {

Eigen::MatrixXd holdout_log_densities_ordered(const Dataset& train, const std::vector<CandidateModel>& models,
                                              const std::vector<std::vector<PosteriorDraw>>& draws,
                                              const Hyperparams& hyper, const Dataset& holdout,
                                              std::uint64_t seed, int workers) {
  if (draws.size() != models.size()) throw InputError("draw sets do not match the model count");
  if (holdout.p() != train.p() || holdout.varying_cols != train.varying_cols)
    throw InputError("holdout design does not match the training design");
  const Eigen::Index m = holdout.n();
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(m, static_cast<Eigen::Index>(models.size()),
                                                  std::numeric_limits<double>::quiet_NaN());
  if (m == 0) return out;
  const Eigen::MatrixXd held_xt = holdout.xtilde();

  for (const auto& group : group_by_kernel(models)) {
    if (std::all_of(group.begin(), group.end(), [&](std::size_t l) { return draws[l].empty(); })) continue;
    const KernelParams& kernel = models[group.front()].kernel;
    const Eigen::MatrixXd U = cholesky_with_jitter(corr_matrix(train.coords, kernel)).upper;
    const ConditionalTBasis basis =
        ConditionalTBasis::build(U, cross_corr_matrix(train.coords, holdout.coords, kernel),
                                 corr_matrix(holdout.coords, kernel), true);
    parallel_for(group.size(), workers, [&](std::size_t g) {
      const std::size_t l = group[g];
      if (draws[l].empty()) return;
      try {
        Rng rng = make_rng(seed, {l});
        std::vector<LogMeanExp> acc(static_cast<std::size_t>(m));
        for (const auto& d : draws[l]) {
          const Eigen::MatrixXd z_new = draw_z_new(basis, d, hyper, m, rng);
          const Eigen::VectorXd eta = eta_at(holdout.X, held_xt, d.beta, z_new);
          for (Eigen::Index i = 0; i < m; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            acc[iu].add(ef_log_density(holdout.y[iu], eta(i), holdout.family.trials[iu], holdout.family.kind));
          }
        }
        for (Eigen::Index i = 0; i < m; ++i)
          out(i, static_cast<Eigen::Index>(l)) = finish_density(acc[static_cast<std::size_t>(i)]).log_value;
      } catch (...) {
        rethrow_with_context("model " + std::to_string(l) + ": holdout densities");
      }
    });
  }
  return out;
}

// Rows sorted by their full contents, so the result does not depend on file order.
std::vector<Eigen::Index> canonical_order(const Dataset& d) {
  auto key = [&](Eigen::Index i) {
    const auto iu = static_cast<std::size_t>(i);
    std::vector<double> k{d.coords[iu].t, d.coords[iu].s[0], d.coords[iu].s[1],
                          static_cast<double>(d.y[iu]), static_cast<double>(d.family.trials[iu])};
    for (Eigen::Index c = 0; c < d.p(); ++c) k.push_back(d.X(i, c));
    return k;
  };
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d.n()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return key(a) < key(b); });
  return order;
}

}  // namespace

Eigen::MatrixXd holdout_log_densities(const Dataset& train, const std::vector<CandidateModel>& models,
                                      const std::vector<std::vector<PosteriorDraw>>& draws,
                                      const Hyperparams& hyper, const Dataset& holdout,
                                      std::uint64_t seed, int workers) {
  if (holdout.family.trials.size() != static_cast<std::size_t>(holdout.n()) ||
      holdout.y.size() != static_cast<std::size_t>(holdout.n()) ||
      holdout.coords.size() != static_cast<std::size_t>(holdout.n()))
    throw InputError("holdout arrays have inconsistent lengths");
  const std::vector<Eigen::Index> order = canonical_order(holdout);
  const Eigen::MatrixXd sorted =
      holdout_log_densities_ordered(train, models, draws, hyper, holdout.subset(order), seed, workers);
  Eigen::MatrixXd out(sorted.rows(), sorted.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(order[i]) = sorted.row(static_cast<Eigen::Index>(i));
  return out;
}

StackedPrediction stacked_predict(const Dataset& train, const std::vector<CandidateModel>& models,
                                  const std::vector<std::vector<PosteriorDraw>>& draws,
                                  const Eigen::VectorXd& weights, const Hyperparams& hyper,
                                  const Dataset& target, std::size_t count, std::uint64_t seed) {
  if (draws.size() != models.size()) throw InputError("draw sets do not match the model count");
  const Eigen::Index m = target.n();
  const auto cnt = static_cast<Eigen::Index>(count);
  StackedPrediction out;
  out.eta.resize(cnt, m);
  out.y.resize(cnt, m);
  out.z.assign(static_cast<std::size_t>(train.r()), Eigen::MatrixXd(cnt, m));
  Rng rng = make_rng(seed, {0});
  std::vector<std::size_t> sizes;
  for (const auto& d : draws) sizes.push_back(d.size());
  out.source = stacked_sample(weights, sizes, count, rng);
  if (m == 0 || count == 0) return out;

  const Eigen::MatrixXd xt = target.xtilde();
  std::vector<std::optional<ConditionalTBasis>> bases(models.size());
  for (std::size_t s = 0; s < count; ++s) {
    const auto [l, idx] = out.source[s];
    if (!bases[l]) {
      const KernelParams& kernel = models[l].kernel;
      for (std::size_t o = 0; o < models.size(); ++o)
        if (bases[o] && models[o].kernel == kernel) bases[l] = bases[o];
      if (!bases[l]) {
        const Eigen::MatrixXd U = cholesky_with_jitter(corr_matrix(train.coords, kernel)).upper;
        bases[l] = ConditionalTBasis::build(U, cross_corr_matrix(train.coords, target.coords, kernel),
                                            corr_matrix(target.coords, kernel), true);
      }
    }
    const PosteriorDraw& d = draws[l][idx];
    const Eigen::MatrixXd z_new = draw_z_new(*bases[l], d, hyper, m, rng);
    const Eigen::VectorXd eta = eta_at(target.X, xt, d.beta, z_new);
    const auto row = static_cast<Eigen::Index>(s);
    out.eta.row(row) = eta.transpose();
    for (Eigen::Index j = 0; j < z_new.cols(); ++j) out.z[static_cast<std::size_t>(j)].row(row) = z_new.col(j).transpose();
    for (Eigen::Index i = 0; i < m; ++i)
      out.y(row, i) = sample_response(eta(i), target.family.trials[static_cast<std::size_t>(i)],
                                      target.family.kind, rng);
  }
  return out;
}

}  // namespace stvc
