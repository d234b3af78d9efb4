#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "stvc/errors.hpp"
#include "stvc/io.hpp"

namespace stvc::cli {

using nlohmann::json;

namespace {

constexpr std::uint64_t kPredictTag = 0x9E0;
constexpr std::uint64_t kHoldoutTag = 0x401D;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void maybe(const json& j, const std::string& key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

KernelParams kernel_from_json(const json& j) {
  check_keys(j, {"type", "phi1", "phi2", "phi", "nu"}, "kernel");
  const auto type = get<std::string>(j, "type", "kernel");
  try {
    if (type == "space_time") return KernelParams::space_time(get<double>(j, "phi1", "kernel"), get<double>(j, "phi2", "kernel"));
    if (type == "matern") return KernelParams::matern(get<double>(j, "phi", "kernel"), get<double>(j, "nu", "kernel"));
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("kernel: ") + e.what());
  }
  throw ConfigError("kernel type must be space_time or matern, got '" + type + "'");
}

json kernel_to_json(const KernelParams& k) {
  if (k.kind == KernelKind::Matern) return {{"type", "matern"}, {"phi", k.a}, {"nu", k.b}};
  return {{"type", "space_time"}, {"phi1", k.a}, {"phi2", k.b}};
}

Family family_from(const std::string& name) {
  try {
    return parse_family(name);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

json model_json(std::size_t l, const CandidateModel& m) {
  return {{"index", l},
          {"alpha_eps", m.alpha_eps},
          {"kappa_eps", m.kappa_eps},
          {"sigma_xi", m.sigma_xi},
          {"phi1", m.kernel.phi_temporal()},
          {"phi2", m.kernel.phi_spatial()}};
}

json matrix_rows(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json load_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> varying_names(const Dataset& d) {
  std::vector<std::string> out;
  for (int c : d.varying_cols) out.push_back(d.names[static_cast<std::size_t>(c)]);
  return out;
}

RunConfig effective(const fs::path& config, const Overrides& ov) {
  RunConfig cfg = RunConfig::load(config);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.workers) cfg.workers = *ov.workers;
  cfg.validate();
  return cfg;
}

}  // namespace

SimConfig sim_config_from_json(const json& j) {
  const std::string w = "simulate";
  check_keys(j, {"preset", "n", "holdout", "family", "beta", "sigma2_z", "kernels", "varying_cols",
                 "trials_mean", "spatial_only", "seed"},
             w);
  SimConfig c = SimConfig::poisson_study();
  if (j.contains("preset")) {
    const auto p = get<std::string>(j, "preset", w);
    if (p == "poisson_study")
      c = SimConfig::poisson_study();
    else if (p == "binomial_study")
      c = SimConfig::binomial_study();
    else if (p == "matern_study")
      c = SimConfig::matern_study();
    else
      throw ConfigError("unknown simulation preset '" + p + "'");
  }
  maybe(j, "n", c.n, w);
  maybe(j, "holdout", c.holdout, w);
  if (j.contains("family")) c.family = family_from(get<std::string>(j, "family", w));
  if (j.contains("beta")) {
    const auto b = get<std::vector<double>>(j, "beta", w);
    c.beta_true = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  }
  maybe(j, "sigma2_z", c.sigma2_z_true, w);
  if (j.contains("kernels")) {
    c.kernels_true.clear();
    for (const auto& k : j.at("kernels")) c.kernels_true.push_back(kernel_from_json(k));
  }
  maybe(j, "varying_cols", c.varying_cols, w);
  maybe(j, "trials_mean", c.trials_mean, w);
  maybe(j, "spatial_only", c.spatial_only, w);
  maybe(j, "seed", c.seed, w);
  c.validate();
  return c;
}

json sim_config_to_json(const SimConfig& c) {
  json kernels = json::array();
  for (const auto& k : c.kernels_true) kernels.push_back(kernel_to_json(k));
  return {{"n", c.n},
          {"holdout", c.holdout},
          {"family", family_name(c.family)},
          {"beta", vector_json(c.beta_true)},
          {"sigma2_z", c.sigma2_z_true},
          {"kernels", kernels},
          {"varying_cols", c.varying()},
          {"trials_mean", c.trials_mean},
          {"spatial_only", c.spatial_only},
          {"seed", c.seed}};
}

RunConfig RunConfig::from_json(const json& j) {
  const std::string w = "config";
  check_keys(j, {"family", "predictors", "varying", "grid", "K", "S", "N", "nu", "seed", "workers",
                 "all_draws", "predict_draws", "simulate"},
             w);
  RunConfig c;
  if (j.contains("family")) c.family = family_from(get<std::string>(j, "family", w));
  maybe(j, "predictors", c.predictors, w);
  maybe(j, "varying", c.varying, w);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, {"alpha_eps", "sigma_xi", "phi1", "phi2"}, "grid");
    maybe(g, "alpha_eps", c.alpha_eps, "grid");
    maybe(g, "sigma_xi", c.sigma_xi, "grid");
    maybe(g, "phi1", c.phi1, "grid");
    maybe(g, "phi2", c.phi2, "grid");
  }
  maybe(j, "K", c.K, w);
  maybe(j, "S", c.S, w);
  maybe(j, "N", c.N, w);
  maybe(j, "nu", c.nu, w);
  maybe(j, "seed", c.seed, w);
  maybe(j, "workers", c.workers, w);
  maybe(j, "all_draws", c.all_draws, w);
  maybe(j, "predict_draws", c.predict_draws, w);
  if (j.contains("simulate")) c.simulate = sim_config_from_json(j.at("simulate"));
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) { return from_json(load_json(path)); }

json RunConfig::to_json() const {
  json j = {{"family", family_name(family)},
            {"predictors", predictors},
            {"varying", varying},
            {"grid", {{"alpha_eps", alpha_eps}, {"sigma_xi", sigma_xi}, {"phi1", phi1}, {"phi2", phi2}}},
            {"K", K},
            {"S", S},
            {"N", N},
            {"nu", nu},
            {"seed", seed},
            {"workers", workers},
            {"all_draws", all_draws},
            {"predict_draws", predict_draws}};
  if (simulate) j["simulate"] = sim_config_to_json(*simulate);
  return j;
}

void RunConfig::validate() const {
  for (const auto* g : {&alpha_eps, &sigma_xi, &phi1, &phi2})
    if (g->empty()) throw ConfigError("grids must be nonempty");
  if (K < 2) throw ConfigError("K must be at least 2");
  if (S < 1 || N < 1) throw ConfigError("S and N must be positive");
  if (!(nu > 0.0)) throw ConfigError("nu must be positive");
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  if (predict_draws < 0) throw ConfigError("predict_draws must be non-negative");
}

StackingConfig RunConfig::stacking() const {
  StackingConfig s;
  s.K = K;
  s.S = S;
  s.N = N;
  s.seed = seed;
  s.workers = workers;
  s.all_draws = all_draws;
  return s;
}

CsvReadOptions RunConfig::csv_options(bool require_response) const {
  CsvReadOptions o;
  o.family = family;
  o.predictors = predictors;
  o.varying = varying;
  o.require_response = require_response;
  return o;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void cmd_simulate(const fs::path& config, const fs::path& out, const Overrides& ov) {
  RunConfig cfg = effective(config, ov);
  if (!cfg.simulate) throw ConfigError("config has no simulate section");
  SimConfig sc = *cfg.simulate;
  if (ov.seed) sc.seed = *ov.seed;
  const SimResult r = simulate_dataset(sc);
  fs::create_directories(out);
  write_dataset_csv(out / "train.csv", r.train);
  if (sc.holdout > 0) write_dataset_csv(out / "holdout.csv", r.holdout);
  const json truth = {{"config", sim_config_to_json(sc)},
                      {"beta", vector_json(r.truth.beta)},
                      {"z_train", matrix_rows(r.truth.z_train)},
                      {"eta_train", vector_json(r.truth.eta_train)},
                      {"z_holdout", matrix_rows(r.truth.z_holdout)},
                      {"eta_holdout", vector_json(r.truth.eta_holdout)}};
  write_text(out / "truth.json", dump(truth));
}

void cmd_fit(const fs::path& data_path, const fs::path& config, const fs::path& out, const Overrides& ov) {
  const RunConfig cfg = effective(config, ov);
  const Dataset data = read_dataset_csv(data_path, cfg.csv_options());
  data.validate();
  const auto models = build_grid(cfg.alpha_eps, cfg.sigma_xi, cfg.phi1, cfg.phi2, cfg.family);
  const Hyperparams hyper{cfg.nu, std::vector<double>(static_cast<std::size_t>(data.r()), cfg.nu)};
  const StackingFit fit = fit_stacking(data, models, hyper, cfg.stacking());

  fs::create_directories(out);
  write_dataset_csv(out / "train.csv", data);
  RunConfig saved = cfg;
  saved.predictors = data.names;
  saved.varying = varying_names(data);
  write_text(out / "config.json", dump(saved.to_json()));

  json wj = json::array();
  for (std::size_t l = 0; l < models.size(); ++l) {
    json m = model_json(l, models[l]);
    m["weight"] = fit.weights.w(static_cast<Eigen::Index>(l));
    m["retained"] = static_cast<bool>(fit.retained[l]);
    wj.push_back(m);
  }
  write_text(out / "weights.json", dump({{"family", family_name(cfg.family)},
                                         {"objective", fit.weights.objective},
                                         {"models", wj}}));

  std::vector<std::string> loo_header;
  for (std::size_t l = 0; l < models.size(); ++l) loo_header.push_back("model_" + std::to_string(l));
  write_matrix_csv(out / "loo.csv", fit.loo.loo.log_values, loo_header);

  std::vector<std::string> beta_header = data.names;
  std::vector<std::string> sigma_header{"sigma2_beta"};
  for (const auto& v : varying_names(data)) sigma_header.push_back("sigma2_z_" + v);
  std::vector<std::string> z_header;
  for (Eigen::Index j = 0; j < data.r(); ++j)
    for (Eigen::Index i = 0; i < data.n(); ++i)
      z_header.push_back("z" + std::to_string(j) + "_" + std::to_string(i));
  for (std::size_t l = 0; l < models.size(); ++l) {
    const auto& draws = fit.draws[l];
    if (draws.empty()) continue;
    const fs::path dir = out / "samples" / ("model_" + std::to_string(l));
    const auto N = static_cast<Eigen::Index>(draws.size());
    Eigen::MatrixXd B(N, data.p()), Z(N, data.n() * data.r()), Sg(N, data.r() + 1);
    for (Eigen::Index s = 0; s < N; ++s) {
      const auto& d = draws[static_cast<std::size_t>(s)];
      B.row(s) = d.beta.transpose();
      Z.row(s) = Eigen::Map<const Eigen::VectorXd>(d.z.data(), d.z.size()).transpose();
      Sg(s, 0) = d.sigma2_beta;
      Sg.row(s).tail(data.r()) = d.sigma2_z.transpose();
    }
    write_matrix_csv(dir / "beta.csv", B, beta_header);
    write_matrix_csv(dir / "z.csv", Z, z_header);
    write_matrix_csv(dir / "sigma.csv", Sg, sigma_header);
  }

  json cells = json::array();
  for (const auto& c : fit.loo.cells) cells.push_back({{"model", c.model}, {"fold", c.fold}, {"seed", c.seed}});
  json retained = json::array();
  for (std::size_t l = 0; l < models.size(); ++l)
    if (fit.retained[l])
      retained.push_back({{"model", l}, {"draws", fit.draws[l].size()}, {"seed", derive_seed(cfg.seed, {0xF17A1, l})}});
  const json meta = {
      {"seed", cfg.seed},
      {"workers", cfg.workers},
      {"K", cfg.K},
      {"S", cfg.S},
      {"N", cfg.N},
      {"nu", cfg.nu},
      {"n", data.n()},
      {"models", models.size()},
      {"fold_permutation", fit.folds.permutation},
      {"fold_boundaries", fit.folds.blocks.boundaries()},
      {"cells", cells},
      {"retained", retained},
      {"retained_only", !cfg.all_draws},
      {"floored_densities", fit.loo.floored},
      {"jitter_events", fit.jitter_events},
      {"em_iterations", fit.weights.iterations},
      {"solver_fallback", fit.weights.used_fallback},
      {"timings", {{"loo_seconds", fit.loo_seconds}, {"weights_seconds", fit.weights_seconds}, {"draws_seconds", fit.draws_seconds}}}};
  write_text(out / "run_meta.json", dump(meta));
}

FitArtifacts load_fit(const fs::path& fit_dir) {
  for (const char* f : {"config.json", "train.csv", "weights.json"})
    if (!fs::exists(fit_dir / f)) throw IoError("fit artifact missing: " + (fit_dir / f).string());
  FitArtifacts a;
  a.config = RunConfig::load(fit_dir / "config.json");
  a.train = read_dataset_csv(fit_dir / "train.csv", a.config.csv_options());
  const json wj = load_json(fit_dir / "weights.json");
  const auto& models = wj.at("models");
  a.weights.resize(static_cast<Eigen::Index>(models.size()));
  for (std::size_t l = 0; l < models.size(); ++l) {
    const auto& m = models[l];
    a.models.push_back(CandidateModel::make(a.config.family, m.at("alpha_eps").get<double>(),
                                            m.at("sigma_xi").get<double>(),
                                            KernelParams::space_time(m.at("phi1").get<double>(), m.at("phi2").get<double>())));
    a.weights(static_cast<Eigen::Index>(l)) = m.at("weight").get<double>();
  }
  const Eigen::Index n = a.train.n(), p = a.train.p(), r = a.train.r();
  a.draws.resize(models.size());
  for (std::size_t l = 0; l < models.size(); ++l) {
    const fs::path dir = fit_dir / "samples" / ("model_" + std::to_string(l));
    if (!models[l].at("retained").get<bool>()) continue;
    if (!fs::exists(dir)) throw IoError("samples missing for retained model " + std::to_string(l));
    const Eigen::MatrixXd B = read_matrix_csv(dir / "beta.csv");
    const Eigen::MatrixXd Z = read_matrix_csv(dir / "z.csv");
    const Eigen::MatrixXd Sg = read_matrix_csv(dir / "sigma.csv");
    if (B.cols() != p || Z.cols() != n * r || Sg.cols() != r + 1 || Z.rows() != B.rows() || Sg.rows() != B.rows())
      throw InputError("samples for model " + std::to_string(l) + " do not match the training data");
    for (Eigen::Index s = 0; s < B.rows(); ++s) {
      PosteriorDraw d;
      d.beta = B.row(s).transpose();
      d.z = Eigen::Map<const Eigen::MatrixXd>(Eigen::VectorXd(Z.row(s).transpose()).data(), n, r);
      d.sigma2_beta = Sg(s, 0);
      d.sigma2_z = Sg.row(s).tail(r).transpose();
      a.draws[l].push_back(std::move(d));
    }
  }
  return a;
}

void cmd_predict(const fs::path& fit_dir, const fs::path& coords, const fs::path& out, const Overrides& ov) {
  FitArtifacts a = load_fit(fit_dir);
  if (ov.seed) a.config.seed = *ov.seed;
  Dataset target = read_dataset_csv(coords, a.config.csv_options(false));
  if (target.names != a.train.names) throw InputError("new coordinates must carry the training predictors");
  const Hyperparams hyper{a.config.nu, std::vector<double>(static_cast<std::size_t>(a.train.r()), a.config.nu)};
  const Eigen::VectorXd w = retained_weights(a.weights, a.draws);
  const auto count = static_cast<std::size_t>(a.config.predict_draws);
  const StackedPrediction pred = stacked_predict(a.train, a.models, a.draws, w, hyper, target, count,
                                                 derive_seed(a.config.seed, {kPredictTag}));

  const Eigen::Index m = target.n();
  std::vector<std::string> cols;
  for (Eigen::Index i = 0; i < m; ++i) cols.push_back("loc_" + std::to_string(i));
  fs::create_directories(out);
  write_matrix_csv(out / "predictive_eta.csv", pred.eta, cols);
  write_matrix_csv(out / "predictive_y.csv", pred.y, cols);
  const auto vnames = varying_names(a.train);
  for (std::size_t j = 0; j < pred.z.size(); ++j)
    write_matrix_csv(out / ("predictive_z_" + vnames[j] + ".csv"), pred.z[j], cols);

  std::ostringstream s;
  s << "index,s1,s2,t";
  std::vector<std::string> series{"eta", "y"};
  for (const auto& v : vnames) series.push_back("z_" + v);
  for (const auto& name : series) s << ',' << name << "_q025," << name << "_median," << name << "_q975";
  s << '\n';
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& c = target.coords[static_cast<std::size_t>(i)];
    s << i << ',' << format_double(c.s[0]) << ',' << format_double(c.s[1]) << ',' << format_double(c.t);
    auto emit = [&](const Eigen::VectorXd& col) {
      std::vector<double> v(col.data(), col.data() + col.size());
      s << ',' << format_double(quantile(v, 0.025)) << ',' << format_double(quantile(v, 0.5)) << ','
        << format_double(quantile(v, 0.975));
    };
    emit(pred.eta.col(i));
    emit(pred.y.col(i));
    for (const auto& z : pred.z) emit(z.col(i));
    s << '\n';
  }
  write_text(out / "summary.csv", s.str());
}

double cmd_evaluate(const fs::path& fit_dir, const fs::path& holdout_path, const fs::path& out,
                    const Overrides& ov) {
  FitArtifacts a = load_fit(fit_dir);
  if (ov.seed) a.config.seed = *ov.seed;
  if (ov.workers) a.config.workers = *ov.workers;
  const Dataset holdout = read_dataset_csv(holdout_path, a.config.csv_options());
  if (holdout.names != a.train.names) throw InputError("holdout data must carry the training predictors");
  if (holdout.n() == 0) throw InputError("holdout data are empty");
  const Hyperparams hyper{a.config.nu, std::vector<double>(static_cast<std::size_t>(a.train.r()), a.config.nu)};
  const Eigen::MatrixXd lp = holdout_log_densities(a.train, a.models, a.draws, hyper, holdout,
                                                   derive_seed(a.config.seed, {kHoldoutTag}), a.config.workers);
  const Eigen::VectorXd w = retained_weights(a.weights, a.draws);
  const double value = mlpd(lp, w);

  json per = json::array();
  for (std::size_t l = 0; l < a.models.size(); ++l) {
    json m = model_json(l, a.models[l]);
    m["weight"] = w(static_cast<Eigen::Index>(l));
    if (!a.draws[l].empty())
      m["mean_log_density"] = lp.col(static_cast<Eigen::Index>(l)).mean();
    else
      m["mean_log_density"] = nullptr;
    per.push_back(m);
  }
  fs::create_directories(out);
  write_text(out / "mlpd.json", dump({{"mlpd", value}, {"n_holdout", holdout.n()}, {"models", per}}));
  return value;
}

int report_error(std::exception_ptr err) {
  try {
    std::rethrow_exception(err);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Stacked Bayesian spatial-temporal varying-coefficient models"};
  app.require_subcommand(1);
  std::string config, data, out, fit;
  std::uint64_t seed = 0;
  int workers = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--workers", workers, "Worker threads (overrides the config)");
  };
  auto* sim = app.add_subcommand("simulate", "Simulate a dataset");
  sim->add_option("--config", config, "JSON config with a simulate section")->required();
  sim->add_option("--out", out, "Output directory")->required();
  add_common(sim);
  auto* fitc = app.add_subcommand("fit", "Fit the stacked model");
  fitc->add_option("--config", config, "JSON run config")->required();
  fitc->add_option("--data", data, "Training CSV")->required();
  fitc->add_option("--out", out, "Output directory")->required();
  add_common(fitc);
  auto* pred = app.add_subcommand("predict", "Predict at new coordinates");
  pred->add_option("--fit", fit, "Fit directory")->required();
  pred->add_option("--data", data, "CSV of new coordinates and predictors")->required();
  pred->add_option("--out", out, "Output directory (default: the fit directory)");
  pred->add_option("--config", config, "Unused; the fit directory's config is authoritative");
  add_common(pred);
  auto* eval = app.add_subcommand("evaluate", "Stacked MLPD on held-out data");
  eval->add_option("--fit", fit, "Fit directory")->required();
  eval->add_option("--data", data, "Holdout CSV")->required();
  eval->add_option("--out", out, "Output directory (default: the fit directory)");
  eval->add_option("--config", config, "Unused; the fit directory's config is authoritative");
  add_common(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  auto overrides = [&](CLI::App* sub) {
    Overrides ov;
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->count("--workers")) {
      if (workers < 1) throw ConfigError("--workers must be at least 1");
      ov.workers = workers;
    }
    return ov;
  };
  try {
    if (*sim) {
      cmd_simulate(config, out, overrides(sim));
    } else if (*fitc) {
      cmd_fit(data, config, out, overrides(fitc));
    } else if (*pred) {
      cmd_predict(fit, data, out.empty() ? fs::path(fit) : fs::path(out), overrides(pred));
    } else if (*eval) {
      const double v = cmd_evaluate(fit, data, out.empty() ? fs::path(fit) : fs::path(out), overrides(eval));
      std::cout << "mlpd " << format_double(v) << "\n";
    }
  } catch (...) {
    return report_error(std::current_exception());
  }
  return kExitOk;
}

}  // namespace stvc::cli
