#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stvc/expfam.hpp"
#include "stvc/io.hpp"
#include "stvc/simulate.hpp"
#include "stvc/stack.hpp"

namespace stvc::cli {

namespace fs = std::filesystem;

struct RunConfig {
  Family family = Family::Poisson;
  std::vector<std::string> predictors;  // empty: every x_ column
  std::vector<std::string> varying;     // empty: every predictor
  std::vector<double> alpha_eps{0.5, 0.75};
  std::vector<double> sigma_xi{0.5, 1.0};
  std::vector<double> phi1{0.3, 0.7, 1.2};
  std::vector<double> phi2{1.5, 3.0, 4.5};
  int K = 10;
  int S = 500;
  int N = 1000;
  double nu = 3.0;
  std::uint64_t seed = 0;
  int workers = 1;
  bool all_draws = false;
  int predict_draws = 1000;
  std::optional<SimConfig> simulate;

  static RunConfig from_json(const nlohmann::json& j);  // throws ConfigError
  static RunConfig load(const fs::path& path);
  nlohmann::json to_json() const;
  void validate() const;
  StackingConfig stacking() const;
  CsvReadOptions csv_options(bool require_response = true) const;
};

SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json sim_config_to_json(const SimConfig& c);

// Command-line overrides; unset fields keep the config values.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

// Writes train.csv, holdout.csv (when holdout > 0) and truth.json.
void cmd_simulate(const fs::path& config, const fs::path& out, const Overrides& ov = {});

// Writes weights.json, loo.csv, samples/, run_meta.json, plus copies of the
// data (train.csv) and the effective configuration (config.json).
void cmd_fit(const fs::path& data, const fs::path& config, const fs::path& out, const Overrides& ov = {});

// Stacked predictive draws and summary quantiles at new coordinates.
void cmd_predict(const fs::path& fit_dir, const fs::path& coords, const fs::path& out,
                 const Overrides& ov = {});

// Per-model holdout densities and the stacked MLPD; writes mlpd.json and
// returns the stacked MLPD.
double cmd_evaluate(const fs::path& fit_dir, const fs::path& holdout, const fs::path& out,
                    const Overrides& ov = {});

// Artifacts of a fit directory, loaded back.
struct FitArtifacts {
  RunConfig config;
  Dataset train;
  std::vector<CandidateModel> models;
  Eigen::VectorXd weights;
  std::vector<std::vector<PosteriorDraw>> draws;  // empty for models without samples
};

FitArtifacts load_fit(const fs::path& fit_dir);

// Type-7 sample quantile of v (copied and sorted).
double quantile(std::vector<double> v, double q);

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

// Prints the error and returns its exit code; unknown exceptions propagate.
int report_error(std::exception_ptr err);

// Runs `argv` and maps errors to exit codes.
int run(int argc, char** argv);

}  // namespace stvc::cli
