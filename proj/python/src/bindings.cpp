#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "stvc/chol.hpp"
#include "stvc/errors.hpp"
#include "stvc/expfam.hpp"
#include "stvc/kernel.hpp"
#include "stvc/model.hpp"
#include "stvc/predict.hpp"
#include "stvc/simulate.hpp"
#include "stvc/stack.hpp"

namespace py = pybind11;
using namespace stvc;

namespace {

// Rows of (s1, s2, t).
std::vector<SpaceTimeCoord> to_coords(const Eigen::MatrixXd& c) {
  if (c.cols() != 3) throw InputError("coordinates must have three columns (s1, s2, t)");
  std::vector<SpaceTimeCoord> out(static_cast<std::size_t>(c.rows()));
  for (Eigen::Index i = 0; i < c.rows(); ++i) out[static_cast<std::size_t>(i)] = {{c(i, 0), c(i, 1)}, c(i, 2)};
  return out;
}

Eigen::MatrixXd from_coords(const std::vector<SpaceTimeCoord>& c) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(c.size()), 3);
  for (std::size_t i = 0; i < c.size(); ++i) out.row(static_cast<Eigen::Index>(i)) << c[i].s[0], c[i].s[1], c[i].t;
  return out;
}

py::dict dataset_dict(const Dataset& d) {
  py::dict out;
  out["coords"] = from_coords(d.coords);
  out["y"] = d.y;
  out["trials"] = d.family.trials;
  out["X"] = d.X;
  out["varying"] = d.varying_cols;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stacked Bayesian spatial-temporal varying-coefficient models";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::enum_<Family>(m, "Family").value("poisson", Family::Poisson).value("binomial", Family::Binomial);
  py::enum_<DyKind>(m, "DyKind")
      .value("gaussian", DyKind::Gaussian)
      .value("log_gamma", DyKind::LogGamma)
      .value("logit_beta", DyKind::LogitBeta);

  py::class_<KernelParams>(m, "Kernel")
      .def_static("space_time", &KernelParams::space_time, py::arg("phi1"), py::arg("phi2"))
      .def_static("matern", &KernelParams::matern, py::arg("phi"), py::arg("nu"))
      .def_readonly("a", &KernelParams::a)
      .def_readonly("b", &KernelParams::b);

  m.def("ef_log_density", &ef_log_density, py::arg("y"), py::arg("eta"), py::arg("trials"), py::arg("family"));

  m.def(
      "dy_sample",
      [](double alpha, double kappa, DyKind kind, int count, std::uint64_t seed) {
        Rng rng(seed);
        const DyParams p{alpha, kappa, kind};
        Eigen::VectorXd out(count);
        for (auto& v : out) v = dy_sample(p, rng);
        return out;
      },
      py::arg("alpha"), py::arg("kappa"), py::arg("kind"), py::arg("count"), py::arg("seed") = 0);

  m.def(
      "corr_matrix", [](const Eigen::MatrixXd& c, const KernelParams& k) { return corr_matrix(to_coords(c), k); },
      py::arg("coords"), py::arg("kernel"));

  m.def("cholesky", &cholesky, "Upper factor U with R = U^T U", py::arg("R"));
  m.def(
      "chol_delete_block",
      [](const Eigen::MatrixXd& R, int K, int k) {
        const BlockedFactor f{cholesky(R), Partition::contiguous(R.rows(), K)};
        return chol_delete_block(R, f, k);
      },
      py::arg("R"), py::arg("K"), py::arg("k"));

  m.def(
      "project",
      [](const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xt, const Eigen::VectorXd& v_eta,
         const Eigen::VectorXd& v_xi, const Eigen::VectorXd& v_beta, const Eigen::MatrixXd& v_z) {
        const Gamma g = project(X, Xt, v_eta, v_xi, v_beta, v_z);
        return py::make_tuple(g.xi, g.beta, g.z);
      },
      py::arg("X"), py::arg("Xtilde"), py::arg("v_eta"), py::arg("v_xi"), py::arg("v_beta"), py::arg("v_z"));

  m.def(
      "cond_t_params",
      [](const Eigen::VectorXd& z, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C, const Eigen::MatrixXd& Rt,
         double nu) {
        const ConditionalT t = cond_t_params(z, U, C, Rt, nu);
        return py::make_tuple(t.df, t.location, Eigen::MatrixXd(t.scale_upper.transpose() * t.scale_upper));
      },
      "Returns (df, location, scale matrix)", py::arg("z"), py::arg("corr_upper"), py::arg("C"), py::arg("R_tilde"),
      py::arg("nu"));

  m.def(
      "solve_weights",
      [](const Eigen::MatrixXd& log_p) {
        const StackingWeights w = solve_weights({log_p});
        return py::make_tuple(w.w, w.objective);
      },
      "Stacking weights from an n x L matrix of log densities; returns (w, objective)", py::arg("log_p"));

  m.def(
      "simulate",
      [](const std::string& preset, int n, int holdout, std::uint64_t seed) {
        SimConfig c;
        if (preset == "poisson_study")
          c = SimConfig::poisson_study(n, holdout, seed);
        else if (preset == "binomial_study")
          c = SimConfig::binomial_study(n, holdout, seed);
        else if (preset == "matern_study")
          c = SimConfig::matern_study(n, holdout, seed);
        else
          throw ConfigError("unknown simulation preset '" + preset + "'");
        const SimResult r = simulate_dataset(c);
        py::dict out;
        out["train"] = dataset_dict(r.train);
        out["holdout"] = dataset_dict(r.holdout);
        out["beta"] = r.truth.beta;
        return out;
      },
      py::arg("preset"), py::arg("n") = 200, py::arg("holdout") = 100, py::arg("seed") = 0);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "stvc");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      "Runs the command-line tool in-process and returns its exit code", py::arg("args"));
}
