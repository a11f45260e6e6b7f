#include "optstop/config.hpp"
#include "optstop/error.hpp"
#include "optstop/experiments.hpp"
#include "optstop/objective.hpp"
#include "optstop/oracles.hpp"
#include "optstop/parallel.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace py::literals;

namespace {

optstop::Bs1dParams bs_params(double maturity, double spot, double vol, double rate, double carry, double strike) {
  return {maturity, spot, vol, rate, carry, strike};
}

py::dict price_config(const std::string& text, bool write_artifacts) {
  const optstop::ExperimentConfig cfg = optstop::parse_config(text);
  optstop::RunOptions options;
  options.write_artifacts = write_artifacts;
  optstop::RunReport report;
  {
    py::gil_scoped_release release;
    report = optstop::run_experiment(cfg, options);
  }
  py::list repeats;
  for (const auto& r : report.repeats) {
    repeats.append(py::dict("mean"_a = r.price.mean, "std"_a = r.price.sample_std, "stderr"_a = r.price.std_error,
                            "ci_low"_a = r.price.ci_low, "ci_high"_a = r.price.ci_high, "paths"_a = r.price.paths,
                            "seed"_a = r.seed, "runtime_seconds"_a = r.runtime_seconds));
  }
  return py::dict("mean"_a = report.mean, "std"_a = report.std_dev, "repeats"_a = repeats,
                  "runtime_seconds"_a = report.runtime_seconds);
}

}  // namespace

PYBIND11_MODULE(_optstop, m) {
  m.doc() = "Neural optimal stopping core";
  py::register_exception<optstop::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<optstop::InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def(
      "bs_euro_call",
      [](double maturity, double spot, double vol, double rate, double strike, double carry) {
        return optstop::bs_euro_call(bs_params(maturity, spot, vol, rate, carry, strike));
      },
      "maturity"_a, "spot"_a, "vol"_a, "rate"_a, "strike"_a, "carry"_a = 0.0);
  m.def(
      "binomial_american",
      [](double maturity, double spot, double vol, double rate, double strike, double carry, const std::string& kind,
         std::size_t steps, bool american) {
        if (kind != "put" && kind != "call") throw optstop::InvalidArgument("kind must be 'put' or 'call'");
        const auto ex = kind == "put" ? optstop::Exercise::kPut : optstop::Exercise::kCall;
        py::gil_scoped_release release;
        return optstop::binomial_american(bs_params(maturity, spot, vol, rate, carry, strike), ex, steps, american);
      },
      "maturity"_a, "spot"_a, "vol"_a, "rate"_a, "strike"_a, "carry"_a = 0.0, "kind"_a = "put", "steps"_a = 20000,
      "american"_a = true);
  m.def(
      "reduce_dimension",
      [](double eps, const std::vector<double>& alpha, const std::vector<double>& beta, const Eigen::MatrixXd& loadings,
         const std::vector<double>& initial) {
        const auto r = optstop::reduce_dimension(eps, alpha, beta, loadings, initial);
        return py::dict("initial"_a = r.initial, "drift"_a = r.drift, "vol"_a = r.vol);
      },
      "eps"_a, "alpha"_a, "beta"_a, "loadings"_a = Eigen::MatrixXd(), "initial"_a);
  m.def(
      "compose_soft_factors", [](const Eigen::MatrixXd& u) { return optstop::compose_soft_factors(u); }, "u"_a);
  m.def(
      "first_exercise_index", [](const Eigen::MatrixXd& u) { return optstop::first_exercise_index(u); }, "u"_a);
  m.def(
      "canonical_config", [](const std::string& text) { return optstop::emit_config(optstop::parse_config(text)); },
      "text"_a, "Parse, validate and re-emit a config with every field explicit.");
  m.def("price_config", &price_config, "text"_a, "write_artifacts"_a = false,
        "Train and price the experiment described by a config document.");
  m.def("benchmark_names", &optstop::benchmark_names);
  m.def("set_thread_count", &optstop::set_thread_count, "threads"_a);
}
