// Command-line front end: price, oracle, bench, selftest.

#include "optstop/config.hpp"
#include "optstop/error.hpp"
#include "optstop/experiments.hpp"
#include "optstop/oracles.hpp"
#include "optstop/parallel.hpp"
#include "optstop/selftest.hpp"
#include "optstop/stopnet.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int kConfigExit = 2;
constexpr int kDivergenceExit = 3;
constexpr int kToleranceExit = 4;

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string precision = "double";
  std::optional<std::string> out;
};

void apply(const Globals& g, optstop::ExperimentConfig& cfg, const std::string& subdir = "") {
  if (g.seed) cfg.seed = *g.seed;
  if (g.out) cfg.output = (std::filesystem::path(*g.out) / subdir).string();
}

int run_price(const Globals& g, const std::string& path) {
  optstop::ExperimentConfig cfg = optstop::load_config(path);
  apply(g, cfg);
  optstop::RunOptions options;
  options.console = &std::cerr;
  const auto report = optstop::run_experiment(cfg, options);
  std::cout << optstop::price_line(cfg, report) << std::endl;
  return 0;
}

int run_bench(const Globals& g, const std::string& name, const std::string& scale_text) {
  const auto scale = scale_text == "full" ? optstop::Scale::kFull : optstop::Scale::kDesk;
  optstop::Benchmark bench = optstop::make_benchmark(name, scale);
  for (auto& row : bench.rows) {
    const std::string leaf = std::filesystem::path(row.config.output).filename().string();
    if (g.seed) row.config.seed = *g.seed;
    row.config.output = (std::filesystem::path(g.out.value_or("out")) / name / leaf).string();
  }
  optstop::RunOptions options;
  options.console = &std::cerr;
  const auto results = optstop::run_benchmark(bench, options);
  optstop::print_bench_table(std::cout, bench, results);

  const auto dir = std::filesystem::path(g.out.value_or("out")) / name;
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "bench.csv");
  csv << "row,mean,std,reference,relative_error,runtime_seconds,passed,provenance\n";
  bool all = true;
  for (const auto& r : results) {
    csv << '"' << r.row->label << "\"," << r.report.mean << ',' << r.report.std_dev << ',' << r.row->reference << ','
        << r.relative_error << ',' << r.report.runtime_seconds << ',' << (r.passed ? 1 : 0) << ",\""
        << r.row->provenance << "\"\n";
    all = all && r.passed;
  }
  return all ? 0 : kToleranceExit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural optimal stopping: training, pricing, reference oracles"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Override the experiment seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--precision", g.precision, "Matrix product precision")
      ->check(CLI::IsMember({"double", "single"}));
  app.add_option("--out", g.out, "Output directory");

  std::string config_path;
  auto* price = app.add_subcommand("price", "Train and price from a config file");
  price->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  auto* oracle = app.add_subcommand("oracle", "Reference values");
  oracle->require_subcommand(1);
  optstop::Bs1dParams bs;
  auto add_bs = [&bs](CLI::App* sub) {
    sub->add_option("--maturity", bs.maturity, "T")->capture_default_str();
    sub->add_option("--spot", bs.spot, "Initial price")->capture_default_str();
    sub->add_option("--vol", bs.vol, "Volatility")->capture_default_str();
    sub->add_option("--rate", bs.rate, "Interest rate")->capture_default_str();
    sub->add_option("--carry", bs.carry, "Dividend yield")->capture_default_str();
    sub->add_option("--strike", bs.strike, "Strike")->capture_default_str();
  };
  auto* oracle_bs = oracle->add_subcommand("bs", "European call, closed form");
  add_bs(oracle_bs);
  auto* oracle_bin = oracle->add_subcommand("binomial", "CRR tree with early exercise");
  add_bs(oracle_bin);
  std::size_t tree_steps = 20000;
  std::string kind = "put";
  bool european = false;
  oracle_bin->add_option("--steps", tree_steps, "Tree steps")->capture_default_str();
  oracle_bin->add_option("--kind", kind, "put or call")->check(CLI::IsMember({"put", "call"}));
  oracle_bin->add_flag("--european", european, "No early exercise");

  auto* oracle_reduce = oracle->add_subcommand("reduce", "Product of GBMs as a single GBM");
  double eps = 1.0;
  std::vector<double> alpha, beta, initial;
  double correlation = 0.0;
  double rate = 0.0;
  std::string orientation = "factor_adjoint";
  oracle_reduce->add_option("--eps", eps, "Exponent of each factor")->required();
  oracle_reduce->add_option("--alpha", alpha, "Drifts (comma separated)")->required()->delimiter(',');
  oracle_reduce->add_option("--beta", beta, "Volatilities (comma separated)")->required()->delimiter(',');
  oracle_reduce->add_option("--initial", initial, "Initial prices (comma separated)")->required()->delimiter(',');
  oracle_reduce->add_option("--correlation", correlation, "Equicorrelation of the noise");
  oracle_reduce->add_option("--orientation", orientation, "factor_adjoint or adjoint_factor")
      ->check(CLI::IsMember({"factor_adjoint", "adjoint_factor"}));
  oracle_reduce->add_option("--rate", rate, "Interest rate, to report the implied dividend yield");

  std::string bench_name;
  std::string scale = "desk";
  bool list = false;
  auto* bench = app.add_subcommand("bench", "Run a registered benchmark table");
  bench->add_option("name", bench_name, "Benchmark id");
  bench->add_option("--scale", scale, "desk or full")->check(CLI::IsMember({"desk", "full"}))->capture_default_str();
  bench->add_flag("--list", list, "List registered ids");

  auto* selftest = app.add_subcommand("selftest", "Run the property suites");

  CLI11_PARSE(app, argc, argv);

  optstop::set_thread_count(g.threads);
  optstop::set_precision(g.precision == "single" ? optstop::Precision::kSingle : optstop::Precision::kDouble);

  try {
    if (*price) return run_price(g, config_path);
    if (*oracle_bs) {
      std::printf("%.10f\n", optstop::bs_euro_call(bs));
      return 0;
    }
    if (*oracle_bin) {
      const auto ex = kind == "put" ? optstop::Exercise::kPut : optstop::Exercise::kCall;
      std::printf("%.10f\n", optstop::binomial_american(bs, ex, tree_steps, !european));
      return 0;
    }
    if (*oracle_reduce) {
      Eigen::MatrixXd loadings;
      if (correlation != 0.0) {
        const auto o = orientation == "adjoint_factor" ? optstop::FactorOrientation::kAdjointTimesFactor
                                                       : optstop::FactorOrientation::kFactorTimesAdjoint;
        loadings = optstop::CorrelationSpec::equicorrelated(alpha.size(), correlation, o).loadings;
      }
      const auto reduced = optstop::reduce_dimension(eps, alpha, beta, loadings, initial);
      std::printf("initial %.12g\ndrift %.12g\nvol %.12g\nvol^2 %.12g\ndividend %.12g\n", reduced.initial,
                  reduced.drift, reduced.vol, reduced.vol * reduced.vol, rate - reduced.drift);
      return 0;
    }
    if (*bench) {
      if (list || bench_name.empty()) {
        for (const auto& n : optstop::benchmark_names()) std::cout << n << "\n";
        return list ? 0 : kConfigExit;
      }
      return run_bench(g, bench_name, scale);
    }
    if (*selftest) {
      const auto results = optstop::run_selftests(g.seed.value_or(1), &std::cout);
      for (const auto& r : results) {
        if (!r.passed) return 1;
      }
      return 0;
    }
  } catch (const optstop::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const optstop::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergenceExit;
  } catch (const optstop::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
