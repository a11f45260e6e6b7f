#include "optstop/selftest.hpp"

#include "optstop/objective.hpp"
#include "optstop/oracles.hpp"
#include "optstop/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>

namespace optstop {

namespace {

SuiteResult normalization(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> steps(1, 60);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = steps(gen);
    Eigen::MatrixXd u(1, n);
    for (int k = 0; k < n; ++k) u(0, k) = std::clamp(unit(gen), 1e-12, 1.0 - 1e-12);
    const Eigen::MatrixXd factors = compose_soft_factors(u);
    worst = std::max(worst, std::abs(factors.sum() - 1.0));
  }
  std::ostringstream detail;
  detail << "max |sum U - 1| = " << worst << " over 10000 instances";
  return {"normalization", worst <= 1e-12, detail.str()};
}

SuiteResult hard_stop_rules(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(0.02, 0.98);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    Eigen::MatrixXd u(4, 12);
    for (Eigen::Index j = 0; j < u.rows(); ++j)
      for (Eigen::Index k = 0; k < u.cols(); ++k) u(j, k) = unit(gen);
    const Eigen::MatrixXd factors = compose_soft_factors(u);
    const auto cumulative = hard_stopping_time(factors).index;
    const auto later = hard_stopping_time_by_later_mass(factors);
    const auto direct = first_exercise_index(u);
    for (std::size_t j = 0; j < direct.size(); ++j) {
      mismatches += cumulative[j] != direct[j] || later[j] != direct[j];
    }
  }
  return {"hard stop rules", mismatches == 0, std::to_string(mismatches) + " disagreements over 8000 paths"};
}

SuiteResult gradients(std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  int probes = 0;
  for (bool bn_hidden : {true, false}) {
    NetworkLayout layout;
    layout.input = 2;
    layout.hidden1 = 5;
    layout.hidden2 = 4;
    layout.bn_hidden = bn_hidden;
    layout.bn_output = bn_hidden;
    const std::size_t steps = 3;
    StoppingPolicy policy = init_policy(layout, steps, RngStream{gen(), 0}, true);
    auto params = policy.parameters();
    for (double& p : params) p += 0.3 * normal(gen);

    const std::size_t paths = 12;
    PathBatch batch(paths, steps + 1, layout.input);
    Eigen::MatrixXd payoffs(paths, steps + 1);
    for (std::size_t j = 0; j < paths; ++j) {
      for (std::size_t n = 0; n <= steps; ++n) {
        for (std::size_t i = 0; i < layout.input; ++i) batch.at(j, n, i) = n == 0 ? 0.5 : normal(gen);
        payoffs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) = normal(gen);
      }
    }
    const ObjectiveResult analytic = objective_and_gradient(policy, batch, payoffs);
    double scale = 0.0;
    for (double g : analytic.gradient) scale = std::max(scale, std::abs(g));
    std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
    for (int k = 0; k < 50; ++k, ++probes) {
      const std::size_t i = pick(gen);
      const double saved = params[i];
      const double h = 1e-5 * std::max(1.0, std::abs(saved));
      params[i] = saved + h;
      const double up = objective_value(policy, batch, payoffs);
      params[i] = saved - h;
      const double down = objective_value(policy, batch, payoffs);
      params[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(analytic.gradient[i]), 1e-3 * scale});
      worst = std::max(worst, std::abs(fd - analytic.gradient[i]) / denom);
    }
  }
  std::ostringstream detail;
  detail << "max relative error " << worst << " over " << probes << " probes";
  return {"gradients", worst < 1e-6, detail.str()};
}

// All adapted stopping times on a binary tree of the given depth; paths are
// the sequences of branch bits.
SuiteResult factorisation() {
  std::size_t checked = 0;
  std::size_t failures = 0;
  for (std::size_t depth = 1; depth <= 3; ++depth) {
    const std::size_t leaves = std::size_t{1} << depth;
    std::vector<std::vector<int>> paths(leaves, std::vector<int>(depth + 1, 0));
    for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
      for (std::size_t n = 1; n <= depth; ++n) paths[leaf][n] = static_cast<int>((leaf >> (depth - n)) & 1);
    }
    // a stopping time is a choice, at every internal node, of stop or go on
    std::size_t internal = leaves - 1;
    for (std::size_t mask = 0; mask < (std::size_t{1} << internal); ++mask) {
      std::vector<std::size_t> tau(leaves);
      for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
        std::size_t node = 0;  // heap index of the internal node
        std::size_t n = 0;
        while (n < depth && !((mask >> node) & 1)) {
          node = 2 * node + 1 + static_cast<std::size_t>(paths[leaf][n + 1]);
          ++n;
        }
        tau[leaf] = n;
      }
      const Eigen::MatrixXd factors = factorize_indicator(paths, tau);
      for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
        double rebuilt = 0.0;
        double mass = 0.0;
        for (std::size_t n = 0; n <= depth; ++n) {
          const double f = factors(static_cast<Eigen::Index>(leaf), static_cast<Eigen::Index>(n));
          rebuilt += static_cast<double>(n) * f;
          mass += f;
        }
        failures += rebuilt != static_cast<double>(tau[leaf]) || mass != 1.0;
      }
      ++checked;
    }
  }
  return {"factorisation", failures == 0,
          std::to_string(checked) + " stopping times, " + std::to_string(failures) + " mismatches"};
}

Lattice random_tree(std::mt19937_64& gen, std::size_t depth) {
  std::uniform_int_distribution<int> branches(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Lattice lattice;
  lattice.layers.resize(depth + 1);
  lattice.layers[0].resize(1);
  for (std::size_t n = 0; n <= depth; ++n) {
    for (auto& node : lattice.layers[n]) {
      node.payoff = 10.0 * unit(gen);
      if (n == depth) continue;
      const int b = branches(gen);
      double total = 0.0;
      for (int c = 0; c < b; ++c) {
        node.children.push_back(lattice.layers[n + 1].size());
        lattice.layers[n + 1].emplace_back();
        node.probs.push_back(0.2 + unit(gen));
        total += node.probs.back();
      }
      for (double& p : node.probs) p /= total;
      double sum = 0.0;
      for (std::size_t c = 0; c + 1 < node.probs.size(); ++c) sum += node.probs[c];
      node.probs.back() = 1.0 - sum;
    }
  }
  return lattice;
}

SuiteResult low_bias(std::mt19937_64& gen) {
  std::size_t violations = 0;
  std::ostringstream detail;
  for (int instance = 0; instance < 5; ++instance) {
    const Lattice lattice = random_tree(gen, 3);
    const double snell = lattice_snell(lattice).value;
    Problem problem;
    problem.steps = lattice.depth();
    problem.dim = 1;
    problem.sample = [&lattice](std::size_t paths, const RngStream& rng, std::size_t first) {
      return simulate_lattice(lattice, paths, rng, first);
    };
    problem.payoff = [&lattice](const PathBatch& batch) { return lattice_payoffs(lattice, batch); };
    TrainRunConfig run;
    run.steps = 150;
    run.batch = PiecewiseSchedule::constant(256);
    run.adam.rate = PiecewiseSchedule{{{100, 0.05}}, 0.005};
    run.seed = gen();
    run.log_every = 1000;
    NetworkLayout layout = NetworkLayout::for_dimension(1);
    layout.hidden1 = layout.hidden2 = 8;
    const TrainResult trained = train(problem, layout, run);
    const PriceEstimate price = estimate_price(trained.policy, problem, 1 << 14, run.seed);
    const bool ok = price.mean <= snell + 3.0 * price.std_error;
    violations += !ok;
    detail << (instance ? "; " : "") << price.mean << " vs " << snell;
  }
  return {"low bias", violations == 0, detail.str()};
}

}  // namespace

std::vector<SuiteResult> run_selftests(std::uint64_t seed, std::ostream* progress) {
  std::mt19937_64 gen(seed);
  const std::vector<std::function<SuiteResult()>> suites = {
      [&] { return normalization(gen); }, [&] { return hard_stop_rules(gen); }, [&] { return gradients(gen); },
      [&] { return factorisation(); },    [&] { return low_bias(gen); },
  };
  std::vector<SuiteResult> results;
  for (const auto& suite : suites) {
    results.push_back(suite());
    if (progress) {
      const SuiteResult& r = results.back();
      *progress << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n" << std::flush;
    }
  }
  return results;
}

}  // namespace optstop
