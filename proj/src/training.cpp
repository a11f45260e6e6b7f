#include "optstop/training.hpp"

#include "optstop/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <tuple>

namespace optstop {

Problem make_problem(const ModelSpec& model, const PayoffSpec& payoff, const TimeGrid& grid) {
  validate_payoff(payoff);
  Problem problem;
  problem.steps = grid.steps;
  problem.dim = model_dimension(model);
  problem.deterministic_start = !std::holds_alternative<RatioPath>(model);
  problem.sample = [model, grid](std::size_t paths, const RngStream& rng, std::size_t first_path) {
    return simulate_paths(model, grid, paths, rng, first_path);
  };
  problem.payoff = [payoff, grid](const PathBatch& batch) { return payoff_along_paths(payoff, grid, batch); };
  return problem;
}

void TrainRunConfig::validate() const {
  batch.validate();
  for (const auto& [threshold, size] : batch.segments) {
    (void)threshold;
    if (!(size >= 1.0)) throw InvalidArgument("training: batch sizes must be at least 1");
  }
  if (!(batch.terminal >= 1.0)) throw InvalidArgument("training: batch sizes must be at least 1");
  if (eval_paths < 1) throw InvalidArgument("training: evaluation size must be at least 1");
  if (eval_chunk < 1) throw InvalidArgument("training: evaluation chunk must be at least 1");
  if (log_every < 1) throw InvalidArgument("training: log cadence must be at least 1");
  adam.validate();
}

TrainResult train(const Problem& problem, const NetworkLayout& layout, const TrainRunConfig& cfg,
                  const StepObserver& observer) {
  cfg.validate();
  if (problem.dim != layout.input) {
    throw InvalidArgument("train: problem dimension " + std::to_string(problem.dim) + " does not match network input " +
                          std::to_string(layout.input));
  }
  TrainResult result;
  result.policy = init_policy(layout, problem.steps, RngStream{cfg.seed, 0}, problem.deterministic_start);
  StoppingPolicy& policy = result.policy;
  policy.set_logit_trainable(cfg.step0_trainable);
  AdamState adam(policy.parameter_count());
  std::vector<double> increment(policy.parameter_count());

  StoppingPolicy best;
  double best_value = -HUGE_VAL;
  const auto start = std::chrono::steady_clock::now();

  for (std::uint64_t m = 1; m <= cfg.steps; ++m) {
    const auto batch_size = static_cast<std::size_t>(cfg.batch.at(m));
    const RngStream rng{cfg.seed, m};
    const PathBatch batch = problem.sample(batch_size, rng, 0);
    const Eigen::MatrixXd payoffs = problem.payoff(batch);
    ObjectiveResult obj = objective_and_gradient(policy, batch, payoffs);
    result.objectives.push_back(obj.value);

    if (!std::isfinite(obj.value) || std::abs(obj.value) > kDivergenceBound) {
      throw DivergenceError(m, "objective", obj.value);
    }
    double norm2 = 0.0;
    for (double g : obj.gradient) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    if (!std::isfinite(norm) || norm > kDivergenceBound) throw DivergenceError(m, "gradient norm", norm);

    for (std::size_t n = 0; n < policy.steps(); ++n) {
      if (policy.has_network(n)) update_running_stats(policy, n, obj.stats[n]);
    }
    policy.set_counter(policy.counter() + 1);

    if (cfg.keep_best && obj.value > best_value) {
      best_value = obj.value;
      best = policy;
    }

    adam_step(adam, obj.gradient, cfg.adam, increment);
    auto params = policy.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += increment[i];

    if (m % cfg.log_every == 0 || m == cfg.steps) {
      LogRecord rec;
      rec.step = m;
      rec.objective = obj.value;
      rec.learning_rate = schedule_rate(cfg.adam, m);
      rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.push_back(rec);
      if (observer) observer(rec, policy);
    }
  }
  if (cfg.keep_best && cfg.steps > 0) policy = std::move(best);
  return result;
}

double trailing_mean(const std::vector<double>& objectives, std::size_t m, std::size_t window) {
  if (m == 0 || m > objectives.size() || window == 0) {
    throw InvalidArgument("trailing_mean: step " + std::to_string(m) + " outside 1.." +
                          std::to_string(objectives.size()));
  }
  const std::size_t first = m > window ? m - window : 0;
  double total = 0.0;
  for (std::size_t i = first; i < m; ++i) total += objectives[i];
  return total / static_cast<double>(m - first);
}

bool objective_improved(const std::vector<double>& objectives, std::size_t window) {
  const std::size_t steps = objectives.size();
  if (steps <= window) return true;
  return trailing_mean(objectives, steps, window) > trailing_mean(objectives, window, window);
}

std::pair<double, double> confidence_interval(double mean, double sample_std, std::size_t paths) {
  if (paths < 2) throw InvalidArgument("confidence_interval: need at least 2 samples");
  if (!(sample_std >= 0.0)) throw InvalidArgument("confidence_interval: standard deviation must be non-negative");
  const double half = kNormalQuantile975 * sample_std / std::sqrt(static_cast<double>(paths));
  return {mean - half, mean + half};
}

namespace {

struct RunningMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double y) {
    ++count;
    const double delta = y - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (y - mean);
  }

  PriceEstimate finish() const {
    PriceEstimate est;
    est.paths = count;
    est.mean = mean;
    est.sample_std = count > 1 ? std::sqrt(m2 / static_cast<double>(count - 1)) : 0.0;
    est.std_error = count > 0 ? est.sample_std / std::sqrt(static_cast<double>(count)) : 0.0;
    if (count >= 2) {
      std::tie(est.ci_low, est.ci_high) = confidence_interval(est.mean, est.sample_std, count);
    } else {
      est.ci_low = est.ci_high = est.mean;
    }
    return est;
  }
};

// Keeps one chunk of simulated states near 256 MiB.
std::size_t bounded_chunk(std::size_t chunk, std::size_t steps, std::size_t dim) {
  const std::size_t per_path = (steps + 1) * std::max<std::size_t>(dim, 1) * sizeof(double);
  const std::size_t cap = std::max<std::size_t>(256, (std::size_t{256} << 20) / per_path);
  return std::max<std::size_t>(1, std::min(chunk, cap));
}

}  // namespace

PriceEstimate estimate_price(const StoppingPolicy& policy, const Problem& problem, std::size_t eval_paths,
                             std::uint64_t seed, std::size_t chunk) {
  if (eval_paths < 1) throw InvalidArgument("estimate_price: need at least one path");
  if (policy.steps() != problem.steps) throw InvalidArgument("estimate_price: policy and problem step counts differ");
  chunk = bounded_chunk(chunk, problem.steps, problem.dim);
  const RngStream rng{seed, 0};
  RunningMoments moments;
  for (std::size_t first = 0; first < eval_paths; first += chunk) {
    const std::size_t size = std::min(chunk, eval_paths - first);
    const PathBatch batch = problem.sample(size, rng, first);
    const Eigen::MatrixXd payoffs = problem.payoff(batch);
    const Eigen::MatrixXd u = policy_outputs(policy, batch, Mode::kEval);
    const auto stop = first_exercise_index(u);
    for (std::size_t j = 0; j < size; ++j) {
      moments.add(payoffs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(stop[j])));
    }
  }
  return moments.finish();
}

PriceEstimate estimate_terminal(const Problem& problem, std::size_t paths, std::uint64_t seed, std::size_t chunk) {
  if (paths < 1) throw InvalidArgument("estimate_terminal: need at least one path");
  chunk = bounded_chunk(chunk, problem.steps, problem.dim);
  const RngStream rng{seed, 0};
  RunningMoments moments;
  const auto last = static_cast<Eigen::Index>(problem.steps);
  for (std::size_t first = 0; first < paths; first += chunk) {
    const std::size_t size = std::min(chunk, paths - first);
    const Eigen::MatrixXd payoffs = problem.payoff(problem.sample(size, rng, first));
    for (std::size_t j = 0; j < size; ++j) moments.add(payoffs(static_cast<Eigen::Index>(j), last));
  }
  return moments.finish();
}

}  // namespace optstop
