#pragma once

#include "optstop/objective.hpp"
#include "optstop/optimizer.hpp"
#include "optstop/paths.hpp"
#include "optstop/payoffs.hpp"
#include "optstop/stopnet.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace optstop {

using PathSource = std::function<PathBatch(std::size_t paths, const RngStream& rng, std::size_t first_path)>;
using PayoffFn = std::function<Eigen::MatrixXd(const PathBatch& batch)>;

/// A discrete stopping problem: how to draw paths and what they pay.
struct Problem {
  PathSource sample;
  PayoffFn payoff;
  std::size_t steps = 0;
  std::size_t dim = 0;
  bool deterministic_start = true;
};

/// Wraps a market model and payoff on a grid. The start is deterministic
/// for every model except the ratio path.
Problem make_problem(const ModelSpec& model, const PayoffSpec& payoff, const TimeGrid& grid);

struct TrainRunConfig {
  std::uint64_t steps = 0;                                   // M
  PiecewiseSchedule batch = PiecewiseSchedule::constant(8192);  // J_m
  std::size_t eval_paths = 1 << 18;                          // J_0
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::uint64_t log_every = 1;
  bool keep_best = false;  // price with the best observed training objective
  bool step0_trainable = true;  // deterministic start: whether the step-0 logit learns
  std::size_t eval_chunk = 1 << 14;

  void validate() const;
};

struct LogRecord {
  std::uint64_t step = 0;
  double objective = 0.0;
  double learning_rate = 0.0;
  double elapsed_seconds = 0.0;
};

struct TrainResult {
  StoppingPolicy policy;
  std::vector<LogRecord> log;
  std::vector<double> objectives;  // phi at every step m = 1..M
};

/// Mean of objectives[m - window .. m - 1] (fewer entries near the start).
double trailing_mean(const std::vector<double>& objectives, std::size_t m, std::size_t window = 100);

/// True when the trailing mean at step M exceeds the one at step min(window, M).
/// Runs of at most `window` steps have nothing to compare and count as improved.
bool objective_improved(const std::vector<double>& objectives, std::size_t window = 100);

inline constexpr double kDivergenceBound = 1e8;

using StepObserver = std::function<void(const LogRecord&, const StoppingPolicy&)>;

/// For m = 1..M: fresh batch from substream m, running statistics update,
/// objective gradient, Adam ascent. Throws DivergenceError on a non-finite or
/// exploding objective or gradient.
TrainResult train(const Problem& problem, const NetworkLayout& layout, const TrainRunConfig& cfg,
                  const StepObserver& observer = {});

struct PriceEstimate {
  double mean = 0.0;
  double sample_std = 0.0;  // J0 - 1 denominator
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t paths = 0;
};

inline constexpr double kNormalQuantile975 = 1.959964;

/// mean +- 1.959964 std / sqrt(J). Requires J >= 2.
std::pair<double, double> confidence_interval(double mean, double sample_std, std::size_t paths);

/// Average of g(t_kappa, X_kappa) over J0 fresh paths from substream 0,
/// with eval-mode networks and the hard stopping rule.
PriceEstimate estimate_price(const StoppingPolicy& policy, const Problem& problem, std::size_t eval_paths,
                             std::uint64_t seed, std::size_t chunk = 1 << 14);

/// Monte Carlo mean of the terminal payoff g(T, X_T) (European value).
PriceEstimate estimate_terminal(const Problem& problem, std::size_t paths, std::uint64_t seed,
                                std::size_t chunk = 1 << 14);

}  // namespace optstop
