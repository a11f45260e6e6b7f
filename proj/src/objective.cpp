#include "optstop/objective.hpp"

#include "optstop/error.hpp"
#include "optstop/parallel.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace optstop {

Eigen::MatrixXd compose_soft_factors(const Eigen::Ref<const Eigen::MatrixXd>& u) {
  const auto paths = u.rows();
  const auto steps = u.cols();
  Eigen::MatrixXd factors(paths, steps + 1);
  for (Eigen::Index j = 0; j < paths; ++j) {
    double rest = 1.0;
    for (Eigen::Index n = 0; n < steps; ++n) {
      const double v = u(j, n);
      if (!(v > 0.0 && v < 1.0)) {
        throw InvalidArgument("compose_soft_factors: u(" + std::to_string(j) + ", " + std::to_string(n) +
                              ") = " + std::to_string(v) + " is outside (0, 1)");
      }
      factors(j, n) = v * rest;
      rest *= 1.0 - v;
    }
    factors(j, steps) = rest;
  }
  return factors;
}

HardStops hard_stopping_time(const Eigen::Ref<const Eigen::MatrixXd>& factors, const TimeGrid* grid) {
  const auto paths = factors.rows();
  const auto last = factors.cols() - 1;
  HardStops stops;
  stops.index.resize(static_cast<std::size_t>(paths));
  for (Eigen::Index j = 0; j < paths; ++j) {
    double cumulative = 0.0;
    Eigen::Index kappa = last;
    for (Eigen::Index n = 0; n < last; ++n) {
      cumulative += factors(j, n);
      if (cumulative >= 1.0 - factors(j, n)) {
        kappa = n;
        break;
      }
    }
    stops.index[static_cast<std::size_t>(j)] = static_cast<std::size_t>(kappa);
  }
  if (grid) {
    stops.time.resize(stops.index.size());
    for (std::size_t j = 0; j < stops.index.size(); ++j) stops.time[j] = grid->points.at(stops.index[j]);
  }
  return stops;
}

std::vector<std::size_t> hard_stopping_time_by_later_mass(const Eigen::Ref<const Eigen::MatrixXd>& factors) {
  const auto paths = factors.rows();
  const auto last = factors.cols() - 1;
  std::vector<std::size_t> index(static_cast<std::size_t>(paths), static_cast<std::size_t>(last));
  for (Eigen::Index j = 0; j < paths; ++j) {
    for (Eigen::Index n = 0; n < last; ++n) {
      if (factors(j, n) >= factors.row(j).tail(last - n).sum()) {
        index[static_cast<std::size_t>(j)] = static_cast<std::size_t>(n);
        break;
      }
    }
  }
  return index;
}

std::vector<std::size_t> first_exercise_index(const Eigen::Ref<const Eigen::MatrixXd>& u) {
  const auto steps = u.cols();
  std::vector<std::size_t> index(static_cast<std::size_t>(u.rows()), static_cast<std::size_t>(steps));
  for (Eigen::Index j = 0; j < u.rows(); ++j) {
    for (Eigen::Index n = 0; n < steps; ++n) {
      if (u(j, n) >= 0.5) {
        index[static_cast<std::size_t>(j)] = static_cast<std::size_t>(n);
        break;
      }
    }
  }
  return index;
}

namespace {

Eigen::MatrixXd step_inputs(const PathBatch& batch, std::size_t n) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(batch.dim()), static_cast<Eigen::Index>(batch.paths()));
  for (std::size_t j = 0; j < batch.paths(); ++j) {
    const auto s = batch.state(j, n);
    for (std::size_t i = 0; i < batch.dim(); ++i) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s[i];
    }
  }
  return x;
}

void check_shapes(const StoppingPolicy& policy, const PathBatch& batch, Eigen::Index payoff_rows,
                  Eigen::Index payoff_cols) {
  if (batch.times() != policy.steps() + 1) {
    throw InvalidArgument("objective: batch has " + std::to_string(batch.times()) + " time points, policy has " +
                          std::to_string(policy.steps()) + " steps");
  }
  if (payoff_rows >= 0 && (static_cast<std::size_t>(payoff_rows) != batch.paths() ||
                           static_cast<std::size_t>(payoff_cols) != batch.times())) {
    throw InvalidArgument("objective: payoff matrix is " + std::to_string(payoff_rows) + " x " +
                          std::to_string(payoff_cols) + ", expected " + std::to_string(batch.paths()) + " x " +
                          std::to_string(batch.times()));
  }
  if (batch.dim() != policy.layout().input && policy.steps() > (policy.deterministic_start() ? 1u : 0u)) {
    throw InvalidArgument("objective: path dimension " + std::to_string(batch.dim()) +
                          " does not match network input " + std::to_string(policy.layout().input));
  }
}

double weighted_mean(const Eigen::MatrixXd& factors, const Eigen::Ref<const Eigen::MatrixXd>& payoffs) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < factors.rows(); ++j) total += factors.row(j).dot(payoffs.row(j));
  return total / static_cast<double>(factors.rows());
}

}  // namespace

Eigen::MatrixXd policy_outputs(const StoppingPolicy& policy, const PathBatch& batch, Mode mode) {
  check_shapes(policy, batch, -1, -1);
  const std::size_t steps = policy.steps();
  Eigen::MatrixXd u(static_cast<Eigen::Index>(batch.paths()), static_cast<Eigen::Index>(steps));
  parallel_for(steps, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const Eigen::MatrixXd x = policy.has_network(n) ? step_inputs(batch, n)
                                                      : Eigen::MatrixXd(0, static_cast<Eigen::Index>(batch.paths()));
      u.col(static_cast<Eigen::Index>(n)) = forward_u(policy, n, x, mode).transpose();
    }
  });
  return u;
}

double objective_value(const StoppingPolicy& policy, const PathBatch& batch,
                       const Eigen::Ref<const Eigen::MatrixXd>& payoffs) {
  check_shapes(policy, batch, payoffs.rows(), payoffs.cols());
  return weighted_mean(compose_soft_factors(policy_outputs(policy, batch, Mode::kTrain)), payoffs);
}

Eigen::RowVectorXd soft_objective_adjoint(const Eigen::Ref<const Eigen::RowVectorXd>& u,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& g) {
  const auto steps = u.size();
  if (g.size() != steps + 1) throw InvalidArgument("soft_objective_adjoint: payoff length must be N + 1");
  // rest_n = prod_{k<n} (1 - u_k); later_n = value of sum_{k>=n} U_k g_k / rest_n
  Eigen::RowVectorXd rest(steps + 1);
  rest[0] = 1.0;
  for (Eigen::Index n = 0; n < steps; ++n) rest[n + 1] = rest[n] * (1.0 - u[n]);
  Eigen::RowVectorXd du(steps);
  double later = g[steps];
  for (Eigen::Index n = steps - 1; n >= 0; --n) {
    du[n] = rest[n] * (g[n] - later);
    later = u[n] * g[n] + (1.0 - u[n]) * later;
  }
  return du;
}

ObjectiveResult objective_and_gradient(const StoppingPolicy& policy, const PathBatch& batch,
                                       const Eigen::Ref<const Eigen::MatrixXd>& payoffs) {
  check_shapes(policy, batch, payoffs.rows(), payoffs.cols());
  const std::size_t steps = policy.steps();
  const std::size_t paths = batch.paths();
  const auto w = policy.layout().widths();
  const std::size_t per_step = paths * sizeof(double) * (2 * w[0] + 2 * w[1] + 2 * w[2] + 4);
  const bool keep = per_step * steps <= kCacheBudgetBytes;

  ObjectiveResult result;
  result.u.resize(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(steps));
  std::vector<StepCache> caches(keep ? steps : 0);
  parallel_for(steps, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const Eigen::MatrixXd x =
          policy.has_network(n) ? step_inputs(batch, n) : Eigen::MatrixXd(0, static_cast<Eigen::Index>(paths));
      result.u.col(static_cast<Eigen::Index>(n)) =
          forward_u(policy, n, x, Mode::kTrain, keep ? &caches[n] : nullptr).transpose();
    }
  });

  const Eigen::MatrixXd factors = compose_soft_factors(result.u);
  result.value = weighted_mean(factors, payoffs);

  // d(phi)/d(u), already divided by J
  Eigen::MatrixXd du(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(steps));
  const double inv_paths = 1.0 / static_cast<double>(paths);
  parallel_for(paths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const auto r = static_cast<Eigen::Index>(j);
      du.row(r) = inv_paths * soft_objective_adjoint(result.u.row(r), payoffs.row(r));
    }
  });

  result.gradient.assign(policy.parameter_count(), 0.0);
  result.stats.resize(steps);
  parallel_for(steps, [&](std::size_t begin, std::size_t end) {
    StepCache local;
    for (std::size_t n = begin; n < end; ++n) {
      StepCache* cache = keep ? &caches[n] : &local;
      if (!keep) {
        const Eigen::MatrixXd x =
            policy.has_network(n) ? step_inputs(batch, n) : Eigen::MatrixXd(0, static_cast<Eigen::Index>(paths));
        forward_u(policy, n, x, Mode::kTrain, cache);
      }
      std::span<double> grad(result.gradient.data() + policy.parameter_offset(n), policy.parameter_size(n));
      backward_u(policy, n, *cache, du.col(static_cast<Eigen::Index>(n)).transpose(), grad);
      result.stats[n] = std::move(cache->stats);
      if (keep) caches[n] = StepCache{};
    }
  });
  return result;
}

Eigen::MatrixXd factorize_indicator(const std::vector<std::vector<int>>& paths, const std::vector<std::size_t>& tau) {
  if (paths.size() != tau.size()) throw InvalidArgument("factorize_indicator: one stopping index per path required");
  if (paths.empty()) return {};
  const std::size_t times = paths.front().size();
  if (times == 0) throw InvalidArgument("factorize_indicator: empty paths");
  for (const auto& p : paths) {
    if (p.size() != times) throw InvalidArgument("factorize_indicator: paths must have equal length");
  }
  const std::size_t last = times - 1;
  for (std::size_t t : tau) {
    if (t > last) throw InvalidArgument("factorize_indicator: stopping index beyond the horizon");
  }
  // {tau = n} must be a function of the prefix up to n
  for (std::size_t n = 0; n < last; ++n) {
    std::map<std::vector<int>, std::size_t> seen;
    for (std::size_t j = 0; j < paths.size(); ++j) {
      std::vector<int> prefix(paths[j].begin(), paths[j].begin() + static_cast<std::ptrdiff_t>(n + 1));
      auto [it, inserted] = seen.emplace(std::move(prefix), j);
      if (!inserted && (tau[it->second] == n) != (tau[j] == n)) throw AdaptednessError(n, it->second, j);
    }
  }
  Eigen::MatrixXd factors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(paths.size()),
                                                  static_cast<Eigen::Index>(times));
  for (std::size_t j = 0; j < paths.size(); ++j) {
    double assigned = 0.0;
    for (std::size_t n = 0; n <= last; ++n) {
      const double indicator = tau[j] == n ? 1.0 : 0.0;
      const double v = std::max(indicator, static_cast<double>(n + 1) - static_cast<double>(last));
      const double factor = v * (1.0 - assigned);
      factors(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) = factor;
      assigned += factor;
    }
  }
  return factors;
}

}  // namespace optstop
