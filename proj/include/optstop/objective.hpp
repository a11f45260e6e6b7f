#pragma once

#include "optstop/paths.hpp"
#include "optstop/stopnet.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace optstop {

/// U(j, n) for n = 0..N from per-step outputs u (J x N):
/// U_n = max{u_n, n + 1 - N} (1 - sum_{k<n} U_k), so U_N takes the rest.
Eigen::MatrixXd compose_soft_factors(const Eigen::Ref<const Eigen::MatrixXd>& u);

struct HardStops {
  std::vector<std::size_t> index;
  std::vector<double> time;  // filled when a grid is supplied
};

/// First n with sum_{k<=n} U_k >= 1 - U_n, per row of `factors`.
HardStops hard_stopping_time(const Eigen::Ref<const Eigen::MatrixXd>& factors, const TimeGrid* grid = nullptr);

/// Same rule written as "U_n weakly dominates the total later mass".
std::vector<std::size_t> hard_stopping_time_by_later_mass(const Eigen::Ref<const Eigen::MatrixXd>& factors);

/// Equivalent rule on the raw outputs: the first n < N with u_n >= 1/2,
/// otherwise N. Used by the price estimator because it stays exact after the
/// remaining mass underflows.
std::vector<std::size_t> first_exercise_index(const Eigen::Ref<const Eigen::MatrixXd>& u);

/// Objective value, its gradient with respect to every policy parameter and
/// the per-step batch statistics of the train-mode pass.
struct ObjectiveResult {
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<BatchStatistics> stats;  // one per step with a network
  Eigen::MatrixXd u;                   // J x N outputs
};

/// Network outputs for all steps (J x N) in the given mode.
Eigen::MatrixXd policy_outputs(const StoppingPolicy& policy, const PathBatch& batch, Mode mode);

/// phi = mean_j sum_n U(j, n) G(j, n) with U from the policy in train mode.
double objective_value(const StoppingPolicy& policy, const PathBatch& batch,
                       const Eigen::Ref<const Eigen::MatrixXd>& payoffs);

/// Upper bound on activation memory kept between the forward and backward
/// passes. Above it, each step's forward pass is recomputed during backward.
inline constexpr std::size_t kCacheBudgetBytes = std::size_t{768} << 20;

ObjectiveResult objective_and_gradient(const StoppingPolicy& policy, const PathBatch& batch,
                                       const Eigen::Ref<const Eigen::MatrixXd>& payoffs);

/// d(phi)/d(u) for a single path via the adjoint of the factor recursion,
/// phi = sum_n U_n g_n. Exposed for tests.
Eigen::RowVectorXd soft_objective_adjoint(const Eigen::Ref<const Eigen::RowVectorXd>& u,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& g);

/// Hard factors of a stopping time on an enumerated finite sample space.
/// `paths[j]` lists the states of path j at n = 0..N and `tau[j]` its
/// stopping index. Throws AdaptednessError when two paths share a prefix up
/// to n but disagree on {tau = n}. Returns J x (N+1) factors in {0, 1}.
Eigen::MatrixXd factorize_indicator(const std::vector<std::vector<int>>& paths,
                                    const std::vector<std::size_t>& tau);

}  // namespace optstop
