#pragma once

#include "optstop/paths.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace optstop {

/// One-dimensional Black-Scholes inputs. `carry` is the dividend yield c.
struct Bs1dParams {
  double maturity = 1.0;
  double spot = 100.0;
  double vol = 0.2;
  double rate = 0.0;
  double carry = 0.0;
  double strike = 100.0;
};

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// European call; K <= 0 gives the forward value e^{-cT} xi - K e^{-rT}.
double bs_euro_call(const Bs1dParams& p);

enum class Exercise { kPut, kCall };

/// Cox-Ross-Rubinstein tree with early exercise at every node (or none when
/// `american` is false).
double binomial_american(const Bs1dParams& p, Exercise kind, std::size_t steps, bool american = true);

/// One-dimensional GBM followed by prod |X^{(i)}|^eps.
struct ReducedModel {
  double initial = 0.0;
  double drift = 0.0;
  double vol = 0.0;
};

/// `loadings` has row i equal to the noise weights of asset i (identity
/// when empty), i.e. dX^{(i)} = alpha_i X^{(i)} dt + beta_i X^{(i)} <f_i, dW>.
ReducedModel reduce_dimension(double eps, const std::vector<double>& alpha, const std::vector<double>& beta,
                              const Eigen::MatrixXd& loadings, const std::vector<double>& initial);

/// Finite tree: layers[n][k] is node k at time n; layer 0 holds the root.
struct LatticeNode {
  double payoff = 0.0;
  std::vector<std::size_t> children;
  std::vector<double> probs;
};

struct Lattice {
  std::vector<std::vector<LatticeNode>> layers;

  std::size_t depth() const { return layers.empty() ? 0 : layers.size() - 1; }
  /// Throws InvalidArgument for depth > 12, branching > 3, dangling children
  /// or probabilities that do not sum to 1.
  void validate() const;
};

struct SnellResult {
  double value = 0.0;
  std::vector<std::vector<double>> envelope;
  std::vector<std::vector<bool>> stop;  // payoff >= continuation value
};

/// Backward induction V_n = max{g_n, E[V_{n+1} | node]}.
SnellResult lattice_snell(const Lattice& lattice);

/// Random walks down the tree. The state is the node index (dimension 1).
PathBatch simulate_lattice(const Lattice& lattice, std::size_t paths, const RngStream& rng,
                           std::size_t first_path = 0);

/// G(j, n) = payoff of the node visited by path j at time n.
Eigen::MatrixXd lattice_payoffs(const Lattice& lattice, const PathBatch& batch);

}  // namespace optstop
