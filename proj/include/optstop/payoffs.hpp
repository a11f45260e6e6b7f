#pragma once

#include "optstop/paths.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <span>
#include <variant>

namespace optstop {

// Each payoff carries `dim`, the state dimension it expects (0 accepts any).

enum class BrownianScaling {
  kTenOverDim,   // beta sqrt(10) / sqrt(d (d + 9)), two-exercise example
  kInverseSqrt,  // beta / sqrt(d)
};

/// e^{-rs} max{K - chi exp((r - beta^2/2) s + c (x_1 + ... + x_d)), 0} on a
/// raw Brownian state.
struct BmPutType {
  double rate = 0.0;
  double vol = 0.0;
  double chi = 0.0;
  double strike = 0.0;
  BrownianScaling scaling = BrownianScaling::kInverseSqrt;
  std::size_t dim = 0;
};

/// e^{-rs} max{K - prod |x_k|^{1/sqrt d}, 0}
struct GeometricPut {
  double rate = 0.0;
  double strike = 0.0;
  std::size_t dim = 0;
};

/// e^{-rs} max{prod |x_k|^{1/d} - K, 0}
struct GeometricCall {
  double rate = 0.0;
  double strike = 0.0;
  std::size_t dim = 0;
};

/// e^{-rs} max{max_k x_k - K, 0}
struct MaxCall {
  double rate = 0.0;
  double strike = 0.0;
  std::size_t dim = 0;
};

/// Four legs on the arithmetic basket mean b:
/// -(K1 - b)^+ + (K2 - b)^+ + (b - K3)^+ - (b - K4)^+, discounted.
struct StrangleSpread {
  double rate = 0.0;
  std::array<double, 4> strikes{};
  std::size_t dim = 0;
};

/// Basket put on log prices: e^{-rs} max{K - mean_k exp(x_k), 0}.
struct BasketPutOnExpLog {
  double rate = 0.0;
  double strike = 0.0;
  std::size_t dim = 0;
};

/// e^{-rs} x_last, the ratio over the full window.
struct RatioLast {
  double rate = 0.0;
  std::size_t dim = 0;
};

using PayoffSpec = std::variant<BmPutType, GeometricPut, GeometricCall, MaxCall, StrangleSpread,
                                BasketPutOnExpLog, RatioLast>;

/// Throws InvalidArgument for non-finite parameters or unordered strikes.
void validate_payoff(const PayoffSpec& spec);

double eval_payoff(const PayoffSpec& spec, double s, std::span<const double> x);

/// Same payoff with the discount rate set to zero (BmPutType keeps its drift
/// term, only the outer discount is removed).
PayoffSpec undiscounted(const PayoffSpec& spec);

double payoff_rate(const PayoffSpec& spec);

/// G(j, n) = g(t_n, X^j_{t_n}).
Eigen::MatrixXd payoff_along_paths(const PayoffSpec& spec, const TimeGrid& grid, const PathBatch& batch);

}  // namespace optstop
