#pragma once

#include "optstop/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace optstop {

/// Time points t_0 < t_1 < ... < t_N with t_0 = 0 and t_N = T.
struct TimeGrid {
  double maturity = 0.0;
  std::size_t steps = 0;
  std::vector<double> points;

  double dt(std::size_t n) const { return points[n + 1] - points[n]; }
};

/// Equidistant grid t_n = nT/N.
TimeGrid make_grid(double maturity, std::size_t steps);

/// Lower-triangular L with L L^T = Q. Throws DecompositionError naming the
/// first non-positive pivot.
Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& q);

/// Which product of the factor reproduces the correlation matrix.
enum class FactorOrientation {
  kFactorTimesAdjoint,  // F F^T = Q, driving noise F W
  kAdjointTimesFactor,  // F^T F = Q, asset i is driven by <column i of F, W>
};

/// A correlation matrix together with the factor used to drive the assets.
///
/// `loadings` always has row i equal to the weights of asset i on the
/// independent Brownian coordinates, so loadings * loadings^T = Q for both
/// orientations. `factor()` returns the matrix in the stated orientation.
struct CorrelationSpec {
  Eigen::MatrixXd correlation;
  Eigen::MatrixXd loadings;
  FactorOrientation orientation = FactorOrientation::kFactorTimesAdjoint;

  static CorrelationSpec from_correlation(const Eigen::MatrixXd& q, FactorOrientation orientation);
  /// Unit diagonal, constant off-diagonal entry rho.
  static CorrelationSpec equicorrelated(std::size_t dim, double rho, FactorOrientation orientation);

  std::size_t dimension() const { return static_cast<std::size_t>(correlation.rows()); }
  Eigen::MatrixXd factor() const;
  Eigen::MatrixXd reconstruct() const;
};

/// X_{t_n} = F W_{t_n}; F empty means identity of the given dimension.
struct BrownianScaled {
  std::size_t dim = 1;
  Eigen::MatrixXd loadings;
};

/// X^{(i)}_t = xi_i exp((a_i - v_i^2 |f_i|^2 / 2) t + v_i <f_i, W_t>), f_i row
/// i of the loadings (identity when empty).
struct GbmExact {
  std::vector<double> initial;
  std::vector<double> drift;
  std::vector<double> vol;
  Eigen::MatrixXd loadings;
};

using DriftFn = std::function<void(std::span<const double> x, std::span<double> out)>;
/// Writes the d x d diffusion matrix row-major.
using DiffusionFn = std::function<void(std::span<const double> x, std::span<double> out)>;

/// X_{n+1} = X_n + mu(X_n) dt + sigma(X_n) dW.
struct EulerSde {
  std::vector<double> initial;
  DriftFn drift;
  DiffusionFn diffusion;
};

using LocalVolFn = std::function<double(double t, double spot)>;

/// Log-price scheme on L coarse steps. Inside a coarse interval the log price
/// moves linearly in time, including the coarse Brownian increment.
/// States are log prices.
struct DupireLogEuler {
  std::vector<double> initial;  // spot prices, not logs
  double rate = 0.0;
  double dividend = 0.0;
  std::size_t coarse_steps = 10;
  LocalVolFn local_vol;  // relative volatility sigma(t, s)
};

/// State k (1-based) at grid index n is S_{n-w+k} / S_{n-w}, w = window,
/// where S is a GBM started `window` steps before t_0.
struct RatioPath {
  double initial = 1.0;
  double rate = 0.0;
  double vol = 0.0;
  std::size_t window = 100;
};

using ModelSpec = std::variant<BrownianScaled, GbmExact, EulerSde, DupireLogEuler, RatioPath>;

std::size_t model_dimension(const ModelSpec& model);

/// J x (N+1) x d values, row-major in (path, time, coordinate).
class PathBatch {
 public:
  PathBatch() = default;
  PathBatch(std::size_t paths, std::size_t times, std::size_t dim);

  std::size_t paths() const { return paths_; }
  std::size_t times() const { return times_; }
  std::size_t dim() const { return dim_; }

  double& at(std::size_t j, std::size_t n, std::size_t i) { return data_[(j * times_ + n) * dim_ + i]; }
  double at(std::size_t j, std::size_t n, std::size_t i) const { return data_[(j * times_ + n) * dim_ + i]; }

  std::span<double> state(std::size_t j, std::size_t n) { return {&data_[(j * times_ + n) * dim_], dim_}; }
  std::span<const double> state(std::size_t j, std::size_t n) const {
    return {&data_[(j * times_ + n) * dim_], dim_};
  }
  std::span<const double> data() const { return data_; }

 private:
  std::size_t paths_ = 0;
  std::size_t times_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Simulates J paths. Path j draws from substream (rng.seed, rng.step,
/// first_path + j), so a batch split into chunks reproduces the whole batch.
PathBatch simulate_paths(const ModelSpec& model, const TimeGrid& grid, std::size_t paths,
                         const RngStream& rng, std::size_t first_path = 0);

/// Brownian increments dW, stored as a batch with N "times" (increment n
/// spans [t_n, t_{n+1}]).
PathBatch brownian_increments(const TimeGrid& grid, std::size_t paths, std::size_t dim,
                              const RngStream& rng, std::size_t first_path = 0);

/// Drives BrownianScaled, GbmExact or EulerSde with the given increments.
PathBatch simulate_from_increments(const ModelSpec& model, const TimeGrid& grid,
                                   const PathBatch& increments);

/// Underlying price S at grid offsets -window..N for a RatioPath model,
/// J x (N + window + 1), using the same substreams as simulate_paths.
Eigen::MatrixXd simulate_ratio_underlying(const RatioPath& model, const TimeGrid& grid,
                                          std::size_t paths, const RngStream& rng,
                                          std::size_t first_path = 0);

}  // namespace optstop
