#include "optstop/paths.hpp"

#include "optstop/error.hpp"
#include "optstop/parallel.hpp"

#include <cmath>
#include <random>
#include <string>

namespace optstop {

TimeGrid make_grid(double maturity, std::size_t steps) {
  if (!(maturity > 0.0) || !std::isfinite(maturity)) {
    throw InvalidArgument("make_grid: maturity must be positive, got " + std::to_string(maturity));
  }
  if (steps == 0) throw InvalidArgument("make_grid: step count must be at least 1");
  TimeGrid grid;
  grid.maturity = maturity;
  grid.steps = steps;
  grid.points.resize(steps + 1);
  for (std::size_t n = 0; n <= steps; ++n) {
    grid.points[n] = maturity * static_cast<double>(n) / static_cast<double>(steps);
  }
  grid.points[steps] = maturity;
  return grid;
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& q) {
  const Eigen::Index d = q.rows();
  if (q.cols() != d) throw InvalidArgument("cholesky_factor: matrix is not square");
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index k = 0; k < i; ++k) {
      if (std::abs(q(i, k) - q(k, i)) > 1e-14 * (1.0 + std::abs(q(i, k)))) {
        throw InvalidArgument("cholesky_factor: matrix is not symmetric at (" + std::to_string(i) +
                              ", " + std::to_string(k) + ")");
      }
    }
  }
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = q(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0)) throw DecompositionError(static_cast<std::size_t>(j), pivot);
    const double diag = std::sqrt(pivot);
    l(j, j) = diag;
    for (Eigen::Index i = j + 1; i < d; ++i) {
      double s = q(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / diag;
    }
  }
  return l;
}

CorrelationSpec CorrelationSpec::from_correlation(const Eigen::MatrixXd& q,
                                                  FactorOrientation orientation) {
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    if (std::abs(q(i, i) - 1.0) > 1e-14) {
      throw InvalidArgument("correlation matrix must have unit diagonal (entry " +
                            std::to_string(i) + ")");
    }
  }
  CorrelationSpec spec;
  spec.correlation = q;
  spec.loadings = cholesky_factor(q);
  spec.orientation = orientation;
  return spec;
}

CorrelationSpec CorrelationSpec::equicorrelated(std::size_t dim, double rho,
                                                FactorOrientation orientation) {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(d, d, rho);
  q.diagonal().setOnes();
  return from_correlation(q, orientation);
}

Eigen::MatrixXd CorrelationSpec::factor() const {
  return orientation == FactorOrientation::kFactorTimesAdjoint ? loadings
                                                                : Eigen::MatrixXd(loadings.transpose());
}

Eigen::MatrixXd CorrelationSpec::reconstruct() const {
  const Eigen::MatrixXd f = factor();
  return orientation == FactorOrientation::kFactorTimesAdjoint ? Eigen::MatrixXd(f * f.transpose())
                                                                : Eigen::MatrixXd(f.transpose() * f);
}

namespace {

struct DimensionVisitor {
  std::size_t operator()(const BrownianScaled& m) const {
    return m.loadings.size() ? static_cast<std::size_t>(m.loadings.rows()) : m.dim;
  }
  std::size_t operator()(const GbmExact& m) const { return m.initial.size(); }
  std::size_t operator()(const EulerSde& m) const { return m.initial.size(); }
  std::size_t operator()(const DupireLogEuler& m) const { return m.initial.size(); }
  std::size_t operator()(const RatioPath& m) const { return m.window; }
};

void check_loadings(const Eigen::MatrixXd& loadings, std::size_t dim, const char* who) {
  if (loadings.size() == 0) return;
  if (static_cast<std::size_t>(loadings.rows()) != dim || loadings.rows() != loadings.cols()) {
    throw InvalidArgument(std::string(who) + ": loadings must be " + std::to_string(dim) + " x " +
                          std::to_string(dim));
  }
}

void check_finite(double v, std::size_t n, std::size_t j, const char* what) {
  if (!std::isfinite(v)) throw SimulationError(n, j, what);
}

void fill_normals(PhiloxEngine& engine, std::span<double> out, double scale) {
  std::normal_distribution<double> normal;
  for (double& v : out) v = scale * normal(engine);
}

PathBatch simulate_dupire(const DupireLogEuler& m, const TimeGrid& grid, std::size_t paths,
                          const RngStream& rng, std::size_t first_path) {
  const std::size_t d = m.initial.size();
  const std::size_t n_steps = grid.steps;
  const std::size_t coarse = m.coarse_steps;
  if (coarse == 0) throw InvalidArgument("dupire: coarse step count must be positive");
  if (n_steps % coarse != 0 && coarse % n_steps != 0) {
    throw InvalidArgument("dupire: grid steps " + std::to_string(n_steps) +
                          " and coarse steps " + std::to_string(coarse) +
                          " must divide one another");
  }
  if (!m.local_vol) throw InvalidArgument("dupire: local volatility function is missing");
  for (double s : m.initial) {
    if (!(s > 0.0)) throw InvalidArgument("dupire: initial prices must be positive");
  }
  const double big_t = grid.maturity;
  const double h = big_t / static_cast<double>(coarse);
  PathBatch batch(paths, n_steps + 1, d);
  parallel_for(paths, [&](std::size_t begin, std::size_t end) {
    std::vector<double> coarse_log((coarse + 1) * d);
    std::vector<double> coarse_vol(coarse * d);
    std::vector<double> coarse_dw(coarse * d);
    for (std::size_t j = begin; j < end; ++j) {
      auto engine = rng.engine(first_path + j);
      fill_normals(engine, coarse_dw, std::sqrt(h));
      for (std::size_t i = 0; i < d; ++i) coarse_log[i] = std::log(m.initial[i]);
      for (std::size_t l = 0; l < coarse; ++l) {
        const double t = h * static_cast<double>(l);
        for (std::size_t i = 0; i < d; ++i) {
          const double y = coarse_log[l * d + i];
          const double vol = m.local_vol(t, std::exp(y));
          check_finite(vol, l, first_path + j, "non-finite local volatility");
          coarse_vol[l * d + i] = vol;
          const double next = y + h * (m.rate - m.dividend - 0.5 * vol * vol) + vol * coarse_dw[l * d + i];
          check_finite(next, l + 1, first_path + j, "non-finite log price");
          coarse_log[(l + 1) * d + i] = next;
        }
      }
      for (std::size_t n = 0; n <= n_steps; ++n) {
        // position n L / N on the coarse grid, kept in integer arithmetic
        const std::size_t scaled = n * coarse;
        const std::size_t l = scaled / n_steps;
        const std::size_t rem = scaled % n_steps;
        auto out = batch.state(j, n);
        if (rem == 0) {
          for (std::size_t i = 0; i < d; ++i) out[i] = coarse_log[l * d + i];
          continue;
        }
        const double frac = static_cast<double>(rem) / static_cast<double>(n_steps);
        const double elapsed = frac * h;
        for (std::size_t i = 0; i < d; ++i) {
          const double vol = coarse_vol[l * d + i];
          out[i] = coarse_log[l * d + i] + elapsed * (m.rate - m.dividend - 0.5 * vol * vol) +
                   frac * vol * coarse_dw[l * d + i];
        }
      }
    }
  });
  return batch;
}

// Cumulative Brownian path for the ratio model: index q = 0..N+window.
void ratio_brownian(const RatioPath& m, std::size_t n_steps, double dt, const RngStream& rng,
                    std::size_t path, std::vector<double>& w) {
  w.assign(n_steps + m.window + 1, 0.0);
  std::normal_distribution<double> normal;
  auto pre = rng.engine(path, StreamTag::kPreHistory);
  const double sd = std::sqrt(dt);
  for (std::size_t q = 1; q <= m.window; ++q) w[q] = w[q - 1] + sd * normal(pre);
  auto main = rng.engine(path, StreamTag::kBrownian);
  for (std::size_t q = m.window + 1; q < w.size(); ++q) w[q] = w[q - 1] + sd * normal(main);
}

double uniform_dt(const TimeGrid& grid, const char* who) {
  const double dt = grid.maturity / static_cast<double>(grid.steps);
  for (std::size_t n = 0; n < grid.steps; ++n) {
    if (std::abs(grid.dt(n) - dt) > 1e-9 * dt) {
      throw InvalidArgument(std::string(who) + ": requires an equidistant grid");
    }
  }
  return dt;
}

PathBatch simulate_ratio(const RatioPath& m, const TimeGrid& grid, std::size_t paths,
                         const RngStream& rng, std::size_t first_path) {
  if (m.window == 0) throw InvalidArgument("ratio path: window must be positive");
  const std::size_t n_steps = grid.steps;
  const double dt = uniform_dt(grid, "ratio path");
  const double c = (m.rate - 0.5 * m.vol * m.vol) * dt;
  const std::size_t w_len = m.window;
  PathBatch batch(paths, n_steps + 1, w_len);
  parallel_for(paths, [&](std::size_t begin, std::size_t end) {
    std::vector<double> w;
    for (std::size_t j = begin; j < end; ++j) {
      ratio_brownian(m, n_steps, dt, rng, first_path + j, w);
      for (std::size_t n = 0; n <= n_steps; ++n) {
        auto out = batch.state(j, n);
        for (std::size_t k = 1; k <= w_len; ++k) {
          const double v = std::exp(c * static_cast<double>(k) + m.vol * (w[n + k] - w[n]));
          check_finite(v, n, first_path + j, "non-finite ratio state");
          out[k - 1] = v;
        }
      }
    }
  });
  return batch;
}

}  // namespace

std::size_t model_dimension(const ModelSpec& model) { return std::visit(DimensionVisitor{}, model); }

PathBatch::PathBatch(std::size_t paths, std::size_t times, std::size_t dim)
    : paths_(paths), times_(times), dim_(dim), data_(paths * times * dim, 0.0) {}

PathBatch brownian_increments(const TimeGrid& grid, std::size_t paths, std::size_t dim,
                              const RngStream& rng, std::size_t first_path) {
  PathBatch inc(paths, grid.steps, dim);
  parallel_for(paths, [&](std::size_t begin, std::size_t end) {
    std::normal_distribution<double> normal;
    for (std::size_t j = begin; j < end; ++j) {
      auto engine = rng.engine(first_path + j);
      normal.reset();
      for (std::size_t n = 0; n < grid.steps; ++n) {
        const double sd = std::sqrt(grid.dt(n));
        for (double& v : inc.state(j, n)) v = sd * normal(engine);
      }
    }
  });
  return inc;
}

PathBatch simulate_from_increments(const ModelSpec& model, const TimeGrid& grid,
                                   const PathBatch& inc) {
  const std::size_t d = model_dimension(model);
  if (inc.dim() != d) {
    throw InvalidArgument("simulate: increments have dimension " + std::to_string(inc.dim()) +
                          ", model has " + std::to_string(d));
  }
  if (inc.times() != grid.steps) throw InvalidArgument("simulate: increments do not match the grid");
  const std::size_t paths = inc.paths();
  PathBatch batch(paths, grid.steps + 1, d);

  if (const auto* bm = std::get_if<BrownianScaled>(&model)) {
    check_loadings(bm->loadings, d, "brownian model");
    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
      for (std::size_t j = begin; j < end; ++j) {
        w.setZero();
        for (std::size_t n = 0; n < grid.steps; ++n) {
          auto dw = inc.state(j, n);
          for (std::size_t i = 0; i < d; ++i) w[static_cast<Eigen::Index>(i)] += dw[i];
          Eigen::Map<Eigen::VectorXd> out(batch.state(j, n + 1).data(), static_cast<Eigen::Index>(d));
          if (bm->loadings.size()) out.noalias() = bm->loadings * w;
          else out = w;
        }
      }
    });
    return batch;
  }

  if (const auto* gbm = std::get_if<GbmExact>(&model)) {
    if (gbm->drift.size() != d || gbm->vol.size() != d) {
      throw InvalidArgument("gbm: initial, drift and vol must all have dimension " + std::to_string(d));
    }
    check_loadings(gbm->loadings, d, "gbm");
    Eigen::VectorXd base(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
      const double norm2 = gbm->loadings.size() ? gbm->loadings.row(static_cast<Eigen::Index>(i)).squaredNorm() : 1.0;
      base[static_cast<Eigen::Index>(i)] = gbm->drift[i] - 0.5 * gbm->vol[i] * gbm->vol[i] * norm2;
    }
    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
      Eigen::VectorXd mixed(static_cast<Eigen::Index>(d));
      for (std::size_t j = begin; j < end; ++j) {
        w.setZero();
        auto x0 = batch.state(j, 0);
        for (std::size_t i = 0; i < d; ++i) x0[i] = gbm->initial[i];
        for (std::size_t n = 0; n < grid.steps; ++n) {
          auto dw = inc.state(j, n);
          for (std::size_t i = 0; i < d; ++i) w[static_cast<Eigen::Index>(i)] += dw[i];
          if (gbm->loadings.size()) mixed.noalias() = gbm->loadings * w;
          else mixed = w;
          const double t = grid.points[n + 1];
          auto out = batch.state(j, n + 1);
          for (std::size_t i = 0; i < d; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            const double v = gbm->initial[i] * std::exp(base[k] * t + gbm->vol[i] * mixed[k]);
            check_finite(v, n + 1, j, "non-finite gbm state");
            out[i] = v;
          }
        }
      }
    });
    return batch;
  }

  if (const auto* sde = std::get_if<EulerSde>(&model)) {
    if (!sde->drift || !sde->diffusion) throw InvalidArgument("euler: drift and diffusion are required");
    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
      std::vector<double> mu(d), sigma(d * d);
      for (std::size_t j = begin; j < end; ++j) {
        auto x0 = batch.state(j, 0);
        for (std::size_t i = 0; i < d; ++i) x0[i] = sde->initial[i];
        for (std::size_t n = 0; n < grid.steps; ++n) {
          auto x = batch.state(j, n);
          sde->drift(x, mu);
          sde->diffusion(x, sigma);
          const double dt = grid.dt(n);
          auto dw = inc.state(j, n);
          auto out = batch.state(j, n + 1);
          for (std::size_t i = 0; i < d; ++i) {
            check_finite(mu[i], n, j, "non-finite drift");
            double v = x[i] + mu[i] * dt;
            for (std::size_t k = 0; k < d; ++k) {
              check_finite(sigma[i * d + k], n, j, "non-finite diffusion");
              v += sigma[i * d + k] * dw[k];
            }
            out[i] = v;
          }
        }
      }
    });
    return batch;
  }

  throw InvalidArgument("simulate_from_increments: model kind is not increment driven");
}

PathBatch simulate_paths(const ModelSpec& model, const TimeGrid& grid, std::size_t paths,
                         const RngStream& rng, std::size_t first_path) {
  if (paths == 0) throw InvalidArgument("simulate_paths: batch size must be at least 1");
  if (grid.points.size() != grid.steps + 1) throw InvalidArgument("simulate_paths: malformed grid");
  if (const auto* dup = std::get_if<DupireLogEuler>(&model)) {
    return simulate_dupire(*dup, grid, paths, rng, first_path);
  }
  if (const auto* ratio = std::get_if<RatioPath>(&model)) {
    return simulate_ratio(*ratio, grid, paths, rng, first_path);
  }
  const std::size_t d = model_dimension(model);
  if (const auto* sde = std::get_if<EulerSde>(&model); sde && sde->initial.empty()) {
    throw InvalidArgument("euler: empty initial value");
  }
  PathBatch batch = simulate_from_increments(model, grid, brownian_increments(grid, paths, d, rng, first_path));
  return batch;
}

Eigen::MatrixXd simulate_ratio_underlying(const RatioPath& model, const TimeGrid& grid,
                                          std::size_t paths, const RngStream& rng,
                                          std::size_t first_path) {
  const double dt = uniform_dt(grid, "ratio path");
  const std::size_t len = grid.steps + model.window + 1;
  Eigen::MatrixXd s(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(len));
  std::vector<double> w;
  const double c = model.rate - 0.5 * model.vol * model.vol;
  for (std::size_t j = 0; j < paths; ++j) {
    ratio_brownian(model, grid.steps, dt, rng, first_path + j, w);
    for (std::size_t q = 0; q < len; ++q) {
      s(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(q)) =
          model.initial * std::exp(c * dt * static_cast<double>(q) + model.vol * w[q]);
    }
  }
  return s;
}

}  // namespace optstop
