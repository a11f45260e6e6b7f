#include "optstop/payoffs.hpp"

#include "optstop/error.hpp"
#include "optstop/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace optstop {

namespace {

std::size_t expected_dim(const PayoffSpec& spec) {
  return std::visit([](const auto& p) { return p.dim; }, spec);
}

double positive(double v) { return v > 0.0 ? v : 0.0; }

double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// prod |x_k|^e evaluated in log space
double power_product(std::span<const double> x, double e) {
  double log_sum = 0.0;
  for (double v : x) log_sum += std::log(std::abs(v));
  return std::exp(e * log_sum);
}

struct Evaluator {
  double s;
  std::span<const double> x;

  double operator()(const BmPutType& p) const {
    const double d = static_cast<double>(x.size());
    const double scale = p.scaling == BrownianScaling::kTenOverDim
                             ? p.vol * std::sqrt(10.0) / std::sqrt(d * (d + 9.0))
                             : p.vol / std::sqrt(d);
    double sum = 0.0;
    for (double v : x) sum += v;
    const double spot = std::exp((p.rate - 0.5 * p.vol * p.vol) * s + scale * sum) * p.chi;
    return std::exp(-p.rate * s) * positive(p.strike - spot);
  }
  double operator()(const GeometricPut& p) const {
    const double e = 1.0 / std::sqrt(static_cast<double>(x.size()));
    return std::exp(-p.rate * s) * positive(p.strike - power_product(x, e));
  }
  double operator()(const GeometricCall& p) const {
    const double e = 1.0 / static_cast<double>(x.size());
    return std::exp(-p.rate * s) * positive(power_product(x, e) - p.strike);
  }
  double operator()(const MaxCall& p) const {
    const double top = *std::max_element(x.begin(), x.end());
    return std::exp(-p.rate * s) * positive(top - p.strike);
  }
  double operator()(const StrangleSpread& p) const {
    const double b = mean(x);
    const auto& k = p.strikes;
    const double legs = -positive(k[0] - b) + positive(k[1] - b) + positive(b - k[2]) - positive(b - k[3]);
    return std::exp(-p.rate * s) * legs;
  }
  double operator()(const BasketPutOnExpLog& p) const {
    double sum = 0.0;
    for (double v : x) sum += std::exp(v);
    return std::exp(-p.rate * s) * positive(p.strike - sum / static_cast<double>(x.size()));
  }
  double operator()(const RatioLast& p) const { return std::exp(-p.rate * s) * x.back(); }
};

}  // namespace

void validate_payoff(const PayoffSpec& spec) {
  if (!std::isfinite(payoff_rate(spec))) throw InvalidArgument("payoff: rate must be finite");
  if (const auto* st = std::get_if<StrangleSpread>(&spec)) {
    const auto& k = st->strikes;
    for (double v : k) {
      if (!std::isfinite(v)) throw InvalidArgument("strangle spread: strikes must be finite");
    }
    if (!(k[0] < k[1] && k[1] < k[2] && k[2] < k[3])) {
      throw InvalidArgument("strangle spread: strikes must satisfy K1 < K2 < K3 < K4");
    }
  }
  if (const auto* bm = std::get_if<BmPutType>(&spec)) {
    if (!std::isfinite(bm->vol) || !std::isfinite(bm->chi) || !std::isfinite(bm->strike)) {
      throw InvalidArgument("brownian put: parameters must be finite");
    }
  }
}

double eval_payoff(const PayoffSpec& spec, double s, std::span<const double> x) {
  const std::size_t dim = expected_dim(spec);
  if (x.empty() || (dim != 0 && x.size() != dim)) {
    throw InvalidArgument("payoff: state has dimension " + std::to_string(x.size()) +
                          ", payoff expects " + std::to_string(dim));
  }
  return std::visit(Evaluator{s, x}, spec);
}

double payoff_rate(const PayoffSpec& spec) {
  return std::visit([](const auto& p) { return p.rate; }, spec);
}

PayoffSpec undiscounted(const PayoffSpec& spec) {
  return std::visit(
      [](auto p) -> PayoffSpec {
        p.rate = 0.0;
        return p;
      },
      spec);
}

Eigen::MatrixXd payoff_along_paths(const PayoffSpec& spec, const TimeGrid& grid, const PathBatch& batch) {
  if (batch.times() != grid.points.size()) {
    throw InvalidArgument("payoff_along_paths: batch has " + std::to_string(batch.times()) +
                          " time points, grid has " + std::to_string(grid.points.size()));
  }
  const auto paths = static_cast<Eigen::Index>(batch.paths());
  const auto times = static_cast<Eigen::Index>(batch.times());
  Eigen::MatrixXd g(paths, times);
  parallel_for(batch.paths(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      for (std::size_t n = 0; n < batch.times(); ++n) {
        g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) =
            eval_payoff(spec, grid.points[n], batch.state(j, n));
      }
    }
  });
  return g;
}

}  // namespace optstop
