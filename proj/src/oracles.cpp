#include "optstop/oracles.hpp"

#include "optstop/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace optstop {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double bs_euro_call(const Bs1dParams& p) {
  if (!(p.maturity > 0.0) || !(p.spot > 0.0) || !(p.vol > 0.0)) {
    throw InvalidArgument("bs_euro_call: maturity, spot and volatility must be positive");
  }
  const double t = p.maturity;
  const double div = std::exp(-p.carry * t);
  const double disc = std::exp(-p.rate * t);
  if (p.strike <= 0.0) return div * p.spot - p.strike * disc;
  const double sd = p.vol * std::sqrt(t);
  const double d_plus = ((p.rate - p.carry + 0.5 * p.vol * p.vol) * t + std::log(p.spot / p.strike)) / sd;
  const double d_minus = d_plus - sd;
  return div * p.spot * normal_cdf(d_plus) - p.strike * disc * normal_cdf(d_minus);
}

double binomial_american(const Bs1dParams& p, Exercise kind, std::size_t steps, bool american) {
  if (steps < 1) throw InvalidArgument("binomial_american: need at least one step");
  if (!(p.maturity > 0.0) || !(p.spot > 0.0) || !(p.vol > 0.0)) {
    throw InvalidArgument("binomial_american: maturity, spot and volatility must be positive");
  }
  const double dt = p.maturity / static_cast<double>(steps);
  const double up = std::exp(p.vol * std::sqrt(dt));
  const double down = 1.0 / up;
  const double prob = (std::exp((p.rate - p.carry) * dt) - down) / (up - down);
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw InvalidArgument("binomial_american: risk-neutral probability " + std::to_string(prob) +
                          " outside [0, 1]; use more steps");
  }
  const double disc = std::exp(-p.rate * dt);
  const double pu = disc * prob;
  const double pd = disc * (1.0 - prob);
  auto exercise = [&](double s) { return kind == Exercise::kPut ? std::max(p.strike - s, 0.0) : std::max(s - p.strike, 0.0); };

  std::vector<double> values(steps + 1);
  std::vector<double> prices(steps + 1);
  const double log_up = std::log(up);
  for (std::size_t k = 0; k <= steps; ++k) {
    prices[k] = p.spot * std::exp(log_up * (2.0 * static_cast<double>(k) - static_cast<double>(steps)));
    values[k] = exercise(prices[k]);
  }
  for (std::size_t n = steps; n-- > 0;) {
    for (std::size_t k = 0; k <= n; ++k) {
      const double cont = pd * values[k] + pu * values[k + 1];
      if (american) {
        prices[k] *= up;  // node (n, k) sits one up-move above node (n + 1, k)
        values[k] = std::max(cont, exercise(prices[k]));
      } else {
        values[k] = cont;
      }
    }
  }
  return values[0];
}

ReducedModel reduce_dimension(double eps, const std::vector<double>& alpha, const std::vector<double>& beta,
                              const Eigen::MatrixXd& loadings, const std::vector<double>& initial) {
  const std::size_t d = alpha.size();
  if (beta.size() != d || initial.size() != d) {
    throw InvalidArgument("reduce_dimension: alpha, beta and initial must have the same dimension");
  }
  if (loadings.size() && (static_cast<std::size_t>(loadings.rows()) != d || loadings.rows() != loadings.cols())) {
    throw InvalidArgument("reduce_dimension: loadings must be " + std::to_string(d) + " x " + std::to_string(d));
  }
  const auto dd = static_cast<Eigen::Index>(d);
  const Eigen::MatrixXd f = loadings.size() ? loadings : Eigen::MatrixXd::Identity(dd, dd);
  const Eigen::Map<const Eigen::VectorXd> b(beta.data(), dd);
  // sum_i beta_i f_i, the combined loading of the product
  const Eigen::VectorXd combined = f.transpose() * b;
  double drift = 0.0;
  double log_initial = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    drift += alpha[i] - 0.5 * beta[i] * beta[i] * f.row(k).squaredNorm();
    log_initial += std::log(std::abs(initial[i]));
  }
  ReducedModel out;
  out.initial = std::exp(eps * log_initial);
  out.vol = std::abs(eps) * combined.norm();
  out.drift = eps * drift + 0.5 * out.vol * out.vol;
  return out;
}

void Lattice::validate() const {
  if (layers.empty() || layers[0].size() != 1) throw InvalidArgument("lattice: layer 0 must hold exactly the root");
  if (depth() > 12) throw InvalidArgument("lattice: depth " + std::to_string(depth()) + " exceeds 12");
  for (std::size_t n = 0; n < layers.size(); ++n) {
    for (std::size_t k = 0; k < layers[n].size(); ++k) {
      const LatticeNode& node = layers[n][k];
      const std::string where = " at node (" + std::to_string(n) + ", " + std::to_string(k) + ")";
      if (n + 1 == layers.size()) {
        if (!node.children.empty()) throw InvalidArgument("lattice: terminal node has children" + where);
        continue;
      }
      if (node.children.empty() || node.children.size() > 3) {
        throw InvalidArgument("lattice: branching must be 1..3" + where);
      }
      if (node.probs.size() != node.children.size()) throw InvalidArgument("lattice: one probability per child" + where);
      double total = 0.0;
      for (std::size_t c = 0; c < node.children.size(); ++c) {
        if (node.children[c] >= layers[n + 1].size()) throw InvalidArgument("lattice: dangling child" + where);
        if (!(node.probs[c] >= 0.0)) throw InvalidArgument("lattice: negative probability" + where);
        total += node.probs[c];
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw InvalidArgument("lattice: probabilities sum to " + std::to_string(total) + where);
      }
    }
  }
}

SnellResult lattice_snell(const Lattice& lattice) {
  lattice.validate();
  const std::size_t depth = lattice.depth();
  SnellResult out;
  out.envelope.resize(depth + 1);
  out.stop.resize(depth + 1);
  for (std::size_t n = depth + 1; n-- > 0;) {
    const auto& layer = lattice.layers[n];
    out.envelope[n].resize(layer.size());
    out.stop[n].resize(layer.size());
    for (std::size_t k = 0; k < layer.size(); ++k) {
      const LatticeNode& node = layer[k];
      if (n == depth) {
        out.envelope[n][k] = node.payoff;
        out.stop[n][k] = true;
        continue;
      }
      double cont = 0.0;
      for (std::size_t c = 0; c < node.children.size(); ++c) cont += node.probs[c] * out.envelope[n + 1][node.children[c]];
      out.stop[n][k] = node.payoff >= cont;
      out.envelope[n][k] = std::max(node.payoff, cont);
    }
  }
  out.value = out.envelope[0][0];
  return out;
}

PathBatch simulate_lattice(const Lattice& lattice, std::size_t paths, const RngStream& rng, std::size_t first_path) {
  lattice.validate();
  const std::size_t depth = lattice.depth();
  PathBatch batch(paths, depth + 1, 1);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t j = 0; j < paths; ++j) {
    auto engine = rng.engine(first_path + j);
    std::size_t node = 0;
    batch.at(j, 0, 0) = 0.0;
    for (std::size_t n = 0; n < depth; ++n) {
      const LatticeNode& cur = lattice.layers[n][node];
      const double draw = uniform(engine);
      double acc = 0.0;
      std::size_t pick = cur.children.size() - 1;
      for (std::size_t c = 0; c + 1 < cur.children.size(); ++c) {
        acc += cur.probs[c];
        if (draw < acc) {
          pick = c;
          break;
        }
      }
      node = cur.children[pick];
      batch.at(j, n + 1, 0) = static_cast<double>(node);
    }
  }
  return batch;
}

Eigen::MatrixXd lattice_payoffs(const Lattice& lattice, const PathBatch& batch) {
  if (batch.times() != lattice.depth() + 1 || batch.dim() != 1) {
    throw InvalidArgument("lattice_payoffs: batch does not come from this lattice");
  }
  Eigen::MatrixXd g(static_cast<Eigen::Index>(batch.paths()), static_cast<Eigen::Index>(batch.times()));
  for (std::size_t j = 0; j < batch.paths(); ++j) {
    for (std::size_t n = 0; n < batch.times(); ++n) {
      const auto node = static_cast<std::size_t>(batch.at(j, n, 0));
      g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) = lattice.layers[n].at(node).payoff;
    }
  }
  return g;
}

}  // namespace optstop
