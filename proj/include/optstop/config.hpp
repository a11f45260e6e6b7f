#pragma once

#include "optstop/optimizer.hpp"
#include "optstop/paths.hpp"
#include "optstop/payoffs.hpp"
#include "optstop/stopnet.hpp"
#include "optstop/training.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace optstop {

// Sectioned key = value document (INI, ';' comments):
//
//   name = max_call_d5
//   seed = 1
//   [model]       kind = brownian | gbm | dupire | ratio, plus kind keys
//   [payoff]      kind = bm_put | geometric_put | geometric_call | max_call |
//                        strangle_spread | basket_put_exp | ratio_last
//   [grid]        T, N
//   [network]     hidden1, hidden2, bn_input, bn_hidden, bn_output, bn_eps,
//                 bn_momentum, step0 = trainable | frozen
//   [training]    M, J_m, gamma, zeta1, zeta2, eps, optimizer = adam | sgd,
//                 keep_best, log_every
//   [evaluation]  J0, repeats, chunk
//
// Lists are comma separated; matrix rows are separated by ';'.

struct ModelSection {
  std::string kind;
  std::size_t dim = 0;
  std::vector<double> spot;      // one entry broadcasts
  std::vector<double> drift;     // gbm: per-asset drift
  std::vector<double> vol;       // gbm: per-asset volatility
  double rate = 0.0;             // dupire, ratio
  double dividend = 0.0;         // dupire
  double correlation = 0.0;      // equicorrelation of the driving noise
  std::string orientation = "factor_adjoint";  // or adjoint_factor
  std::vector<std::vector<double>> factor;     // explicit loadings, rows per asset
  std::size_t coarse_steps = 10;               // dupire
  double lv_level = 0.6;                       // dupire local volatility
  double lv_decay = 0.05;
  double lv_bump = 1.2;
  double lv_time_decay = 0.1;
  double lv_width = 0.001;
  std::size_t window = 100;                    // ratio

  bool operator==(const ModelSection&) const = default;
};

struct PayoffSection {
  std::string kind;
  double rate = 0.0;
  double strike = 0.0;
  double vol = 0.0;   // bm_put
  double chi = 0.0;   // bm_put
  std::string scaling = "inverse_sqrt";  // bm_put: or ten_over_dim
  std::vector<double> strikes;           // strangle_spread

  bool operator==(const PayoffSection&) const = default;
};

struct NetworkSection {
  std::size_t hidden1 = 0;  // 0 before defaults are filled: d + 40
  std::size_t hidden2 = 0;
  bool bn_input = true;
  bool bn_hidden = true;
  bool bn_output = true;
  double bn_eps = 1e-6;
  double bn_momentum = 0.99;
  bool step0_trainable = true;

  bool operator==(const NetworkSection&) const = default;
};

struct TrainingSection {
  std::uint64_t steps = 0;
  PiecewiseSchedule batch = PiecewiseSchedule::constant(8192);
  PiecewiseSchedule rate = PiecewiseSchedule::constant(1e-3);
  double zeta1 = 0.9;
  double zeta2 = 0.999;
  double eps = 1e-8;
  bool plain_sgd = false;
  bool keep_best = false;
  std::uint64_t log_every = 1;

  bool operator==(const TrainingSection&) const = default;
};

struct EvaluationSection {
  std::size_t paths = 1 << 18;
  std::size_t repeats = 1;
  std::size_t chunk = 1 << 14;

  bool operator==(const EvaluationSection&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::string output = "out";
  ModelSection model;
  PayoffSection payoff;
  double maturity = 0.0;
  std::size_t steps = 0;
  NetworkSection network;
  TrainingSection training;
  EvaluationSection evaluation;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates, filling defaults (hidden widths d + 40, spot
/// broadcast to d entries). Throws ConfigError naming unknown keys, missing
/// required keys or malformed values.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Re-validates an in-memory config and fills its defaults.
void finalize_config(ExperimentConfig& cfg);

/// Canonical text with every field explicit; parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& cfg);

/// Engine objects described by a finalized config.
ModelSpec build_model(const ExperimentConfig& cfg);
PayoffSpec build_payoff(const ExperimentConfig& cfg);
TimeGrid build_grid(const ExperimentConfig& cfg);
NetworkLayout build_layout(const ExperimentConfig& cfg);
TrainRunConfig build_run(const ExperimentConfig& cfg);

}  // namespace optstop
