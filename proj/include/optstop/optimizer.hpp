#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace optstop {

/// Piecewise-constant sequence in the training step m >= 1: the value of the
/// first segment whose threshold is >= m, else `terminal`.
/// Text form: "upto_100:0.05, upto_300:0.005, else:0.0005".
struct PiecewiseSchedule {
  std::vector<std::pair<std::uint64_t, double>> segments;
  double terminal = 0.0;

  static PiecewiseSchedule constant(double v) { return {{}, v}; }
  double at(std::uint64_t m) const;
  /// Throws InvalidArgument unless thresholds increase strictly.
  void validate() const;

  bool operator==(const PiecewiseSchedule&) const = default;
};

/// Parses the text form. A bare "150:8192" means "upto_150:8192".
PiecewiseSchedule parse_schedule(std::string_view text);
std::string format_schedule(const PiecewiseSchedule& schedule);

struct AdamConfig {
  double zeta1 = 0.9;
  double zeta2 = 0.999;
  double eps = 1e-8;
  PiecewiseSchedule rate = PiecewiseSchedule::constant(1e-3);
  bool plain_sgd = false;  // increment = rate * gradient

  void validate() const;
  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  std::vector<double> first;
  std::vector<double> second;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t size) : first(size, 0.0), second(size, 0.0) {}
};

double schedule_rate(const AdamConfig& cfg, std::uint64_t m);

/// Advances the counter, updates the moments with `grad` and writes the
/// ascent increment (to be added to the parameters) into `increment`.
void adam_step(AdamState& state, std::span<const double> grad, const AdamConfig& cfg,
               std::span<double> increment);

}  // namespace optstop
