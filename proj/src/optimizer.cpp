#include "optstop/optimizer.hpp"

#include "optstop/error.hpp"

#include <boost/algorithm/string.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace optstop {

double PiecewiseSchedule::at(std::uint64_t m) const {
  for (const auto& [threshold, value] : segments) {
    if (m <= threshold) return value;
  }
  return terminal;
}

void PiecewiseSchedule::validate() const {
  for (std::size_t i = 1; i < segments.size(); ++i) {
    if (segments[i].first <= segments[i - 1].first) {
      throw InvalidArgument("schedule: thresholds must increase strictly (" + std::to_string(segments[i - 1].first) +
                            " then " + std::to_string(segments[i].first) + ")");
    }
  }
}

PiecewiseSchedule parse_schedule(std::string_view text) {
  std::vector<std::string> parts;
  const std::string copy(text);
  boost::split(parts, copy, boost::is_any_of(","));
  PiecewiseSchedule schedule;
  bool have_terminal = false;
  for (auto& raw : parts) {
    std::string part = boost::trim_copy(raw);
    if (part.empty()) throw InvalidArgument("schedule: empty segment in '" + copy + "'");
    if (have_terminal) throw InvalidArgument("schedule: 'else' must be the last segment in '" + copy + "'");
    const auto colon = part.find(':');
    std::string key = colon == std::string::npos ? std::string() : boost::trim_copy(part.substr(0, colon));
    std::string value = colon == std::string::npos ? part : boost::trim_copy(part.substr(colon + 1));
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw InvalidArgument("schedule: malformed value '" + value + "' in '" + copy + "'");
    }
    if (colon == std::string::npos || key == "else") {
      schedule.terminal = v;
      have_terminal = true;
      continue;
    }
    if (boost::starts_with(key, "upto_")) key = key.substr(5);
    std::uint64_t threshold = 0;
    try {
      std::size_t used = 0;
      threshold = std::stoull(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw InvalidArgument("schedule: malformed threshold '" + key + "' in '" + copy + "'");
    }
    schedule.segments.emplace_back(threshold, v);
  }
  if (!have_terminal) throw InvalidArgument("schedule: missing terminal 'else:' segment in '" + copy + "'");
  schedule.validate();
  return schedule;
}

std::string format_schedule(const PiecewiseSchedule& schedule) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  for (const auto& [threshold, value] : schedule.segments) out << "upto_" << threshold << ':' << num(value) << ", ";
  out << "else:" << num(schedule.terminal);
  return out.str();
}

void AdamConfig::validate() const {
  if (!(zeta1 >= 0.0 && zeta1 < 1.0) || !(zeta2 >= 0.0 && zeta2 < 1.0)) {
    throw InvalidArgument("adam: decay factors must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw InvalidArgument("adam: eps must be positive");
  rate.validate();
}

double schedule_rate(const AdamConfig& cfg, std::uint64_t m) { return cfg.rate.at(m); }

void adam_step(AdamState& state, std::span<const double> grad, const AdamConfig& cfg, std::span<double> increment) {
  if (state.first.size() != grad.size() || state.second.size() != grad.size() || increment.size() != grad.size()) {
    throw InvalidArgument("adam_step: state, gradient and increment sizes differ");
  }
  ++state.step;
  const double rate = schedule_rate(cfg, state.step);
  if (cfg.plain_sgd) {
    for (std::size_t i = 0; i < grad.size(); ++i) increment[i] = rate * grad[i];
    return;
  }
  const double m = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.zeta1, m);
  const double c2 = 1.0 - std::pow(cfg.zeta2, m);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    double& x = state.first[i];
    double& y = state.second[i];
    x = cfg.zeta1 * x + (1.0 - cfg.zeta1) * g;
    y = cfg.zeta2 * y + (1.0 - cfg.zeta2) * g * g;
    increment[i] = rate * (x / c1) / (std::sqrt(std::abs(y) / c2) + cfg.eps);
  }
}

}  // namespace optstop
