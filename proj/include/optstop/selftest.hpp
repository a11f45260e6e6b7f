#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace optstop {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Property suites behind the `selftest` subcommand: factor normalisation,
/// hard-stop rule equivalence, analytic vs finite-difference gradients,
/// stopping-time factorisation round trip and the low bias of trained prices
/// on small trees.
std::vector<SuiteResult> run_selftests(std::uint64_t seed, std::ostream* progress = nullptr);

}  // namespace optstop
