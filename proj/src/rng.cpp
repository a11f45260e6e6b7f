#include "optstop/rng.hpp"

#include "optstop/error.hpp"

#include <string>

namespace optstop {

DecompositionError::DecompositionError(std::size_t pivot, double value)
    : std::runtime_error("cholesky: matrix is not positive definite (pivot " +
                         std::to_string(pivot) + " = " + std::to_string(value) + ")"),
      pivot_(pivot),
      value_(value) {}

SimulationError::SimulationError(std::size_t step, std::size_t path, const std::string& what)
    : std::runtime_error("simulation: " + what + " at step " + std::to_string(step) +
                         ", path " + std::to_string(path)),
      step_(step),
      path_(path) {}

DivergenceError::DivergenceError(std::size_t step, const std::string& quantity, double value)
    : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + quantity +
                         " = " + std::to_string(value)),
      step_(step),
      quantity_(quantity) {}

AdaptednessError::AdaptednessError(std::size_t step, std::size_t first_path,
                                   std::size_t second_path)
    : std::runtime_error("stopping time is not adapted: paths " + std::to_string(first_path) +
                         " and " + std::to_string(second_path) + " share the prefix up to step " +
                         std::to_string(step) + " but disagree on {tau = " +
                         std::to_string(step) + "}") {}

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

PhiloxEngine::PhiloxEngine(std::uint64_t seed, std::uint64_t step, std::uint64_t path,
                           StreamTag tag)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0u, static_cast<std::uint32_t>(path),
               static_cast<std::uint32_t>(step),
               (static_cast<std::uint32_t>(tag) << 24) ^ static_cast<std::uint32_t>(path >> 32) ^
                   (static_cast<std::uint32_t>(step >> 32) << 12)} {}

PhiloxEngine::result_type PhiloxEngine::operator()() {
  if (position_ == 4) {
    buffer_ = philox4x32(counter_, key_);
    ++counter_[0];
    position_ = 0;
  }
  return buffer_[position_++];
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finaliser over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace optstop
