#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace optstop {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3").
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Logical stream a draw belongs to. Distinct tags never share counters.
enum class StreamTag : std::uint32_t {
  kBrownian = 0,
  kPreHistory = 1,
  kInitialization = 2,
  kAuxiliary = 3,
};

/// Counter-based engine for a single substream. Satisfies
/// UniformRandomBitGenerator, so it plugs into <random> distributions.
///
/// The counter is (block, path, step, tag); the key is the 64-bit seed.
/// Two engines built from the same (seed, step, path, tag) produce the same
/// sequence no matter which thread owns them.
class PhiloxEngine {
 public:
  using result_type = std::uint32_t;

  PhiloxEngine(std::uint64_t seed, std::uint64_t step, std::uint64_t path,
               StreamTag tag = StreamTag::kBrownian);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned position_ = 4;
};

/// Seed plus training step; paths pick their own substream inside it.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;

  PhiloxEngine engine(std::uint64_t path, StreamTag tag = StreamTag::kBrownian) const {
    return PhiloxEngine(seed, step, path, tag);
  }
};

/// Derives an independent seed (e.g. for repeat r of an experiment).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace optstop
