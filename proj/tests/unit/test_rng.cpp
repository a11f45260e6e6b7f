#include "optstop/parallel.hpp"
#include "optstop/rng.hpp"

#include <doctest.h>

#include <atomic>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

using namespace optstop;

TEST_CASE("philox4x32-10 known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("same substream, same draws") {
  PhiloxEngine a(7, 3, 11);
  PhiloxEngine b(7, 3, 11);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
}

TEST_CASE("substreams differ in every coordinate") {
  auto first = [](PhiloxEngine e) {
    std::vector<std::uint32_t> v;
    for (int i = 0; i < 8; ++i) v.push_back(e());
    return v;
  };
  const auto base = first(PhiloxEngine(1, 2, 3, StreamTag::kBrownian));
  CHECK(base != first(PhiloxEngine(2, 2, 3, StreamTag::kBrownian)));
  CHECK(base != first(PhiloxEngine(1, 3, 3, StreamTag::kBrownian)));
  CHECK(base != first(PhiloxEngine(1, 2, 4, StreamTag::kBrownian)));
  CHECK(base != first(PhiloxEngine(1, 2, 3, StreamTag::kPreHistory)));
  // high bits of path and step must not alias
  CHECK(first(PhiloxEngine(1, 0, 1ull << 32)) != first(PhiloxEngine(1, 0, 0)));
  CHECK(first(PhiloxEngine(1, 1ull << 32, 0)) != first(PhiloxEngine(1, 0, 0)));
}

TEST_CASE("engine plugs into <random> and looks uniform") {
  PhiloxEngine e(42, 0, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = u(e);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sum2 / n - mean * mean == doctest::Approx(1.0 / 12.0).epsilon(0.01));
}

TEST_CASE("derived seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 1000; ++r) seen.insert(derive_seed(5, r));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(5, 1) == derive_seed(5, 1));
}

TEST_CASE("parallel_for covers the range once and rethrows") {
  set_thread_count(4);
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) hits[i]++;
  });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(100, [](std::size_t b, std::size_t) {
                    if (b == 0) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  set_thread_count(1);
}
