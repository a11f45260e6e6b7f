#include "optstop/error.hpp"
#include "optstop/payoffs.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace optstop;

namespace {
double at(const PayoffSpec& p, double s, std::vector<double> x) { return eval_payoff(p, s, x); }
}  // namespace

TEST_CASE("hand evaluations") {
  CHECK(at(MaxCall{0.05, 100.0, 0}, 0.0, {110, 90}) == doctest::Approx(10.0));
  StrangleSpread ss{0.05, {75, 90, 110, 125}, 0};
  CHECK(at(ss, 0.0, {100, 100, 100, 100, 100}) == 0.0);
  CHECK(at(ss, 0.0, {80, 80, 80, 80, 80}) == doctest::Approx(10.0));
  CHECK(at(ss, 0.0, {60, 100, 80, 70, 90}) == doctest::Approx(10.0));
  CHECK(at(ss, 0.0, {140, 140, 140, 140, 140}) == doctest::Approx(15.0));
  CHECK(at(GeometricCall{0.0, 95.0, 2}, 0.0, {100, 100}) == doctest::Approx(5.0));
  CHECK(at(GeometricPut{0.0, 95.0, 4}, 0.0, {10, 10, 10, 10}) == 0.0);
  // prod |x|^{1/sqrt d} with d = 4: (10^4)^{1/2} = 100
  CHECK(at(GeometricPut{0.0, 120.0, 4}, 0.0, {10, 10, 10, 10}) == doctest::Approx(20.0));
  CHECK(at(BmPutType{0.02, 0.3, 95.0, 90.0, BrownianScaling::kTenOverDim, 1}, 0.0, {0.0}) == 0.0);
  CHECK(at(BmPutType{0.06, 0.4, 40.0, 40.0, BrownianScaling::kInverseSqrt, 1}, 0.0, {0.0}) == 0.0);
  // x = -1, d = 1: 40 - 40 e^{-0.4}
  CHECK(at(BmPutType{0.06, 0.4, 40.0, 40.0, BrownianScaling::kInverseSqrt, 1}, 0.0, {-1.0}) ==
        doctest::Approx(40.0 - 40.0 * std::exp(-0.4)));
  // two-exercise scaling beta sqrt(10) / sqrt(d (d + 9)) equals beta at d = 1
  CHECK(at(BmPutType{0.0, 0.3, 95.0, 90.0, BrownianScaling::kTenOverDim, 1}, 0.0, {-1.0}) ==
        doctest::Approx(90.0 - 95.0 * std::exp(-0.3)));
  CHECK(at(BasketPutOnExpLog{0.0, 100.0, 2}, 0.0, {std::log(80.0), std::log(100.0)}) == doctest::Approx(10.0));
  CHECK(at(RatioLast{0.0, 3}, 0.0, {1.1, 1.2, 1.3}) == 1.3);
}

TEST_CASE("discount consistency") {
  const std::vector<PayoffSpec> specs = {
      MaxCall{0.05, 100.0, 0},          GeometricCall{0.03, 1.0, 0},        GeometricPut{0.6, 95.0, 0},
      StrangleSpread{0.05, {75, 90, 110, 125}, 0}, BasketPutOnExpLog{0.05, 100.0, 0}, RatioLast{0.0004, 0},
  };
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> price(50.0, 150.0);
  for (const auto& spec : specs) {
    const bool logs = std::holds_alternative<BasketPutOnExpLog>(spec);
    const bool ratio = std::holds_alternative<RatioLast>(spec);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> x(4);
      for (double& v : x) v = logs ? std::log(price(gen)) : ratio ? price(gen) / 100.0 : price(gen);
      const double s = 0.1 * trial;
      const double discounted = eval_payoff(spec, s, x);
      const double raw = eval_payoff(undiscounted(spec), s, x);
      CHECK(discounted == doctest::Approx(std::exp(-payoff_rate(spec) * s) * raw).epsilon(1e-14));
    }
  }
}

TEST_CASE("payoffs are non-negative") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> price(0.0, 200.0);
  const std::vector<PayoffSpec> specs = {MaxCall{0.05, 100.0, 0}, GeometricCall{0.0, 95.0, 0},
                                         GeometricPut{0.0, 95.0, 0}, StrangleSpread{0.05, {75, 90, 110, 125}, 0},
                                         BmPutType{0.06, 0.4, 40, 40, BrownianScaling::kInverseSqrt, 0}};
  for (int trial = 0; trial < 20000; ++trial) {
    std::vector<double> x(5);
    for (double& v : x) v = price(gen) - (trial % 2 ? 100.0 : 0.0);
    for (const auto& spec : specs) CHECK(eval_payoff(spec, 0.5, x) >= 0.0);
  }
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(validate_payoff(StrangleSpread{0.05, {75, 110, 90, 125}, 0}), InvalidArgument);
  CHECK_THROWS_AS(validate_payoff(MaxCall{NAN, 100.0, 0}), InvalidArgument);
  CHECK_THROWS_AS(at(MaxCall{0.0, 100.0, 3}, 0.0, {1.0, 2.0}), InvalidArgument);
}

TEST_CASE("payoff matrices along paths") {
  const TimeGrid grid = make_grid(1.0, 2);
  PathBatch batch(2, 3, 2);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t i = 0; i < 2; ++i) batch.at(j, n, i) = 100.0;
  CHECK(payoff_along_paths(MaxCall{0.05, 100.0, 2}, grid, batch).isZero());

  PathBatch ratio(1, 2, 100);
  for (std::size_t i = 0; i < 100; ++i) {
    ratio.at(0, 0, i) = 1.0 + 0.001 * static_cast<double>(i);
    ratio.at(0, 1, i) = 2.0 - 0.001 * static_cast<double>(i);
  }
  const Eigen::MatrixXd g = payoff_along_paths(RatioLast{0.0, 100}, make_grid(1.0, 1), ratio);
  CHECK(g(0, 0) == ratio.at(0, 0, 99));
  CHECK(g(0, 1) == ratio.at(0, 1, 99));
}
