#include "optstop/error.hpp"
#include "optstop/parallel.hpp"
#include "optstop/paths.hpp"

#include <doctest.h>

#include <cmath>

using namespace optstop;

namespace {

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

template <typename F>
Moments moments(std::size_t n, F sample) {
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = sample(i);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = (sum2 - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

TEST_CASE("time grids") {
  const TimeGrid g = make_grid(1.0, 2);
  CHECK(g.points == std::vector<double>{0.0, 0.5, 1.0});
  const TimeGrid m = make_grid(3.0, 9);
  CHECK(m.points.back() == 3.0);
  CHECK(m.dt(0) == doctest::Approx(1.0 / 3.0));
  const TimeGrid s = make_grid(1.0, 48);
  CHECK(s.points.size() == 49);
  for (std::size_t n = 0; n < 48; ++n) CHECK(s.dt(n) == doctest::Approx(1.0 / 48.0));
  CHECK_THROWS_AS(make_grid(0.0, 3), InvalidArgument);
  CHECK_THROWS_AS(make_grid(1.0, 0), InvalidArgument);
}

TEST_CASE("cholesky factor") {
  CHECK(cholesky_factor(Eigen::MatrixXd::Identity(4, 4)).isApprox(Eigen::MatrixXd::Identity(4, 4)));
  Eigen::MatrixXd q(2, 2);
  q << 1.0, 0.5, 0.5, 1.0;
  const Eigen::MatrixXd f = cholesky_factor(q);
  CHECK(f(0, 0) == doctest::Approx(1.0));
  CHECK(f(0, 1) == 0.0);
  CHECK(f(1, 0) == doctest::Approx(0.5));
  CHECK(f(1, 1) == doctest::Approx(std::sqrt(0.75)));

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(cholesky_factor(bad), DecompositionError);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.2, 0.1, 1.0;
  CHECK_THROWS_AS(cholesky_factor(asym), InvalidArgument);
}

TEST_CASE("correlation specs reconstruct Q in both orientations") {
  for (auto o : {FactorOrientation::kFactorTimesAdjoint, FactorOrientation::kAdjointTimesFactor}) {
    for (double rho : {0.1, 0.5, 0.75}) {
      const CorrelationSpec spec = CorrelationSpec::equicorrelated(5, rho, o);
      CHECK((spec.reconstruct() - spec.correlation).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((spec.loadings * spec.loadings.transpose() - spec.correlation).cwiseAbs().maxCoeff() <= 1e-12);
      const Eigen::MatrixXd f = spec.factor();
      const Eigen::MatrixXd product =
          o == FactorOrientation::kFactorTimesAdjoint ? Eigen::MatrixXd(f * f.transpose()) : Eigen::MatrixXd(f.transpose() * f);
      CHECK((product - spec.correlation).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(2, 2) * 2.0;
  CHECK_THROWS_AS(CorrelationSpec::from_correlation(q, FactorOrientation::kFactorTimesAdjoint), InvalidArgument);
}

TEST_CASE("degenerate dynamics") {
  const TimeGrid grid = make_grid(1.0, 4);
  EulerSde still{{1.5, -2.0}, [](auto, auto out) { std::fill(out.begin(), out.end(), 0.0); },
                 [](auto, auto out) { std::fill(out.begin(), out.end(), 0.0); }};
  const PathBatch a = simulate_paths(still, grid, 3, RngStream{1, 1});
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t n = 0; n <= 4; ++n) {
      CHECK(a.at(j, n, 0) == 1.5);
      CHECK(a.at(j, n, 1) == -2.0);
    }

  GbmExact flat{{40.0, 50.0}, {0.03, -0.02}, {0.0, 0.0}, {}};
  const PathBatch b = simulate_paths(flat, grid, 2, RngStream{1, 1});
  for (std::size_t n = 0; n <= 4; ++n) {
    CHECK(b.at(1, n, 0) == doctest::Approx(40.0 * std::exp(0.03 * grid.points[n])));
    CHECK(b.at(1, n, 1) == doctest::Approx(50.0 * std::exp(-0.02 * grid.points[n])));
  }
}

TEST_CASE("gbm terminal mean matches the forward") {
  const TimeGrid grid = make_grid(1.0, 1);
  GbmExact gbm{{40.0}, {0.06}, {0.4}, {}};
  const std::size_t paths = 1000000;
  const PathBatch batch = simulate_paths(gbm, grid, paths, RngStream{11, 0});
  const Moments m = moments(paths, [&](std::size_t j) { return batch.at(j, 1, 0); });
  CHECK(std::abs(m.mean - 40.0 * std::exp(0.06)) <= 3.0 * m.se);
}

TEST_CASE("brownian increments have mean 0 and variance dt") {
  const TimeGrid grid = make_grid(2.0, 8);
  const std::size_t paths = 100000;
  const PathBatch inc = brownian_increments(grid, paths, 2, RngStream{5, 3});
  for (std::size_t n : {0u, 7u}) {
    const Moments m = moments(paths, [&](std::size_t j) { return inc.at(j, n, 1); });
    CHECK(std::abs(m.mean) <= 4.0 * m.se);
    const Moments sq = moments(paths, [&](std::size_t j) { return inc.at(j, n, 1) * inc.at(j, n, 1); });
    CHECK(std::abs(sq.mean - 0.25) <= 4.0 * sq.se);
  }
}

TEST_CASE("paths are reproducible across thread counts and chunking") {
  const TimeGrid grid = make_grid(3.0, 9);
  const ModelSpec models[] = {
      GbmExact{{100, 100, 100}, {-0.05, -0.05, -0.05}, {0.2, 0.2, 0.2}, {}},
      BrownianScaled{3, CorrelationSpec::equicorrelated(3, 0.1, FactorOrientation::kFactorTimesAdjoint).loadings},
      DupireLogEuler{{100, 100}, 0.05, 0.1, 3, [](double, double) { return 0.3; }},
      RatioPath{1.0, 0.0004, 0.02, 5},
  };
  for (const auto& model : models) {
    set_thread_count(1);
    const PathBatch one = simulate_paths(model, grid, 64, RngStream{9, 4});
    set_thread_count(8);
    const PathBatch eight = simulate_paths(model, grid, 64, RngStream{9, 4});
    const PathBatch tail = simulate_paths(model, grid, 32, RngStream{9, 4}, 32);
    set_thread_count(1);
    CHECK(std::equal(one.data().begin(), one.data().end(), eight.data().begin()));
    CHECK(std::equal(tail.data().begin(), tail.data().end(), one.data().begin() + one.data().size() / 2));
  }
}

TEST_CASE("euler converges weakly to the exact gbm on a shared brownian path") {
  const double mu = 0.5, sigma = 0.4;
  const std::size_t paths = 100000;
  const TimeGrid fine = make_grid(1.0, 32);
  const PathBatch fine_inc = brownian_increments(fine, paths, 1, RngStream{3, 0});
  auto error_on = [&](std::size_t steps) {
    const TimeGrid grid = make_grid(1.0, steps);
    const std::size_t ratio = 32 / steps;
    PathBatch inc(paths, steps, 1);
    for (std::size_t j = 0; j < paths; ++j)
      for (std::size_t n = 0; n < steps; ++n)
        for (std::size_t k = 0; k < ratio; ++k) inc.at(j, n, 0) += fine_inc.at(j, n * ratio + k, 0);
    EulerSde euler{{1.0}, [&](auto x, auto out) { out[0] = mu * x[0]; },
                   [&](auto x, auto out) { out[0] = sigma * x[0]; }};
    GbmExact exact{{1.0}, {mu}, {sigma}, {}};
    const PathBatch a = simulate_from_increments(euler, grid, inc);
    const PathBatch b = simulate_from_increments(exact, grid, inc);
    double worst = 0.0;
    for (std::size_t n = 0; n <= steps; ++n) {
      double diff = 0.0;
      for (std::size_t j = 0; j < paths; ++j) diff += a.at(j, n, 0) - b.at(j, n, 0);
      worst = std::max(worst, std::abs(diff) / static_cast<double>(paths));
    }
    return worst;
  };
  const double coarse = error_on(8);
  const double finer = error_on(16);
  CHECK(coarse / finer >= 1.8);
}

TEST_CASE("dupire scheme") {
  SUBCASE("constant volatility is exact gbm in the mean") {
    DupireLogEuler m{{100.0}, 0.05, 0.1, 10, [](double, double) { return 0.25; }};
    const std::size_t paths = 200000;
    const PathBatch batch = simulate_paths(m, make_grid(1.0, 10), paths, RngStream{2, 0});
    const Moments mm = moments(paths, [&](std::size_t j) { return std::exp(batch.at(j, 10, 0)); });
    CHECK(std::abs(mm.mean - 100.0 * std::exp(-0.05)) <= 4.0 * mm.se);
    CHECK(batch.at(0, 0, 0) == doctest::Approx(std::log(100.0)));
  }
  SUBCASE("finer grids interpolate linearly inside coarse steps") {
    DupireLogEuler m{{100.0, 90.0}, 0.05, 0.0, 10, [](double t, double s) { return 0.2 + 0.001 * s + 0.1 * t; }};
    const PathBatch coarse = simulate_paths(m, make_grid(1.0, 10), 8, RngStream{4, 1});
    const PathBatch fine = simulate_paths(m, make_grid(1.0, 20), 8, RngStream{4, 1});
    const PathBatch sparse = simulate_paths(m, make_grid(1.0, 5), 8, RngStream{4, 1});
    for (std::size_t j = 0; j < 8; ++j)
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t l = 0; l <= 10; ++l) CHECK(fine.at(j, 2 * l, i) == coarse.at(j, l, i));
        for (std::size_t l = 0; l < 10; ++l) {
          CHECK(fine.at(j, 2 * l + 1, i) ==
                doctest::Approx(0.5 * (coarse.at(j, l, i) + coarse.at(j, l + 1, i))).epsilon(1e-12));
        }
        for (std::size_t n = 0; n <= 5; ++n) CHECK(sparse.at(j, n, i) == coarse.at(j, 2 * n, i));
      }
  }
  SUBCASE("grid and coarse steps must divide one another") {
    DupireLogEuler m{{100.0}, 0.05, 0.0, 10, [](double, double) { return 0.2; }};
    CHECK_THROWS_AS(simulate_paths(m, make_grid(1.0, 7), 2, RngStream{}), InvalidArgument);
  }
}

TEST_CASE("ratio states are window ratios of one underlying path") {
  const RatioPath m{1.0, 0.0004, 0.02, 100};
  const TimeGrid grid = make_grid(30.0, 30);
  const PathBatch states = simulate_paths(m, grid, 4, RngStream{8, 2});
  const Eigen::MatrixXd s = simulate_ratio_underlying(m, grid, 4, RngStream{8, 2});
  CHECK(states.dim() == 100);
  CHECK(s.cols() == 131);
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t n = 0; n <= 30; ++n) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double base = s(jj, static_cast<Eigen::Index>(n));
      for (std::size_t k = 1; k <= 100; ++k) {
        const double expected = s(jj, static_cast<Eigen::Index>(n + k)) / base;
        CHECK(states.at(j, n, k - 1) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(simulate_paths(m, TimeGrid{2.0, 2, {0.0, 0.5, 2.0}}, 1, RngStream{}), InvalidArgument);
}
