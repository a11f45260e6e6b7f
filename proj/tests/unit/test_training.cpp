#include "optstop/error.hpp"
#include "optstop/oracles.hpp"
#include "optstop/parallel.hpp"
#include "optstop/training.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

using namespace optstop;

namespace {

Problem two_exercise(std::size_t d) {
  const TimeGrid grid = make_grid(1.0, 2);
  BrownianScaled model;
  model.dim = d;
  return make_problem(model, BmPutType{0.02, 0.3, 95.0, 90.0, BrownianScaling::kTenOverDim, d}, grid);
}

Problem max_call(std::size_t d, double spot) {
  const TimeGrid grid = make_grid(3.0, 9);
  GbmExact model{std::vector<double>(d, spot), std::vector<double>(d, 0.05 - 0.1), std::vector<double>(d, 0.2), {}};
  return make_problem(model, MaxCall{0.05, 100.0, d}, grid);
}

TrainRunConfig quick(std::uint64_t steps, double batch, double rate) {
  TrainRunConfig cfg;
  cfg.steps = steps;
  cfg.batch = PiecewiseSchedule::constant(batch);
  cfg.adam.rate = PiecewiseSchedule::constant(rate);
  cfg.eval_paths = 1 << 14;
  cfg.seed = 5;
  return cfg;
}

NetworkLayout layout_for(std::size_t d, std::size_t width) {
  NetworkLayout l = NetworkLayout::for_dimension(d);
  l.hidden1 = l.hidden2 = width;
  return l;
}

// Pays 1 at t_1 and nothing at t_0 or t_2, whatever the path.
Problem stop_at_one() {
  Problem p = two_exercise(1);
  p.payoff = [](const PathBatch& b) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.paths()), 3);
    g.col(1).setOnes();
    return g;
  };
  return p;
}

}  // namespace

TEST_CASE("no steps returns the initial policy") {
  const Problem p = two_exercise(2);
  const NetworkLayout l = layout_for(2, 8);
  auto cfg = quick(0, 64, 0.01);
  const auto result = train(p, l, cfg);
  CHECK(result.log.empty());
  CHECK(result.policy == init_policy(l, 2, RngStream{cfg.seed, 0}, true));
}

TEST_CASE("learns a rule with a known optimum") {
  const Problem p = stop_at_one();
  auto cfg = quick(300, 256, 0.05);
  const auto result = train(p, layout_for(1, 8), cfg);
  const PathBatch batch = p.sample(20000, RngStream{99, 0}, 0);
  const auto stops = first_exercise_index(policy_outputs(result.policy, batch, Mode::kEval));
  const auto hits = std::count(stops.begin(), stops.end(), std::size_t{1});
  CHECK(static_cast<double>(hits) >= 0.99 * 20000);
  const auto est = estimate_price(result.policy, p, 20000, 99);
  CHECK(est.mean >= 0.99);
}

TEST_CASE("two-exercise put, d = 1") {
  const Problem p = two_exercise(1);
  TrainRunConfig cfg = quick(500, 2048, 0.0);
  cfg.adam.rate = parse_schedule("upto_100:0.05, upto_300:0.005, else:0.0005");
  cfg.eval_paths = 1 << 18;
  const auto result = train(p, NetworkLayout::for_dimension(1), cfg);
  const auto est = estimate_price(result.policy, p, cfg.eval_paths, cfg.seed);
  CHECK(std::abs(est.mean - 7.890) < 0.05);
  CHECK(est.ci_low <= est.mean);
  CHECK(est.mean <= est.ci_high);

  // the trailing average of the objective ends above its early value
  REQUIRE(result.log.size() == 500);
  REQUIRE(result.objectives.size() == 500);
  double tail = 0.0, head = 0.0;
  for (std::size_t i = 400; i < 500; ++i) tail += result.log[i].objective;
  for (std::size_t i = 0; i < 100; ++i) head += result.objectives[i];
  CHECK(tail > head);
  CHECK(objective_improved(result.objectives));
  CHECK(result.log[0].learning_rate == 0.05);
  CHECK(result.log[150].learning_rate == 0.005);
  CHECK(result.log[499].learning_rate == 0.0005);
  CHECK(result.log[499].step == 500);
}

TEST_CASE("price of a constant payoff") {
  Problem p = two_exercise(1);
  p.payoff = [](const PathBatch& b) { return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(b.paths()), 3, 4.25); };
  const auto policy = init_policy(layout_for(1, 4), 2, RngStream{1, 0}, true);
  const auto est = estimate_price(policy, p, 1000, 3);
  CHECK(est.mean == doctest::Approx(4.25).epsilon(1e-14));
  CHECK(est.std_error == doctest::Approx(0.0));
  CHECK(est.paths == 1000);
}

TEST_CASE("untrained max-call policy is low-biased") {
  const Problem p = max_call(5, 100.0);
  auto policy = init_policy(NetworkLayout::for_dimension(5), 9, RngStream{3, 0}, true);
  // logit 0 stops at once for (100 - 100)^+ = 0
  CHECK(estimate_price(policy, p, 1 << 12, 4).mean == 0.0);
  // push the first stop past t_0 so the random networks decide
  policy.block(0)[0] = -5.0;
  const auto est = estimate_price(policy, p, 1 << 14, 4);
  CHECK(est.mean <= 26.164 + 3 * est.std_error);
  CHECK(est.mean > 0.0);
}

TEST_CASE("trailing objective averages") {
  const std::vector<double> rising{1, 2, 3, 4, 5, 6};
  CHECK(trailing_mean(rising, 1, 3) == 1.0);
  CHECK(trailing_mean(rising, 2, 3) == 1.5);
  CHECK(trailing_mean(rising, 6, 3) == 5.0);
  CHECK(objective_improved(rising, 3));
  CHECK_FALSE(objective_improved({6, 5, 4, 3, 2, 1}, 3));
  // a run no longer than the window has nothing to compare
  CHECK(objective_improved({3, 2, 1}, 3));
  CHECK(objective_improved({}, 100));
  // equal averages are not an improvement
  CHECK_FALSE(objective_improved({1, 2, 3, 1, 2, 3}, 3));
  CHECK_THROWS_AS(trailing_mean(rising, 0), InvalidArgument);
  CHECK_THROWS_AS(trailing_mean(rising, 7), InvalidArgument);
}

TEST_CASE("confidence intervals") {
  const auto [lo, hi] = confidence_interval(0.0, 1.0, 4);
  CHECK(lo == doctest::Approx(-0.979982));
  CHECK(hi == doctest::Approx(0.979982));
  const auto [a, b] = confidence_interval(3.0, 0.0, 10);
  CHECK(a == 3.0);
  CHECK(b == 3.0);
  // reported interval [165.400, 165.505] around 165.452 with J = 2^20
  const auto [low, high] = confidence_interval(165.452, 27.2, std::size_t{1} << 20);
  CHECK(std::abs(low - 165.400) < 1e-3);
  CHECK(std::abs(high - 165.505) < 1e-3);
  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(confidence_interval(0.0, -1.0, 5), InvalidArgument);
}

TEST_CASE("training is reproducible across runs and thread counts") {
  const Problem p = max_call(2, 90.0);
  auto cfg = quick(30, 256, 0.01);
  cfg.eval_paths = 5000;
  const NetworkLayout l = layout_for(2, 12);
  set_thread_count(1);
  const auto a = train(p, l, cfg);
  const auto b = train(p, l, cfg);
  set_thread_count(4);
  const auto c = train(p, l, cfg);
  const auto pc = estimate_price(c.policy, p, cfg.eval_paths, cfg.seed, 1000);
  set_thread_count(1);
  CHECK(a.policy == b.policy);
  CHECK(a.policy == c.policy);
  REQUIRE(a.log.size() == c.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].objective == c.log[i].objective);
  const auto pa = estimate_price(a.policy, p, cfg.eval_paths, cfg.seed, 1000);
  CHECK(pa.mean == pc.mean);
  CHECK(pa.sample_std == pc.sample_std);
  // chunking does not move the estimate
  const auto whole = estimate_price(a.policy, p, cfg.eval_paths, cfg.seed, 1 << 14);
  CHECK(whole.mean == pa.mean);
}

TEST_CASE("batch of one with plain SGD is the plain gradient recursion") {
  const Problem p = max_call(2, 100.0);
  NetworkLayout l = layout_for(2, 6);
  l.bn_input = l.bn_hidden = l.bn_output = false;
  TrainRunConfig cfg = quick(10, 1, 0.01);
  cfg.adam.plain_sgd = true;
  const auto trained = train(p, l, cfg);

  StoppingPolicy theta = init_policy(l, p.steps, RngStream{cfg.seed, 0}, true);
  for (std::uint64_t m = 1; m <= 10; ++m) {
    const PathBatch batch = p.sample(1, RngStream{cfg.seed, m}, 0);
    const auto r = objective_and_gradient(theta, batch, p.payoff(batch));
    auto params = theta.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += 0.01 * r.gradient[i];
  }
  const auto x = trained.policy.parameters();
  const auto y = theta.parameters();
  REQUIRE(x.size() == y.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("divergence guard") {
  for (double bad : {1e9, std::numeric_limits<double>::quiet_NaN()}) {
    Problem p = two_exercise(1);
    p.payoff = [bad](const PathBatch& b) {
      return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(b.paths()), 3, bad);
    };
    try {
      train(p, layout_for(1, 4), quick(3, 16, 0.01));
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.step() == 1);
      CHECK(e.quantity() == "objective");
    }
  }
}

TEST_CASE("argument checks") {
  const Problem p = two_exercise(2);
  CHECK_THROWS_AS(train(p, layout_for(3, 4), quick(1, 8, 0.01)), InvalidArgument);
  auto cfg = quick(1, 0, 0.01);
  CHECK_THROWS_AS(train(p, layout_for(2, 4), cfg), InvalidArgument);
  cfg = quick(1, 8, 0.01);
  cfg.log_every = 0;
  CHECK_THROWS_AS(train(p, layout_for(2, 4), cfg), InvalidArgument);
  const auto policy = init_policy(layout_for(2, 4), 3, RngStream{1, 0}, true);
  CHECK_THROWS_AS(estimate_price(policy, p, 10, 1), InvalidArgument);
}

TEST_CASE("logging cadence and keep-best") {
  const Problem p = two_exercise(1);
  auto cfg = quick(25, 64, 0.01);
  cfg.log_every = 10;
  std::size_t seen = 0;
  const auto r = train(p, layout_for(1, 4), cfg, [&](const LogRecord&, const StoppingPolicy&) { ++seen; });
  REQUIRE(r.log.size() == 3);
  CHECK(r.log[0].step == 10);
  CHECK(r.log[2].step == 25);
  CHECK(seen == 3);
  cfg.keep_best = true;
  const auto best = train(p, layout_for(1, 4), cfg);
  CHECK(best.policy.counter() >= 1);
  CHECK(best.policy.counter() <= 25);
}

TEST_CASE("European value from the terminal payoff") {
  const TimeGrid grid = make_grid(1.0, 4);
  const Problem p = make_problem(GbmExact{{100.0}, {0.03}, {0.25}, {}}, MaxCall{0.03, 95.0, 1}, grid);
  const auto est = estimate_terminal(p, 400000, 8);
  const double exact = bs_euro_call({1.0, 100.0, 0.25, 0.03, 0.0, 95.0});
  CHECK(std::abs(est.mean - exact) < 4 * est.std_error);
}
