#include "optstop/error.hpp"
#include "optstop/stopnet.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace optstop;

namespace {

NetworkLayout small_layout(std::size_t d, std::size_t h1, std::size_t h2) {
  NetworkLayout l;
  l.input = d;
  l.hidden1 = h1;
  l.hidden2 = h2;
  return l;
}

Eigen::MatrixXd random_inputs(std::size_t d, std::size_t j, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd x(d, j);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = normal(gen) + 0.3 * static_cast<double>(r);
  }
  return x;
}

void perturb(StoppingPolicy& p, std::uint64_t seed, double scale) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : p.parameters()) v += normal(gen);
}

// Plain loops over std::vector: affine, optional batch norm with batch
// statistics, ReLU on the hidden layers, logistic at the end.
std::vector<double> reference_forward(const StoppingPolicy& policy, std::size_t n, const Eigen::MatrixXd& x) {
  const NetworkLayout& l = policy.layout();
  const BlockOffsets& o = policy.offsets();
  const auto p = policy.block(n);
  const std::size_t J = static_cast<std::size_t>(x.cols());
  const std::array<std::size_t, 4> w{l.input, l.hidden1, l.hidden2, 1};

  std::vector<std::vector<double>> a(w[0], std::vector<double>(J));
  for (std::size_t i = 0; i < w[0]; ++i)
    for (std::size_t j = 0; j < J; ++j) a[i][j] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

  auto normalize = [&](std::vector<std::vector<double>>& z, std::size_t site) {
    for (std::size_t i = 0; i < z.size(); ++i) {
      double mean = 0.0;
      for (double v : z[i]) mean += v;
      mean /= static_cast<double>(J);
      double var = 0.0;
      for (double v : z[i]) var += (v - mean) * (v - mean);
      var /= static_cast<double>(J);
      for (double& v : z[i]) {
        v = p[o.bn_scale[site] + i] * (v - mean) / std::sqrt(var + l.bn_eps) + p[o.bn_shift[site] + i];
      }
    }
  };

  if (l.bn_input) normalize(a, 0);
  for (std::size_t k = 1; k <= 3; ++k) {
    std::vector<std::vector<double>> z(w[k], std::vector<double>(J, 0.0));
    for (std::size_t r = 0; r < w[k]; ++r) {
      for (std::size_t j = 0; j < J; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < w[k - 1]; ++c) s += p[o.weight[k] + r * w[k - 1] + c] * a[c][j];
        if (!l.bn_at(k)) s += p[o.bias[k] + r];
        z[r][j] = s;
      }
    }
    if (l.bn_at(k)) normalize(z, k);
    if (k < 3) {
      for (auto& row : z)
        for (double& v : row) v = std::max(v, 0.0);
    }
    a = std::move(z);
  }
  std::vector<double> out(J);
  for (std::size_t j = 0; j < J; ++j) out[j] = 1.0 / (1.0 + std::exp(-a[0][j]));
  return out;
}

double weighted_output(const StoppingPolicy& policy, std::size_t n, const Eigen::MatrixXd& x,
                       const Eigen::RowVectorXd& c) {
  return forward_u(policy, n, x, Mode::kTrain).dot(c);
}

}  // namespace

TEST_CASE("parameter counts follow the layout") {
  const NetworkLayout l = small_layout(3, 5, 4);
  // bn0 2*3, w1 5*3 + bn1 2*5, w2 4*5 + bn2 2*4, w3 4 + bn3 2
  const std::size_t nu = 6 + 15 + 10 + 20 + 8 + 4 + 2;
  CHECK(l.parameter_count() == nu);
  CHECK(l.statistic_count() == 6 + 10 + 8 + 2);

  NetworkLayout plain = l;
  plain.bn_input = plain.bn_hidden = plain.bn_output = false;
  CHECK(plain.parameter_count() == 15 + 5 + 20 + 4 + 4 + 1);
  CHECK(plain.statistic_count() == 0);

  const NetworkLayout one = NetworkLayout::for_dimension(1);
  CHECK(one.hidden1 == 41);
  StoppingPolicy det(one, 2, true);
  CHECK(det.parameter_count() == 1 + one.parameter_count());
  CHECK(det.statistic_count() == one.statistic_count());
  CHECK_FALSE(det.has_network(0));
  CHECK(det.has_network(1));
  StoppingPolicy full(one, 2, false);
  CHECK(full.parameter_count() == 2 * one.parameter_count());
  CHECK(full.statistic_count() == 2 * one.statistic_count());

  CHECK_THROWS_AS(StoppingPolicy(one, 0, true), InvalidArgument);
}

TEST_CASE("initialization") {
  const NetworkLayout l = small_layout(2, 6, 5);
  const auto policy = init_policy(l, 3, RngStream{11, 0}, true);
  const auto& o = policy.offsets();
  CHECK(policy.block(0)[0] == 0.0);
  CHECK(policy.counter() == 0);
  for (std::size_t n = 1; n < 3; ++n) {
    const auto b = policy.block(n);
    const double bound = std::sqrt(6.0 / (2.0 + 6.0));
    bool nonzero = false;
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(std::abs(b[o.weight[1] + i]) <= bound);
      nonzero = nonzero || b[o.weight[1] + i] != 0.0;
    }
    CHECK(nonzero);
    CHECK(b[o.bn_scale[1]] == 1.0);
    CHECK(b[o.bn_shift[1]] == 0.0);
  }
  for (std::size_t site = 0; site < 4; ++site) {
    const auto s = policy.statistics();
    CHECK(s[o.mean[site]] == 0.0);
    CHECK(s[o.var[site]] == 1.0);
  }
  CHECK(init_policy(l, 3, RngStream{11, 0}, true) == policy);
  CHECK_FALSE(init_policy(l, 3, RngStream{12, 0}, true) == policy);
  // the two networks draw different weights
  CHECK(policy.block(1)[o.weight[1]] != policy.block(2)[o.weight[1]]);
}

TEST_CASE("zero network returns one half") {
  for (bool bn : {true, false}) {
    NetworkLayout l = small_layout(2, 4, 3);
    l.bn_input = l.bn_hidden = l.bn_output = bn;
    StoppingPolicy p(l, 2, false);  // all parameters zero
    const Eigen::MatrixXd x = random_inputs(2, 16, 3, 5.0);
    const auto u = forward_u(p, 1, x, Mode::kTrain);
    for (Eigen::Index j = 0; j < u.size(); ++j) CHECK(u(j) == 0.5);
  }
  StoppingPolicy det(small_layout(1, 2, 2), 2, true);
  CHECK(forward_u(det, 0, Eigen::MatrixXd::Zero(1, 3), Mode::kTrain)(2) == 0.5);
}

TEST_CASE("constant feature standardises to zero") {
  const NetworkLayout l = small_layout(2, 4, 3);
  const auto policy = init_policy(l, 1, RngStream{1, 0}, false);
  Eigen::MatrixXd x = random_inputs(2, 32, 9);
  x.row(1).setConstant(7.5);
  StepCache cache;
  forward_u(policy, 0, x, Mode::kTrain, &cache);
  CHECK(cache.xhat[0].row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cache.stats.var[0](1) == 0.0);
  CHECK(cache.stats.mean[0](1) == doctest::Approx(7.5));
}

TEST_CASE("forward matches a loop implementation") {
  for (int variant = 0; variant < 3; ++variant) {
    NetworkLayout l = small_layout(2, 5, 4);
    if (variant == 1) l.bn_hidden = false;
    if (variant == 2) l.bn_input = l.bn_output = false;
    auto policy = init_policy(l, 2, RngStream{static_cast<std::uint64_t>(variant), 0}, false);
    perturb(policy, 40 + variant, 0.3);
    const Eigen::MatrixXd x = random_inputs(2, 8, 5 + variant);
    for (std::size_t n = 0; n < 2; ++n) {
      const auto u = forward_u(policy, n, x, Mode::kTrain);
      const auto ref = reference_forward(policy, n, x);
      for (std::size_t j = 0; j < ref.size(); ++j) {
        CHECK(std::abs(u(static_cast<Eigen::Index>(j)) - ref[j]) < 1e-12);
      }
    }
  }
}

TEST_CASE("eval mode uses running statistics") {
  NetworkLayout l = small_layout(1, 3, 2);
  l.bn_hidden = l.bn_output = false;
  auto policy = init_policy(l, 1, RngStream{2, 0}, false);
  const auto& o = policy.offsets();
  policy.statistics()[o.mean[0]] = 2.0;
  policy.statistics()[o.var[0]] = 4.0 - l.bn_eps;
  policy.set_counter(1);
  Eigen::MatrixXd x(1, 2);
  x << 4.0, 0.0;
  // with running stats both inputs map to +-1, the same as a train pass on (1, -1)
  Eigen::MatrixXd y(1, 2);
  y << 1.0, -1.0;
  NetworkLayout raw = l;
  raw.bn_input = false;
  StoppingPolicy twin(raw, 1, false);
  const auto& ot = twin.offsets();
  for (std::size_t k = 1; k <= 3; ++k) {
    const auto w = l.widths();
    for (std::size_t i = 0; i < w[k] * w[k - 1]; ++i) twin.block(0)[ot.weight[k] + i] = policy.block(0)[o.weight[k] + i];
  }
  const auto ue = forward_u(policy, 0, x, Mode::kEval);
  const auto ut = forward_u(twin, 0, y, Mode::kEval);
  CHECK(ue(0) == doctest::Approx(ut(0)).epsilon(1e-12));
  CHECK(ue(1) == doctest::Approx(ut(1)).epsilon(1e-12));
}

TEST_CASE("output stays inside the open interval") {
  NetworkLayout l = small_layout(2, 4, 4);
  l.bn_input = l.bn_hidden = l.bn_output = false;
  auto policy = init_policy(l, 1, RngStream{3, 0}, false);
  perturb(policy, 4, 1.0);
  for (double mag : {1.0, 1e3, 1e6, -1e6}) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Constant(2, 4, mag);
    x(0, 1) = -mag;
    x(1, 2) = -mag;
    const auto u = forward_u(policy, 0, x, Mode::kTrain);
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      CHECK(u(j) > 0.0);
      CHECK(u(j) < 1.0);
      CHECK(u(j) >= kOutputClamp);
      CHECK(u(j) <= 1.0 - kOutputClamp);
    }
  }
}

TEST_CASE("backward: zero upstream gives zero gradient") {
  const NetworkLayout l = small_layout(2, 4, 3);
  auto policy = init_policy(l, 1, RngStream{5, 0}, false);
  const Eigen::MatrixXd x = random_inputs(2, 8, 1);
  StepCache cache;
  forward_u(policy, 0, x, Mode::kTrain, &cache);
  std::vector<double> grad(policy.parameter_size(0), 0.0);
  const auto gx = backward_u(policy, 0, cache, Eigen::RowVectorXd::Zero(8), grad);
  CHECK(std::all_of(grad.begin(), grad.end(), [](double v) { return v == 0.0; }));
  CHECK(gx.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward matches central differences") {
  for (int variant = 0; variant < 3; ++variant) {
    NetworkLayout l = small_layout(3, 6, 5);
    if (variant == 1) l.bn_hidden = false;
    if (variant == 2) l.bn_input = l.bn_hidden = l.bn_output = false;
    auto policy = init_policy(l, 2, RngStream{100u + variant, 0}, false);
    perturb(policy, 7 + variant, 0.2);
    const Eigen::MatrixXd x = random_inputs(3, 12, 20 + variant);
    std::mt19937_64 gen(30 + variant);
    std::normal_distribution<double> normal;
    Eigen::RowVectorXd c(12);
    for (Eigen::Index j = 0; j < c.size(); ++j) c(j) = normal(gen);

    const std::size_t n = 1;
    StepCache cache;
    forward_u(policy, n, x, Mode::kTrain, &cache);
    std::vector<double> grad(policy.parameter_size(n), 0.0);
    backward_u(policy, n, cache, c, grad);

    const double h = 1e-6;
    const std::size_t offset = policy.parameter_offset(n);
    double scale = 0.0;
    for (double g : grad) scale = std::max(scale, std::abs(g));
    std::uniform_int_distribution<std::size_t> pick(0, grad.size() - 1);
    for (int probe = 0; probe < 60; ++probe) {
      const std::size_t i = probe < 8 ? (probe * grad.size()) / 8 : pick(gen);
      double& theta = policy.parameters()[offset + i];
      const double saved = theta;
      theta = saved + h;
      const double up = weighted_output(policy, n, x, c);
      theta = saved - h;
      const double down = weighted_output(policy, n, x, c);
      theta = saved;
      const double fd = (up - down) / (2.0 * h);
      INFO("variant " << variant << " index " << i << " analytic " << grad[i] << " fd " << fd);
      CHECK(std::abs(grad[i] - fd) / (std::abs(grad[i]) + 1e-3 * scale) < 1e-6);
    }
  }
}

TEST_CASE("input gradient matches central differences") {
  const NetworkLayout l = small_layout(2, 5, 4);
  auto policy = init_policy(l, 1, RngStream{8, 0}, false);
  perturb(policy, 9, 0.2);
  Eigen::MatrixXd x = random_inputs(2, 10, 2);
  Eigen::RowVectorXd c = Eigen::RowVectorXd::LinSpaced(10, -1.0, 1.0);
  StepCache cache;
  forward_u(policy, 0, x, Mode::kTrain, &cache);
  std::vector<double> grad(policy.parameter_size(0), 0.0);
  const Eigen::MatrixXd gx = backward_u(policy, 0, cache, c, grad);
  const double h = 1e-6;
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index j = 0; j < 10; j += 3) {
      const double saved = x(r, j);
      x(r, j) = saved + h;
      const double up = weighted_output(policy, 0, x, c);
      x(r, j) = saved - h;
      const double down = weighted_output(policy, 0, x, c);
      x(r, j) = saved;
      CHECK(gx(r, j) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("dead ReLU layer blocks weight gradients") {
  NetworkLayout l = small_layout(2, 4, 3);
  l.bn_input = l.bn_hidden = l.bn_output = false;
  auto policy = init_policy(l, 1, RngStream{4, 0}, false);
  const auto& o = policy.offsets();
  for (std::size_t i = 0; i < 4; ++i) policy.block(0)[o.bias[1] + i] = -1e3;
  StepCache cache;
  forward_u(policy, 0, random_inputs(2, 6, 3), Mode::kTrain, &cache);
  std::vector<double> grad(policy.parameter_size(0), 0.0);
  backward_u(policy, 0, cache, Eigen::RowVectorXd::Ones(6), grad);
  for (std::size_t k = 1; k <= 3; ++k) {
    const auto w = l.widths();
    for (std::size_t i = 0; i < w[k] * w[k - 1]; ++i) CHECK(grad[o.weight[k] + i] == 0.0);
  }
  CHECK(grad[o.bias[3]] != 0.0);
}

TEST_CASE("step-0 logit") {
  StoppingPolicy p(small_layout(1, 2, 2), 3, true);
  p.block(0)[0] = std::log(3.0);  // logistic = 0.75
  StepCache cache;
  const auto u = forward_u(p, 0, Eigen::MatrixXd::Zero(1, 4), Mode::kTrain, &cache);
  CHECK(u(0) == doctest::Approx(0.75));
  std::vector<double> grad(1, 0.0);
  backward_u(p, 0, cache, Eigen::RowVectorXd::Ones(4), grad);
  CHECK(grad[0] == doctest::Approx(4 * 0.75 * 0.25));
  p.set_logit_trainable(false);
  std::vector<double> frozen(1, 0.0);
  backward_u(p, 0, cache, Eigen::RowVectorXd::Ones(4), frozen);
  CHECK(frozen[0] == 0.0);
}

TEST_CASE("running statistics: first update") {
  NetworkLayout l = small_layout(1, 2, 2);
  l.bn_hidden = l.bn_output = false;
  auto policy = init_policy(l, 1, RngStream{1, 0}, false);
  BatchStatistics batch;
  batch.mean[0] = Eigen::VectorXd::Constant(1, 3.0);
  batch.var[0] = Eigen::VectorXd::Constant(1, 2.0);
  update_running_stats(policy, 0, batch);
  const auto& o = policy.offsets();
  CHECK(policy.statistics()[o.mean[0]] == doctest::Approx(0.03));
  CHECK(policy.statistics()[o.var[0]] == doctest::Approx(0.99 + 0.02));

  batch.var[0](0) = 0.0;
  for (int i = 0; i < 5000; ++i) update_running_stats(policy, 0, batch);
  CHECK(policy.statistics()[o.var[0]] >= 0.0);
  CHECK_THROWS_AS(update_running_stats(policy, 0, BatchStatistics{}), InvalidArgument);
}

TEST_CASE("running statistics converge and eval tracks train") {
  const NetworkLayout l = small_layout(2, 6, 5);
  auto policy = init_policy(l, 1, RngStream{21, 0}, false);
  perturb(policy, 22, 0.1);
  std::mt19937_64 gen(23);
  std::normal_distribution<double> a(1.5, 2.0);
  std::normal_distribution<double> b(-1.0, 0.5);
  auto draw = [&](std::size_t J) {
    Eigen::MatrixXd x(2, J);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(0, j) = a(gen);
      x(1, j) = b(gen);
    }
    return x;
  };
  for (int step = 0; step < 1000; ++step) {
    StepCache cache;
    forward_u(policy, 0, draw(256), Mode::kTrain, &cache);
    update_running_stats(policy, 0, cache.stats);
    policy.set_counter(policy.counter() + 1);
  }
  const auto& o = policy.offsets();
  const auto s = policy.statistics();
  CHECK(std::abs(s[o.mean[0]] - 1.5) < 0.015 * 2.0);
  CHECK(std::abs(s[o.var[0]] / 4.0 - 1.0) < 0.01 * 4.0);
  CHECK(std::abs(s[o.mean[0] + 1] + 1.0) < 0.015);
  CHECK(std::abs(s[o.var[0] + 1] / 0.25 - 1.0) < 0.04);

  const Eigen::MatrixXd fresh = draw(1 << 15);
  const auto ut = forward_u(policy, 0, fresh, Mode::kTrain);
  const auto ue = forward_u(policy, 0, fresh, Mode::kEval);
  CHECK((ut - ue).cwiseAbs().mean() < 1e-2);
}

TEST_CASE("policy record round trip") {
  NetworkLayout l = small_layout(2, 3, 4);
  l.bn_hidden = false;
  auto policy = init_policy(l, 3, RngStream{6, 0}, true);
  perturb(policy, 6, 0.1);
  policy.set_counter(17);
  policy.set_logit_trainable(false);
  std::stringstream buf;
  save_policy(policy, buf);
  const auto back = load_policy(buf);
  CHECK(back == policy);

  std::stringstream bad("NOTAPOLICY");
  CHECK_THROWS_AS(load_policy(bad), InvalidArgument);
  std::string text;
  {
    std::stringstream b2;
    save_policy(policy, b2);
    text = b2.str();
  }
  std::stringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_policy(truncated), InvalidArgument);
}

TEST_CASE("argument checks") {
  const auto policy = init_policy(small_layout(2, 3, 3), 2, RngStream{1, 0}, false);
  CHECK_THROWS_AS(forward_u(policy, 2, Eigen::MatrixXd::Zero(2, 3), Mode::kTrain), InvalidArgument);
  CHECK_THROWS_AS(forward_u(policy, 0, Eigen::MatrixXd::Zero(3, 3), Mode::kTrain), InvalidArgument);
  StepCache cache;
  forward_u(policy, 0, Eigen::MatrixXd::Random(2, 3), Mode::kTrain, &cache);
  std::vector<double> grad(policy.parameter_size(0));
  CHECK_THROWS_AS(backward_u(policy, 1, cache, Eigen::RowVectorXd::Ones(3), grad), InvalidArgument);
  CHECK_THROWS_AS(backward_u(policy, 0, cache, Eigen::RowVectorXd::Ones(4), grad), InvalidArgument);
}

TEST_CASE("single precision products stay close") {
  const NetworkLayout l = small_layout(3, 6, 5);
  auto policy = init_policy(l, 1, RngStream{9, 0}, false);
  const Eigen::MatrixXd x = random_inputs(3, 64, 4);
  const auto ud = forward_u(policy, 0, x, Mode::kTrain);
  set_precision(Precision::kSingle);
  const auto us = forward_u(policy, 0, x, Mode::kTrain);
  set_precision(Precision::kDouble);
  CHECK((ud - us).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(precision() == Precision::kDouble);
}
