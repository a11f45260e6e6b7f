#include "optstop/stopnet.hpp"

#include "optstop/error.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>

namespace optstop {

namespace {

std::atomic<Precision> g_precision{Precision::kDouble};

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajor>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

Eigen::MatrixXd matmul(const Eigen::Ref<const RowMajor>& w, const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (g_precision.load(std::memory_order_relaxed) == Precision::kSingle) {
    const Eigen::MatrixXf wf = w.cast<float>();
    const Eigen::MatrixXf af = a.cast<float>();
    return (wf * af).cast<double>();
  }
  return w * a;
}

Eigen::MatrixXd matmul_tn(const Eigen::Ref<const RowMajor>& w, const Eigen::Ref<const Eigen::MatrixXd>& g) {
  if (g_precision.load(std::memory_order_relaxed) == Precision::kSingle) {
    const Eigen::MatrixXf wf = w.cast<float>();
    const Eigen::MatrixXf gf = g.cast<float>();
    return (wf.transpose() * gf).cast<double>();
  }
  return w.transpose() * g;
}

RowMajor matmul_nt(const Eigen::Ref<const Eigen::MatrixXd>& g, const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (g_precision.load(std::memory_order_relaxed) == Precision::kSingle) {
    const Eigen::MatrixXf gf = g.cast<float>();
    const Eigen::MatrixXf af = a.cast<float>();
    return (gf * af.transpose()).cast<double>();
  }
  return g * a.transpose();
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_output(double s) {
  if (s < kOutputClamp) return kOutputClamp;
  if (s > 1.0 - kOutputClamp) return 1.0 - kOutputClamp;
  return s;
}

void warn_eval_fallback() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::cerr << "warning: eval-mode forward before any running-statistics update; "
                 "using batch statistics\n";
  }
}

}  // namespace

void set_precision(Precision p) { g_precision = p; }
Precision precision() { return g_precision; }

NetworkLayout NetworkLayout::for_dimension(std::size_t d) {
  NetworkLayout layout;
  layout.input = d;
  layout.hidden1 = d + 40;
  layout.hidden2 = d + 40;
  return layout;
}

bool NetworkLayout::bn_at(std::size_t site) const {
  switch (site) {
    case 0: return bn_input;
    case 1:
    case 2: return bn_hidden;
    default: return bn_output;
  }
}

BlockOffsets BlockOffsets::for_layout(const NetworkLayout& layout) {
  BlockOffsets o;
  const auto w = layout.widths();
  std::size_t p = 0;
  std::size_t s = 0;
  auto bn_site = [&](std::size_t site) {
    if (!layout.bn_at(site)) return;
    o.bn_scale[site] = p;
    p += w[site];
    o.bn_shift[site] = p;
    p += w[site];
    o.mean[site] = s;
    s += w[site];
    o.var[site] = s;
    s += w[site];
  };
  bn_site(0);
  for (std::size_t k = 1; k <= 3; ++k) {
    o.weight[k] = p;
    p += w[k] * w[k - 1];
    if (!layout.bn_at(k)) {
      o.bias[k] = p;
      p += w[k];
    }
    bn_site(k);
  }
  o.parameters = p;
  o.statistics = s;
  return o;
}

std::size_t NetworkLayout::parameter_count() const { return BlockOffsets::for_layout(*this).parameters; }
std::size_t NetworkLayout::statistic_count() const { return BlockOffsets::for_layout(*this).statistics; }

StoppingPolicy::StoppingPolicy(const NetworkLayout& layout, std::size_t steps, bool deterministic_start)
    : layout_(layout),
      offsets_(BlockOffsets::for_layout(layout)),
      steps_(steps),
      deterministic_start_(deterministic_start) {
  if (steps == 0) throw InvalidArgument("policy: step count must be at least 1");
  if (layout.input == 0 || layout.hidden1 == 0 || layout.hidden2 == 0) {
    throw InvalidArgument("policy: layer widths must be positive");
  }
  if (!(layout.bn_eps > 0.0) || !(layout.bn_momentum >= 0.0 && layout.bn_momentum < 1.0)) {
    throw InvalidArgument("policy: need bn_eps > 0 and 0 <= bn_momentum < 1");
  }
  params_.assign(parameter_offset(steps - 1) + parameter_size(steps - 1), 0.0);
  stats_.assign(statistic_offset(steps - 1) + (has_network(steps - 1) ? offsets_.statistics : 0), 0.0);
}

std::size_t StoppingPolicy::parameter_offset(std::size_t n) const {
  if (n == 0) return 0;
  const std::size_t first = deterministic_start_ ? 1 : offsets_.parameters;
  return first + (n - 1) * offsets_.parameters;
}

std::size_t StoppingPolicy::parameter_size(std::size_t n) const {
  return has_network(n) ? offsets_.parameters : 1;
}

std::size_t StoppingPolicy::statistic_offset(std::size_t n) const {
  if (n == 0) return 0;
  const std::size_t first = deterministic_start_ ? 0 : offsets_.statistics;
  return first + (n - 1) * offsets_.statistics;
}

StoppingPolicy init_policy(const NetworkLayout& layout, std::size_t steps, const RngStream& rng,
                           bool deterministic_start) {
  StoppingPolicy policy(layout, steps, deterministic_start);
  const BlockOffsets& o = policy.offsets();
  const auto w = layout.widths();
  for (std::size_t n = 0; n < steps; ++n) {
    if (!policy.has_network(n)) continue;  // logit starts at 0
    auto block = policy.block(n);
    auto engine = rng.engine(n, StreamTag::kInitialization);
    for (std::size_t k = 1; k <= 3; ++k) {
      const double bound = std::sqrt(6.0 / static_cast<double>(w[k - 1] + w[k]));
      std::uniform_real_distribution<double> uniform(-bound, bound);
      for (std::size_t i = 0; i < w[k] * w[k - 1]; ++i) block[o.weight[k] + i] = uniform(engine);
    }
    for (std::size_t site = 0; site < 4; ++site) {
      if (!layout.bn_at(site)) continue;
      for (std::size_t i = 0; i < w[site]; ++i) block[o.bn_scale[site] + i] = 1.0;
    }
    auto stats = policy.statistics().subspan(policy.statistic_offset(n), o.statistics);
    for (std::size_t site = 0; site < 4; ++site) {
      if (!layout.bn_at(site)) continue;
      for (std::size_t i = 0; i < w[site]; ++i) stats[o.var[site] + i] = 1.0;
    }
  }
  return policy;
}

namespace {

// Normalises `z` in place at `site` and applies scale/shift.
void batch_norm_forward(const StoppingPolicy& policy, std::size_t n, std::size_t site, Mode mode,
                        Eigen::MatrixXd& z, StepCache* cache) {
  const NetworkLayout& layout = policy.layout();
  const BlockOffsets& o = policy.offsets();
  const auto rows = z.rows();
  const auto cols = static_cast<double>(z.cols());
  const auto block = policy.block(n);
  const ConstVec scale(block.data() + o.bn_scale[site], rows);
  const ConstVec shift(block.data() + o.bn_shift[site], rows);

  bool use_batch = mode == Mode::kTrain;
  if (!use_batch && policy.counter() == 0) {
    warn_eval_fallback();
    use_batch = true;
  }
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  if (use_batch) {
    mean = z.rowwise().sum() / cols;
    z.colwise() -= mean;
    var = z.rowwise().squaredNorm() / cols;
  } else {
    const auto stats = policy.statistics().subspan(policy.statistic_offset(n), o.statistics);
    mean = ConstVec(stats.data() + o.mean[site], rows);
    var = ConstVec(stats.data() + o.var[site], rows);
    z.colwise() -= mean;
  }
  const Eigen::VectorXd inv_std = (var.array() + layout.bn_eps).rsqrt().matrix();
  z = inv_std.asDiagonal() * z;
  if (cache) {
    cache->xhat[site] = z;
    cache->inv_std[site] = inv_std;
    cache->stats.mean[site] = mean;
    cache->stats.var[site] = var;
  }
  z = scale.asDiagonal() * z;
  z.colwise() += shift;
}

// Gradient through x -> scale * (x - mean) * inv_std + shift with batch
// statistics. `g` holds d(out) on entry and d(in) on exit.
void batch_norm_backward(const StoppingPolicy& policy, std::size_t n, std::size_t site,
                         const StepCache& cache, Eigen::MatrixXd& g, std::span<double> grad) {
  const BlockOffsets& o = policy.offsets();
  const auto rows = g.rows();
  const auto cols = static_cast<double>(g.cols());
  const Eigen::MatrixXd& xhat = cache.xhat[site];
  const ConstVec scale(policy.block(n).data() + o.bn_scale[site], rows);
  // Sums go through aligned temporaries: a lazy reduction assigned into an
  // unaligned map is peeled by address and rounds differently run to run.
  const Eigen::VectorXd scale_grad = g.cwiseProduct(xhat).rowwise().sum();
  const Eigen::VectorXd shift_grad = g.rowwise().sum();
  VecMap(grad.data() + o.bn_scale[site], rows) += scale_grad;
  VecMap(grad.data() + o.bn_shift[site], rows) += shift_grad;
  g = scale.asDiagonal() * g;
  const Eigen::VectorXd g_mean = g.rowwise().sum() / cols;
  const Eigen::VectorXd gx_mean = g.cwiseProduct(xhat).rowwise().sum() / cols;
  g.colwise() -= g_mean;
  g -= gx_mean.asDiagonal() * xhat;
  g = cache.inv_std[site].asDiagonal() * g;
}

}  // namespace

Eigen::RowVectorXd forward_u(const StoppingPolicy& policy, std::size_t n,
                             const Eigen::Ref<const Eigen::MatrixXd>& inputs, Mode mode, StepCache* cache) {
  if (n >= policy.steps()) {
    throw InvalidArgument("forward_u: step " + std::to_string(n) + " out of range 0.." +
                          std::to_string(policy.steps() - 1));
  }
  const auto paths = inputs.cols();
  if (cache) cache->step = n;
  if (!policy.has_network(n)) {
    const double s = logistic(policy.block(n)[0]);
    if (cache) cache->logistic = Eigen::RowVectorXd::Constant(paths, s);
    return Eigen::RowVectorXd::Constant(paths, clamp_output(s));
  }
  const NetworkLayout& layout = policy.layout();
  if (static_cast<std::size_t>(inputs.rows()) != layout.input) {
    throw InvalidArgument("forward_u: inputs have " + std::to_string(inputs.rows()) +
                          " rows, network expects " + std::to_string(layout.input));
  }
  const BlockOffsets& o = policy.offsets();
  const auto w = layout.widths();
  const auto block = policy.block(n);

  Eigen::MatrixXd a = inputs;
  if (layout.bn_at(0)) batch_norm_forward(policy, n, 0, mode, a, cache);
  for (std::size_t k = 1; k <= 3; ++k) {
    const ConstWeights weight(block.data() + o.weight[k], static_cast<Eigen::Index>(w[k]),
                              static_cast<Eigen::Index>(w[k - 1]));
    Eigen::MatrixXd z = matmul(weight, a);
    if (cache) cache->layer_in[k] = std::move(a);
    if (layout.bn_at(k)) {
      batch_norm_forward(policy, n, k, mode, z, cache);
    } else {
      z.colwise() += ConstVec(block.data() + o.bias[k], static_cast<Eigen::Index>(w[k]));
    }
    if (k < 3) {
      a = z.cwiseMax(0.0);
    } else {
      Eigen::RowVectorXd s = z.row(0).unaryExpr(&logistic);
      if (cache) cache->logistic = s;
      return s.unaryExpr(&clamp_output);
    }
  }
  return {};
}

Eigen::MatrixXd backward_u(const StoppingPolicy& policy, std::size_t n, const StepCache& cache,
                           const Eigen::Ref<const Eigen::RowVectorXd>& upstream, std::span<double> grad) {
  if (cache.step != n) {
    throw InvalidArgument("backward_u: cache belongs to step " + std::to_string(cache.step) +
                          ", not step " + std::to_string(n));
  }
  if (grad.size() != policy.parameter_size(n)) throw InvalidArgument("backward_u: gradient block size mismatch");
  if (upstream.size() != cache.logistic.size()) throw InvalidArgument("backward_u: upstream size mismatch");
  const Eigen::RowVectorXd& s = cache.logistic;
  Eigen::MatrixXd g = upstream.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  if (!policy.has_network(n)) {
    if (policy.logit_trainable()) grad[0] += g.sum();
    return Eigen::MatrixXd::Zero(0, g.cols());
  }
  const NetworkLayout& layout = policy.layout();
  const BlockOffsets& o = policy.offsets();
  const auto w = layout.widths();
  const auto block = policy.block(n);
  for (std::size_t k = 3; k >= 1; --k) {
    if (layout.bn_at(k)) {
      batch_norm_backward(policy, n, k, cache, g, grad);
    } else {
      const Eigen::VectorXd bias_grad = g.rowwise().sum();
      VecMap(grad.data() + o.bias[k], static_cast<Eigen::Index>(w[k])) += bias_grad;
    }
    const auto rows = static_cast<Eigen::Index>(w[k]);
    const auto cols = static_cast<Eigen::Index>(w[k - 1]);
    Eigen::Map<RowMajor>(grad.data() + o.weight[k], rows, cols) += matmul_nt(g, cache.layer_in[k]);
    const ConstWeights weight(block.data() + o.weight[k], rows, cols);
    g = matmul_tn(weight, g);
    if (k > 1) g = g.cwiseProduct((cache.layer_in[k].array() > 0.0).cast<double>().matrix());
  }
  if (layout.bn_at(0)) batch_norm_backward(policy, n, 0, cache, g, grad);
  return g;
}

void update_running_stats(StoppingPolicy& policy, std::size_t n, const BatchStatistics& batch) {
  if (!policy.has_network(n)) return;
  const NetworkLayout& layout = policy.layout();
  const BlockOffsets& o = policy.offsets();
  const double momentum = layout.bn_momentum;
  auto stats = policy.statistics().subspan(policy.statistic_offset(n), o.statistics);
  const auto w = layout.widths();
  for (std::size_t site = 0; site < 4; ++site) {
    if (!layout.bn_at(site)) continue;
    const auto rows = static_cast<Eigen::Index>(w[site]);
    if (batch.mean[site].size() != rows || batch.var[site].size() != rows) {
      throw InvalidArgument("update_running_stats: batch statistics missing for site " + std::to_string(site));
    }
    VecMap mean(stats.data() + o.mean[site], rows);
    VecMap var(stats.data() + o.var[site], rows);
    mean = momentum * mean + (1.0 - momentum) * batch.mean[site];
    var = (momentum * var + (1.0 - momentum) * batch.var[site]).cwiseMax(0.0);
  }
}

namespace {

constexpr char kMagic[8] = {'O', 'P', 'T', 'S', 'T', 'O', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InvalidArgument("load_policy: truncated record");
  return v;
}

}  // namespace

void save_policy(const StoppingPolicy& policy, std::ostream& out) {
  const NetworkLayout& l = policy.layout();
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, l.input);
  put<std::uint64_t>(out, l.hidden1);
  put<std::uint64_t>(out, l.hidden2);
  put<std::uint8_t>(out, l.bn_input);
  put<std::uint8_t>(out, l.bn_hidden);
  put<std::uint8_t>(out, l.bn_output);
  put<double>(out, l.bn_eps);
  put<double>(out, l.bn_momentum);
  put<std::uint64_t>(out, policy.steps());
  put<std::uint8_t>(out, policy.deterministic_start());
  put<std::uint8_t>(out, policy.logit_trainable());
  put<std::uint64_t>(out, policy.parameter_count());
  out.write(reinterpret_cast<const char*>(policy.parameters().data()),
            static_cast<std::streamsize>(policy.parameter_count() * sizeof(double)));
  put<std::uint64_t>(out, policy.statistic_count());
  out.write(reinterpret_cast<const char*>(policy.statistics().data()),
            static_cast<std::streamsize>(policy.statistic_count() * sizeof(double)));
  put<std::uint64_t>(out, policy.counter());
  if (!out) throw std::runtime_error("save_policy: write failed");
}

StoppingPolicy load_policy(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw InvalidArgument("load_policy: not a policy record");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw InvalidArgument("load_policy: unsupported version " + std::to_string(version));
  NetworkLayout l;
  l.input = get<std::uint64_t>(in);
  l.hidden1 = get<std::uint64_t>(in);
  l.hidden2 = get<std::uint64_t>(in);
  l.bn_input = get<std::uint8_t>(in) != 0;
  l.bn_hidden = get<std::uint8_t>(in) != 0;
  l.bn_output = get<std::uint8_t>(in) != 0;
  l.bn_eps = get<double>(in);
  l.bn_momentum = get<double>(in);
  const auto steps = get<std::uint64_t>(in);
  const bool deterministic = get<std::uint8_t>(in) != 0;
  const bool trainable = get<std::uint8_t>(in) != 0;
  StoppingPolicy policy(l, steps, deterministic);
  policy.set_logit_trainable(trainable);
  if (get<std::uint64_t>(in) != policy.parameter_count()) throw InvalidArgument("load_policy: parameter count mismatch");
  in.read(reinterpret_cast<char*>(policy.parameters().data()),
          static_cast<std::streamsize>(policy.parameter_count() * sizeof(double)));
  if (get<std::uint64_t>(in) != policy.statistic_count()) throw InvalidArgument("load_policy: statistic count mismatch");
  in.read(reinterpret_cast<char*>(policy.statistics().data()),
          static_cast<std::streamsize>(policy.statistic_count() * sizeof(double)));
  policy.set_counter(get<std::uint64_t>(in));
  return policy;
}

void save_policy(const StoppingPolicy& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  save_policy(policy, out);
}

StoppingPolicy load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  return load_policy(in);
}

}  // namespace optstop
