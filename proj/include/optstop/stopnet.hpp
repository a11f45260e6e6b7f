#pragma once

#include "optstop/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace optstop {

/// Precision used for the affine matrix products. Parameters, batch
/// statistics and optimizer state are always double.
enum class Precision { kDouble, kSingle };
void set_precision(Precision p);
Precision precision();

/// Two hidden layers, scalar logistic output. Batch normalisation sites:
/// 0 on the raw input, 1 and 2 before each ReLU, 3 before the logistic.
struct NetworkLayout {
  std::size_t input = 1;
  std::size_t hidden1 = 41;
  std::size_t hidden2 = 41;
  bool bn_input = true;
  bool bn_hidden = true;
  bool bn_output = true;
  double bn_eps = 1e-6;
  double bn_momentum = 0.99;

  /// Default widths d + 40.
  static NetworkLayout for_dimension(std::size_t d);

  std::array<std::size_t, 4> widths() const { return {input, hidden1, hidden2, 1}; }
  bool bn_at(std::size_t site) const;
  std::size_t parameter_count() const;
  std::size_t statistic_count() const;

  bool operator==(const NetworkLayout&) const = default;
};

/// Offsets of every tensor inside one step's parameter / statistic block.
/// Parameter order per step (all row-major):
///   bn0.scale[d] bn0.shift[d]
///   w1[h1 x d] (b1[h1] when site 1 has no BN) bn1.scale[h1] bn1.shift[h1]
///   w2[h2 x h1] (b2[h2] when site 2 has no BN) bn2.scale[h2] bn2.shift[h2]
///   w3[1 x h2] (b3 when site 3 has no BN) bn3.scale bn3.shift
/// BN tensors are present only at enabled sites. Statistics per step:
///   mean0 var0 mean1 var1 mean2 var2 mean3 var3 (enabled sites only).
struct BlockOffsets {
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::array<std::size_t, 4> bn_scale{kNone, kNone, kNone, kNone};
  std::array<std::size_t, 4> bn_shift{kNone, kNone, kNone, kNone};
  std::array<std::size_t, 4> weight{kNone, kNone, kNone, kNone};  // index 1..3
  std::array<std::size_t, 4> bias{kNone, kNone, kNone, kNone};    // index 1..3
  std::array<std::size_t, 4> mean{kNone, kNone, kNone, kNone};
  std::array<std::size_t, 4> var{kNone, kNone, kNone, kNone};
  std::size_t parameters = 0;
  std::size_t statistics = 0;

  static BlockOffsets for_layout(const NetworkLayout& layout);
  bool operator==(const BlockOffsets&) const = default;
};

/// Networks for steps 0..N-1 plus their batch-norm running statistics.
/// With a deterministic start, step 0 is a single logit instead of a network.
class StoppingPolicy {
 public:
  StoppingPolicy() = default;
  StoppingPolicy(const NetworkLayout& layout, std::size_t steps, bool deterministic_start);

  const NetworkLayout& layout() const { return layout_; }
  const BlockOffsets& offsets() const { return offsets_; }
  std::size_t steps() const { return steps_; }
  bool deterministic_start() const { return deterministic_start_; }
  bool has_network(std::size_t n) const { return n > 0 || !deterministic_start_; }

  bool logit_trainable() const { return logit_trainable_; }
  void set_logit_trainable(bool v) { logit_trainable_ = v; }

  std::size_t parameter_count() const { return params_.size(); }
  std::size_t statistic_count() const { return stats_.size(); }
  std::size_t parameter_offset(std::size_t n) const;
  std::size_t parameter_size(std::size_t n) const;
  std::size_t statistic_offset(std::size_t n) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> statistics() { return stats_; }
  std::span<const double> statistics() const { return stats_; }
  std::span<double> block(std::size_t n) { return {params_.data() + parameter_offset(n), parameter_size(n)}; }
  std::span<const double> block(std::size_t n) const {
    return {params_.data() + parameter_offset(n), parameter_size(n)};
  }

  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

  bool operator==(const StoppingPolicy&) const = default;

 private:
  NetworkLayout layout_;
  BlockOffsets offsets_;
  std::size_t steps_ = 0;
  bool deterministic_start_ = true;
  bool logit_trainable_ = true;
  // Aligned storage: vectorised kernels then peel the same way on every copy.
  std::vector<double, Eigen::aligned_allocator<double>> params_;
  std::vector<double, Eigen::aligned_allocator<double>> stats_;
  std::uint64_t counter_ = 0;
};

/// Xavier-uniform weights, zero biases, BN scale 1 / shift 0, running
/// mean 0 / variance 1, counter 0, step-0 logit 0.
StoppingPolicy init_policy(const NetworkLayout& layout, std::size_t steps, const RngStream& rng,
                           bool deterministic_start);

enum class Mode { kTrain, kEval };

/// Per-site batch mean and biased variance from a train-mode forward pass.
struct BatchStatistics {
  std::array<Eigen::VectorXd, 4> mean;
  std::array<Eigen::VectorXd, 4> var;
};

/// Activations kept by a train-mode forward pass for the backward pass.
struct StepCache {
  std::size_t step = static_cast<std::size_t>(-1);
  std::array<Eigen::MatrixXd, 4> xhat;     // normalised values at each BN site
  std::array<Eigen::VectorXd, 4> inv_std;  // 1 / sqrt(var + eps)
  std::array<Eigen::MatrixXd, 4> layer_in;  // input of affine k (k = 1..3)
  Eigen::RowVectorXd logistic;             // unclamped output
  BatchStatistics stats;
};

inline constexpr double kOutputClamp = 1e-12;

/// u_n for every column of `inputs` (d x J, one path per column). Train
/// mode normalises with batch statistics and, when `cache` is given, keeps
/// what backward_u needs. Eval mode uses the running statistics and falls
/// back to batch statistics with a warning while the counter is 0.
/// Output is clamped to [1e-12, 1 - 1e-12].
Eigen::RowVectorXd forward_u(const StoppingPolicy& policy, std::size_t n,
                             const Eigen::Ref<const Eigen::MatrixXd>& inputs, Mode mode,
                             StepCache* cache = nullptr);

/// Reverse pass for step n. Accumulates d(objective)/d(parameters) of this
/// step into `grad_block` (size parameter_size(n)) and returns the gradient
/// with respect to the inputs (d x J).
Eigen::MatrixXd backward_u(const StoppingPolicy& policy, std::size_t n, const StepCache& cache,
                           const Eigen::Ref<const Eigen::RowVectorXd>& upstream,
                           std::span<double> grad_block);

/// Running statistics of step n <- momentum * running + (1 - momentum) * batch.
void update_running_stats(StoppingPolicy& policy, std::size_t n, const BatchStatistics& batch);

/// Writes/reads the versioned binary policy record (see README).
void save_policy(const StoppingPolicy& policy, std::ostream& out);
StoppingPolicy load_policy(std::istream& in);
void save_policy(const StoppingPolicy& policy, const std::string& path);
StoppingPolicy load_policy(const std::string& path);

}  // namespace optstop
