#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "leafstress/layers.hpp"
#include "leafstress/rng.hpp"

namespace leafstress {

enum class TaskMode { single_task_stress, single_task_severity, multi_task };

std::string_view to_string(TaskMode m);
std::optional<TaskMode> parse_task_mode(std::string_view s);
inline bool has_stress_head(TaskMode m) { return m != TaskMode::single_task_severity; }
inline bool has_severity_head(TaskMode m) { return m != TaskMode::single_task_stress; }

struct ArchConfig {
  std::size_t stem_width = 16;
  std::vector<std::size_t> stage_widths{16, 32, 64};
  std::vector<std::size_t> blocks_per_stage{1, 1, 1};
  std::string block_kind = "basic";
  std::size_t input_size = 224;
  std::size_t num_classes = 5;
  TaskMode mode = TaskMode::multi_task;

  void validate() const;
  std::size_t feature_dim() const { return stage_widths.back(); }
  /// Canonical text form; two configs describe the same network iff equal.
  std::string canonical() const;
  /// FNV-1a 64 of `canonical()`.
  std::uint64_t fingerprint() const;
};

struct ConvBn {
  Conv2dParams<float> conv;
  BatchNormParams<float> bn;
};

struct ResidualBlock {
  ConvBn a;
  ConvBn b;
  std::optional<ConvBn> proj;  // 1×1 projection when the shape changes
};

struct NetParams {
  ConvBn stem;
  std::vector<ResidualBlock> blocks;
  std::optional<DenseParams<float>> head_stress;
  std::optional<DenseParams<float>> head_severity;
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
  bool decay;  // false for biases and batch-norm affine parameters
  bool trunk;
};

struct ConvBnCache {
  Tensor input;
  BatchNormCache<float> bn;
  Tensor output;
};

struct BlockCache {
  ConvBnCache a;
  ConvBnCache b;
  std::optional<ConvBnCache> proj;
  Tensor output;
};

struct ForwardCache {
  ConvBnCache stem;
  std::vector<BlockCache> blocks;
  Tensor features;
};

struct ForwardResult {
  std::optional<Tensor> logits_stress;    // [N, 5]
  std::optional<Tensor> logits_severity;  // [N, 5]
  Tensor features;                        // [N, F] post-pool activations
};

/// Shared convolutional trunk with one or two dense classification heads.
class MultiTaskNet {
 public:
  /// He-normal conv weights, zero biases, gamma 1 / beta 0; init draws come
  /// from streams keyed by (seed, parameter index).
  MultiTaskNet(ArchConfig cfg, std::uint64_t seed);

  const ArchConfig& config() const noexcept { return cfg_; }
  TaskMode mode() const noexcept { return cfg_.mode; }

  /// Trainable tensors in a fixed order (trunk first, then heads).
  std::vector<ParamRef> parameters();
  /// Trainable tensors plus batch-norm running statistics, for checkpoints.
  std::vector<std::pair<std::string, Tensor*>> state();

  std::size_t parameter_count();
  std::size_t trunk_parameter_count();

  /// `images` is [N, 3, H, W] with H and W divisible by 8.
  ForwardResult forward(const Tensor& images, Phase phase, ForwardCache* cache = nullptr);

  /// Gradients aligned with `parameters()`. Either upstream gradient may be
  /// null, in which case that head contributes nothing.
  std::vector<Tensor> backward(const ForwardCache& cache, const Tensor* grad_stress, const Tensor* grad_severity);

  NetParams& params() noexcept { return p_; }

 private:
  ArchConfig cfg_;
  NetParams p_;
};

struct MultiTaskLoss {
  double total = 0.0;
  double stress = 0.0;
  double severity = 0.0;
  std::optional<Tensor> grad_stress;
  std::optional<Tensor> grad_severity;
};

/// Equal-weight sum of the per-head soft-target cross-entropies.
MultiTaskLoss multitask_loss(const ForwardResult& out, const Tensor* targets_stress, const Tensor* targets_severity);

}  // namespace leafstress
