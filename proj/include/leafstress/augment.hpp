#pragma once

#include <array>
#include <optional>
#include <vector>

#include "leafstress/labels.hpp"
#include "leafstress/rng.hpp"
#include "leafstress/tensor.hpp"

namespace leafstress {

using LabelVector = std::array<float, kNumClasses>;

LabelVector one_hot(std::size_t index);

struct LabeledSample {
  Tensor image;  // [3, H, W], values in [0, 1]
  LabelVector y_stress{};
  std::optional<LabelVector> y_severity;
};

enum class MixupHeads { both, stress_only, severity_only };

struct AugmentConfig {
  double hflip_prob = 0.5;
  double vflip_prob = 0.5;
  double rotation_range_deg = 30.0;
  double brightness_jitter = 0.2;
  double contrast_jitter = 0.2;
  double saturation_jitter = 0.2;
  bool mixup_enabled = false;
  double mixup_alpha = 0.2;
  MixupHeads mixup_heads = MixupHeads::both;

  /// Throws InvalidConfig when a probability, range or alpha is out of bounds.
  void validate() const;
};

enum class GeometricOp { hflip, vflip, rotate };

Tensor hflip(const Tensor& img);
Tensor vflip(const Tensor& img);
/// Counter-clockwise rotation (as displayed, rows growing downward) about the
/// image centre with bilinear sampling; samples outside the image take `fill`.
Tensor rotate(const Tensor& img, double degrees, std::array<float, 3> fill = {1.0f, 1.0f, 1.0f});
Tensor geometric(const Tensor& img, GeometricOp op, double degrees = 0.0,
                 std::array<float, 3> fill = {1.0f, 1.0f, 1.0f});

struct JitterFactors {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
};

Tensor color_jitter(const Tensor& img, JitterFactors f);

/// Uniform draws consumed from the stream by `standard_augment`, in order:
/// hflip coin, vflip coin, angle, brightness, contrast, saturation.
inline constexpr std::size_t kAugmentDraws = 6;

LabeledSample standard_augment(const LabeledSample& sample, const AugmentConfig& cfg, RngStream& stream);

/// λ·a + (1 − λ)·b on the image and on each selected head present in both.
LabeledSample mix_pair(const LabeledSample& a, const LabeledSample& b, double lambda,
                       MixupHeads heads = MixupHeads::both);

/// Draws a Fisher-Yates partner permutation (n - 1 draws) followed by n
/// Beta(alpha, alpha) weights.
std::vector<LabeledSample> mixup_batch(const std::vector<LabeledSample>& batch, double alpha, RngStream& stream,
                                       MixupHeads heads = MixupHeads::both);

}  // namespace leafstress
