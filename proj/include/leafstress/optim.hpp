#pragma once

#include <vector>

#include "leafstress/model.hpp"

namespace leafstress {

struct SgdConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;

  /// `frozen_ok` admits lr0 = 0 (a run that must leave weights untouched).
  void validate(bool frozen_ok = false) const;
};

/// v ← μ·v + (g + λ·w); w ← w − lr·v. Decay applies only to refs with `decay`.
/// `velocity` is sized on first use.
void sgd_step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads, std::vector<Tensor>& velocity,
              const SgdConfig& cfg, double lr);

struct LrSchedule {
  /// Epochs between decays; 0 means epochs / 5.
  std::size_t period = 0;
  /// Decay factors alternate ½, ⅕, ½, … when true; ⅕, ½, ⅕, … otherwise.
  bool half_first = true;
};

/// Piecewise constant lr0 / d with d drawn from the cumulative products
/// 1, 2, 10, 20, 100, … (integer divisors keep the values exact).
double lr_at_epoch(const LrSchedule& schedule, double lr0, std::size_t epoch, std::size_t epochs);

}  // namespace leafstress
