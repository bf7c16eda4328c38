#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "leafstress/augment.hpp"
#include "leafstress/checkpoint.hpp"
#include "leafstress/metrics.hpp"
#include "leafstress/model.hpp"
#include "leafstress/optim.hpp"

namespace leafstress {

struct TrainConfig {
  SgdConfig sgd;
  LrSchedule schedule;
  AugmentConfig augment;
  bool augment_enabled = true;  // standard augmentation; mixup follows augment.mixup_enabled
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_loss_stress = 0.0;
  double train_loss_severity = 0.0;
  double train_acc_stress = 0.0;
  double train_acc_severity = 0.0;
  double val_loss = 0.0;
  double val_loss_stress = 0.0;
  double val_loss_severity = 0.0;
  double val_acc_stress = 0.0;
  double val_acc_severity = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  TaskMode mode = TaskMode::multi_task;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
};

struct TrainResult {
  TrainReport report;
  Checkpoint best;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Shuffles with a stream keyed by (seed, epoch), augments sample k with a
/// stream keyed by (seed, epoch, k) and mixes batch b with one keyed by
/// (seed, epoch, b). A trailing single-sample batch joins the previous batch.
/// The returned checkpoint is the epoch with the lowest validation loss
/// (earliest on ties); `net` is left at the final epoch's weights.
TrainResult train(MultiTaskNet& net, const std::vector<LabeledSample>& train_set,
                  const std::vector<LabeledSample>& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct EvalResult {
  double loss = 0.0;
  double loss_stress = 0.0;
  double loss_severity = 0.0;
  std::optional<ConfusionMatrix> stress;
  std::optional<ConfusionMatrix> severity;
  Tensor64 features;  // [n, F]
};

/// Eval-mode pass in chunks of `batch_size`; losses are sample means.
EvalResult evaluate(MultiTaskNet& net, const std::vector<LabeledSample>& samples, std::size_t batch_size = 32);

Tensor stack_images(const std::vector<LabeledSample>& samples, std::span<const std::size_t> indices);

/// One row per epoch; columns of an absent head are left empty.
void write_train_report(const std::filesystem::path& path, const TrainReport& report);

}  // namespace leafstress
