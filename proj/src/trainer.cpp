#include "leafstress/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace leafstress {

namespace {

constexpr std::uint64_t kShuffleTag = 0x53485546;  // "SHUF"
constexpr std::uint64_t kAugmentTag = 0x4155474d;  // "AUGM"
constexpr std::uint64_t kMixupTag = 0x4d495855;    // "MIXU"

Tensor stack_targets(const std::vector<LabeledSample>& samples, std::span<const std::size_t> idx, bool severity) {
  Tensor t({idx.size(), kNumClasses});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& s = samples[idx[r]];
    const LabelVector& v = severity ? *s.y_severity : s.y_stress;
    std::copy(v.begin(), v.end(), t.data().begin() + r * kNumClasses);
  }
  return t;
}

std::size_t count_correct(const Tensor& logits, const Tensor& targets) {
  std::size_t hits = 0;
  const std::size_t k = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    const auto row = logits.data().subspan(r * k, k);
    const auto tgt = targets.data().subspan(r * k, k);
    hits += argmax<float>(row) == argmax<float>(tgt);
  }
  return hits;
}

void check_labels(const MultiTaskNet& net, const std::vector<LabeledSample>& samples, const char* which) {
  if (!has_severity_head(net.mode())) return;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!samples[i].y_severity)
      throw Error(ErrorKind::LabelMissing, std::string(which) + " sample " + std::to_string(i) + " has no severity label");
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + i, order.begin() + std::min(order.size(), i + batch_size));
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

}  // namespace

Tensor stack_images(const std::vector<LabeledSample>& samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorKind::EmptyDataset, "cannot stack an empty batch");
  const Shape& s0 = samples[indices[0]].image.shape();
  Shape shape{indices.size()};
  shape.insert(shape.end(), s0.begin(), s0.end());
  Tensor out(shape);
  const std::size_t per = shape_size(s0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& img = samples[indices[r]].image;
    if (img.shape() != s0) throw Error(ErrorKind::ShapeMismatch, "images in a batch differ in shape");
    std::copy(img.data().begin(), img.data().end(), out.data().begin() + r * per);
  }
  return out;
}

EvalResult evaluate(MultiTaskNet& net, const std::vector<LabeledSample>& samples, std::size_t batch_size) {
  if (samples.empty()) throw Error(ErrorKind::EmptyDataset, "nothing to evaluate");
  if (batch_size == 0) throw Error(ErrorKind::InvalidParameter, "batch size must be positive");
  check_labels(net, samples, "evaluation");
  const bool st = has_stress_head(net.mode()), sv = has_severity_head(net.mode());
  EvalResult r;
  if (st) r.stress.emplace(kNumClasses);
  if (sv) r.severity.emplace(kNumClasses);
  r.features = Tensor64({samples.size(), net.config().feature_dim()});
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::span<const std::size_t> chunk(idx.data() + start, std::min(batch_size, samples.size() - start));
    const auto out = net.forward(stack_images(samples, chunk), Phase::eval);
    const Tensor ts = stack_targets(samples, chunk, false);
    const Tensor tv = sv ? stack_targets(samples, chunk, true) : Tensor();
    const auto loss = multitask_loss(out, &ts, sv ? &tv : nullptr);
    const double w = double(chunk.size());
    r.loss_stress += loss.stress * w;
    r.loss_severity += loss.severity * w;
    const std::size_t f = out.features.dim(1);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      for (std::size_t k = 0; k < f; ++k) r.features.at(chunk[i], k) = out.features.at(i, k);
      auto update = [&](ConfusionMatrix& cm, const Tensor& logits, const Tensor& tgt) {
        cm.update(argmax<float>(tgt.data().subspan(i * kNumClasses, kNumClasses)),
                  argmax<float>(logits.data().subspan(i * kNumClasses, kNumClasses)));
      };
      if (st) update(*r.stress, *out.logits_stress, ts);
      if (sv) update(*r.severity, *out.logits_severity, tv);
    }
  }
  r.loss_stress /= double(samples.size());
  r.loss_severity /= double(samples.size());
  r.loss = r.loss_stress + r.loss_severity;
  return r;
}

TrainResult train(MultiTaskNet& net, const std::vector<LabeledSample>& train_set,
                  const std::vector<LabeledSample>& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.sgd.validate(true);
  cfg.augment.validate();
  if (train_set.empty() || val_set.empty()) throw Error(ErrorKind::EmptyDataset, "training and validation sets must be non-empty");
  if (train_set.size() < 2) throw Error(ErrorKind::BatchTooSmall, "batch norm needs at least two training samples");
  check_labels(net, train_set, "training");
  check_labels(net, val_set, "validation");

  const bool st = has_stress_head(net.mode()), sv = has_severity_head(net.mode());
  const auto params = net.parameters();
  std::vector<Tensor> velocity;
  TrainResult result;
  result.report.mode = net.mode();
  double best_loss = std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (std::size_t epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at_epoch(cfg.schedule, cfg.sgd.lr0, epoch, cfg.sgd.epochs);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle(cfg.seed, stream_key({kShuffleTag, epoch}));
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[shuffle.uniform_index(i + 1)]);

    const auto batches = make_batches(order, cfg.sgd.batch_size);
    std::size_t correct_st = 0, correct_sv = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<LabeledSample> batch;
      batch.reserve(batches[b].size());
      for (std::size_t k : batches[b]) {
        if (cfg.augment_enabled) {
          RngStream rng(cfg.seed, stream_key({kAugmentTag, epoch, k}));
          batch.push_back(standard_augment(train_set[k], cfg.augment, rng));
        } else {
          batch.push_back(train_set[k]);
        }
      }
      if (cfg.augment.mixup_enabled) {
        RngStream rng(cfg.seed, stream_key({kMixupTag, epoch, b}));
        batch = mixup_batch(batch, cfg.augment.mixup_alpha, rng, cfg.augment.mixup_heads);
      }
      std::vector<std::size_t> local(batch.size());
      std::iota(local.begin(), local.end(), std::size_t{0});
      ForwardCache cache;
      const auto out = net.forward(stack_images(batch, local), Phase::train, &cache);
      const Tensor ts = stack_targets(batch, local, false);
      const Tensor tv = sv ? stack_targets(batch, local, true) : Tensor();
      const auto loss = multitask_loss(out, &ts, sv ? &tv : nullptr);
      const auto grads = net.backward(cache, loss.grad_stress ? &*loss.grad_stress : nullptr,
                                      loss.grad_severity ? &*loss.grad_severity : nullptr);
      sgd_step(params, grads, velocity, cfg.sgd, rec.lr);

      const double w = double(batch.size());
      rec.train_loss_stress += loss.stress * w;
      rec.train_loss_severity += loss.severity * w;
      if (st) correct_st += count_correct(*out.logits_stress, ts);
      if (sv) correct_sv += count_correct(*out.logits_severity, tv);
    }
    const double n = double(train_set.size());
    rec.train_loss_stress /= n;
    rec.train_loss_severity /= n;
    rec.train_loss = rec.train_loss_stress + rec.train_loss_severity;
    rec.train_acc_stress = double(correct_st) / n;
    rec.train_acc_severity = double(correct_sv) / n;

    const auto val = evaluate(net, val_set, cfg.sgd.batch_size);
    rec.val_loss = val.loss;
    rec.val_loss_stress = val.loss_stress;
    rec.val_loss_severity = val.loss_severity;
    if (val.stress) rec.val_acc_stress = accuracy(*val.stress);
    if (val.severity) rec.val_acc_severity = accuracy(*val.severity);

    if (!have_best || rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      have_best = true;
      result.report.best_epoch = epoch;
      result.best = snapshot(net, epoch, rec.val_loss);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void write_train_report(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  const bool st = has_stress_head(report.mode), sv = has_severity_head(report.mode);
  out << "epoch,lr,train_loss,train_loss_stress,train_loss_severity,train_acc_stress,train_acc_severity,"
         "val_loss,val_loss_stress,val_loss_severity,val_acc_stress,val_acc_severity,seconds,best\n";
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : report.epochs) {
    out << r.epoch << ',' << num(r.lr) << ',' << num(r.train_loss) << ',' << (st ? num(r.train_loss_stress) : "")
        << ',' << (sv ? num(r.train_loss_severity) : "") << ',' << (st ? num(r.train_acc_stress) : "") << ','
        << (sv ? num(r.train_acc_severity) : "") << ',' << num(r.val_loss) << ','
        << (st ? num(r.val_loss_stress) : "") << ',' << (sv ? num(r.val_loss_severity) : "") << ','
        << (st ? num(r.val_acc_stress) : "") << ',' << (sv ? num(r.val_acc_severity) : "") << ','
        << num(r.seconds) << ',' << (r.epoch == report.best_epoch ? 1 : 0) << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace leafstress
