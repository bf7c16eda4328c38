#include "leafstress/optim.hpp"

namespace leafstress {

void SgdConfig::validate(bool frozen_ok) const {
  if (!(lr0 > 0.0 || (frozen_ok && lr0 == 0.0))) throw Error(ErrorKind::InvalidConfig, "lr0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorKind::InvalidConfig, "momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw Error(ErrorKind::InvalidConfig, "weight decay must be non-negative");
  if (epochs == 0 || batch_size == 0) throw Error(ErrorKind::InvalidConfig, "epochs and batch size must be positive");
}

void sgd_step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads, std::vector<Tensor>& velocity,
              const SgdConfig& cfg, double lr) {
  if (grads.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "gradient count does not match parameters");
  if (velocity.empty())
    for (const auto& p : params) velocity.emplace_back(p.tensor->shape());
  if (velocity.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "velocity count does not match parameters");
  const float mu = static_cast<float>(cfg.momentum);
  const float rate = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].tensor;
    if (grads[i].shape() != w.shape() || velocity[i].shape() != w.shape())
      throw Error(ErrorKind::ShapeMismatch, "shape mismatch for " + params[i].name);
    const float decay = params[i].decay ? static_cast<float>(cfg.weight_decay) : 0.0f;
    auto pw = w.data();
    auto pv = velocity[i].data();
    auto pg = grads[i].data();
    for (std::size_t k = 0; k < pw.size(); ++k) {
      pv[k] = mu * pv[k] + (pg[k] + decay * pw[k]);
      pw[k] -= rate * pv[k];
    }
  }
}

double lr_at_epoch(const LrSchedule& schedule, double lr0, std::size_t epoch, std::size_t epochs) {
  if (epoch >= epochs)
    throw Error(ErrorKind::OutOfRange, "epoch " + std::to_string(epoch) + " outside [0," + std::to_string(epochs) + ")");
  const std::size_t period = schedule.period ? schedule.period : std::max<std::size_t>(1, epochs / 5);
  const std::size_t decays = epoch / period;
  double divisor = 1.0;
  for (std::size_t i = 0; i < decays; ++i) divisor *= ((i % 2 == 0) == schedule.half_first) ? 2.0 : 5.0;
  return lr0 / divisor;
}

}  // namespace leafstress
