#include "leafstress/model.hpp"

#include <cmath>
#include <sstream>

namespace leafstress {

namespace {

constexpr std::uint64_t kInitTag = 0x494e4954;  // "INIT"

template <typename P, typename F>
void visit_conv_bn(P& cb, const std::string& prefix, bool trunk, F&& f) {
  f(prefix + ".conv.weight", cb.conv.weight, true, trunk);
  f(prefix + ".conv.bias", cb.conv.bias, false, trunk);
  f(prefix + ".bn.gamma", cb.bn.gamma, false, trunk);
  f(prefix + ".bn.beta", cb.bn.beta, false, trunk);
}

// Visits the trainable tensors of `p` in canonical order.
template <typename F>
void visit_params(NetParams& p, F&& f) {
  visit_conv_bn(p.stem, "stem", true, f);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const std::string name = "block" + std::to_string(i);
    visit_conv_bn(p.blocks[i].a, name + ".a", true, f);
    visit_conv_bn(p.blocks[i].b, name + ".b", true, f);
    if (p.blocks[i].proj) visit_conv_bn(*p.blocks[i].proj, name + ".proj", true, f);
  }
  if (p.head_stress) {
    f("head_stress.weight", p.head_stress->weight, true, false);
    f("head_stress.bias", p.head_stress->bias, false, false);
  }
  if (p.head_severity) {
    f("head_severity.weight", p.head_severity->weight, true, false);
    f("head_severity.bias", p.head_severity->bias, false, false);
  }
}

template <typename F>
void visit_buffers(NetParams& p, F&& f) {
  auto bn = [&](ConvBn& cb, const std::string& prefix) {
    f(prefix + ".bn.running_mean", cb.bn.running_mean);
    f(prefix + ".bn.running_var", cb.bn.running_var);
  };
  bn(p.stem, "stem");
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const std::string name = "block" + std::to_string(i);
    bn(p.blocks[i].a, name + ".a");
    bn(p.blocks[i].b, name + ".b");
    if (p.blocks[i].proj) bn(*p.blocks[i].proj, name + ".proj");
  }
}

ConvBn make_conv_bn(std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t stride) {
  ConvBn cb;
  cb.conv.weight = Tensor({c_out, c_in, k, k});
  cb.conv.bias = Tensor({c_out});
  cb.conv.stride = stride;
  cb.conv.padding = k / 2;
  cb.bn = BatchNormParams<float>::make(c_out);
  return cb;
}

Tensor conv_bn_forward(const Tensor& x, ConvBn& cb, Phase phase, bool relu, ConvBnCache* cache) {
  Tensor y = batchnorm2d_forward(conv2d_forward(x, cb.conv), cb.bn, phase, cache ? &cache->bn : nullptr);
  if (relu) y = relu_forward(y);
  if (cache) {
    cache->input = x;
    cache->output = y;
  }
  return y;
}

// Returns the gradient w.r.t. the block input and stores parameter gradients in `g`.
Tensor conv_bn_backward(const ConvBnCache& cache, const ConvBn& cb, bool relu, Tensor grad, ConvBn& g) {
  if (relu) grad = relu_backward(cache.output, grad);
  auto bn = batchnorm2d_backward(cache.bn, cb.bn, grad);
  auto conv = conv2d_backward(cache.input, cb.conv, bn.grad_x);
  g.bn.gamma = std::move(bn.grad_gamma);
  g.bn.beta = std::move(bn.grad_beta);
  g.conv.weight = std::move(conv.grad_w);
  g.conv.bias = std::move(conv.grad_b);
  return std::move(conv.grad_x);
}

void add_into(Tensor& acc, const Tensor& v) {
  auto a = acc.data();
  auto b = v.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

std::string_view to_string(TaskMode m) {
  switch (m) {
    case TaskMode::single_task_stress: return "single_task_stress";
    case TaskMode::single_task_severity: return "single_task_severity";
    case TaskMode::multi_task: return "multi_task";
  }
  return "?";
}

std::optional<TaskMode> parse_task_mode(std::string_view s) {
  for (auto m : {TaskMode::single_task_stress, TaskMode::single_task_severity, TaskMode::multi_task})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

void ArchConfig::validate() const {
  if (block_kind != "basic") throw Error(ErrorKind::InvalidConfig, "unknown block kind '" + block_kind + "'");
  if (stem_width == 0 || num_classes == 0) throw Error(ErrorKind::InvalidConfig, "widths must be positive");
  if (stage_widths.empty() || stage_widths.size() != blocks_per_stage.size())
    throw Error(ErrorKind::InvalidConfig, "stage widths and blocks per stage must be non-empty and aligned");
  for (std::size_t i = 0; i < stage_widths.size(); ++i)
    if (stage_widths[i] == 0 || blocks_per_stage[i] == 0)
      throw Error(ErrorKind::InvalidConfig, "stage widths and block counts must be positive");
  const std::size_t div = std::size_t{1} << stage_widths.size();
  if (input_size == 0 || input_size % div != 0)
    throw Error(ErrorKind::InvalidConfig, "input size must be a positive multiple of " + std::to_string(div));
}

std::string ArchConfig::canonical() const {
  std::ostringstream s;
  s << "leafnet;block=" << block_kind << ";stem=" << stem_width << ";stages=";
  for (std::size_t i = 0; i < stage_widths.size(); ++i) s << (i ? "," : "") << stage_widths[i] << 'x' << blocks_per_stage[i];
  s << ";input=" << input_size << ";classes=" << num_classes << ";mode=" << to_string(mode);
  return s.str();
}

std::uint64_t ArchConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

MultiTaskNet::MultiTaskNet(ArchConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  p_.stem = make_conv_bn(3, cfg_.stem_width, 3, 1);
  std::size_t c_in = cfg_.stem_width;
  for (std::size_t s = 0; s < cfg_.stage_widths.size(); ++s)
    for (std::size_t b = 0; b < cfg_.blocks_per_stage[s]; ++b) {
      const std::size_t c_out = cfg_.stage_widths[s];
      const std::size_t stride = b == 0 ? 2 : 1;
      ResidualBlock block{make_conv_bn(c_in, c_out, 3, stride), make_conv_bn(c_out, c_out, 3, 1), std::nullopt};
      if (stride != 1 || c_in != c_out) block.proj = make_conv_bn(c_in, c_out, 1, stride);
      p_.blocks.push_back(std::move(block));
      c_in = c_out;
    }
  const std::size_t f = cfg_.feature_dim(), k = cfg_.num_classes;
  if (has_stress_head(cfg_.mode)) p_.head_stress = DenseParams<float>{Tensor({k, f}), Tensor({k})};
  if (has_severity_head(cfg_.mode)) p_.head_severity = DenseParams<float>{Tensor({k, f}), Tensor({k})};

  std::uint64_t index = 0;
  visit_params(p_, [&](const std::string& name, Tensor& t, bool decay, bool) {
    RngStream rng(seed, stream_key({kInitTag, index++}));
    if (name.ends_with(".bn.gamma")) {
      t.fill(1.0f);
    } else if (decay) {
      // Conv weights [C_out, C_in, k, k] use He fan-in; dense weights use 1/fan-in.
      const std::size_t fan_in = t.size() / t.dim(0);
      const double scale = std::sqrt((t.rank() == 4 ? 2.0 : 1.0) / double(fan_in));
      for (auto& v : t.data()) v = static_cast<float>(scale * rng.standard_normal());
    }
  });
}

std::vector<ParamRef> MultiTaskNet::parameters() {
  std::vector<ParamRef> out;
  visit_params(p_, [&](const std::string& name, Tensor& t, bool decay, bool trunk) {
    out.push_back({name, &t, decay, trunk});
  });
  return out;
}

std::vector<std::pair<std::string, Tensor*>> MultiTaskNet::state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  visit_params(p_, [&](const std::string& name, Tensor& t, bool, bool) { out.emplace_back(name, &t); });
  visit_buffers(p_, [&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::size_t MultiTaskNet::parameter_count() {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor->size();
  return n;
}

std::size_t MultiTaskNet::trunk_parameter_count() {
  std::size_t n = 0;
  for (const auto& p : parameters())
    if (p.trunk) n += p.tensor->size();
  return n;
}

ForwardResult MultiTaskNet::forward(const Tensor& images, Phase phase, ForwardCache* cache) {
  if (images.rank() != 4 || images.dim(1) != 3)
    throw Error(ErrorKind::ShapeMismatch, "expected [N,3,H,W] images, got " + shape_string(images.shape()));
  const std::size_t div = std::size_t{1} << cfg_.stage_widths.size();
  if (images.dim(2) % div != 0 || images.dim(3) % div != 0)
    throw Error(ErrorKind::ShapeMismatch, "image height and width must be divisible by " + std::to_string(div));
  if (phase == Phase::train && images.dim(0) < 2)
    throw Error(ErrorKind::BatchTooSmall, "training forward needs at least two images");

  if (cache) cache->blocks.assign(p_.blocks.size(), BlockCache{});
  Tensor h = conv_bn_forward(images, p_.stem, phase, true, cache ? &cache->stem : nullptr);
  for (std::size_t i = 0; i < p_.blocks.size(); ++i) {
    auto& blk = p_.blocks[i];
    BlockCache* bc = cache ? &cache->blocks[i] : nullptr;
    if (bc && blk.proj) bc->proj.emplace();
    Tensor main = conv_bn_forward(h, blk.a, phase, true, bc ? &bc->a : nullptr);
    main = conv_bn_forward(main, blk.b, phase, false, bc ? &bc->b : nullptr);
    if (blk.proj)
      add_into(main, conv_bn_forward(h, *blk.proj, phase, false, bc ? &*bc->proj : nullptr));
    else
      add_into(main, h);
    h = relu_forward(main);
    if (bc) bc->output = h;
  }

  ForwardResult out;
  out.features = global_avg_pool_forward(h);
  if (p_.head_stress) out.logits_stress = dense_forward(out.features, *p_.head_stress, Activation::none);
  if (p_.head_severity) out.logits_severity = dense_forward(out.features, *p_.head_severity, Activation::none);
  if (cache) cache->features = out.features;
  return out;
}

std::vector<Tensor> MultiTaskNet::backward(const ForwardCache& cache, const Tensor* grad_stress,
                                           const Tensor* grad_severity) {
  if (cache.blocks.size() != p_.blocks.size()) throw Error(ErrorKind::ShapeMismatch, "cache does not match network");
  NetParams g = p_;
  Tensor grad_features(cache.features.shape());
  auto head = [&](const std::optional<DenseParams<float>>& p, std::optional<DenseParams<float>>& gp,
                  const Tensor* upstream) {
    if (!p) return;
    if (!upstream) {
      gp->weight.fill(0.0f);
      gp->bias.fill(0.0f);
      return;
    }
    const Tensor y = dense_forward(cache.features, *p, Activation::none);
    auto d = dense_backward(cache.features, *p, Activation::none, y, *upstream);
    add_into(grad_features, d.grad_x);
    gp->weight = std::move(d.grad_w);
    gp->bias = std::move(d.grad_b);
  };
  head(p_.head_stress, g.head_stress, grad_stress);
  head(p_.head_severity, g.head_severity, grad_severity);

  const Tensor& last = cache.blocks.empty() ? cache.stem.output : cache.blocks.back().output;
  Tensor grad = global_avg_pool_backward(grad_features, last.shape());
  for (std::size_t i = p_.blocks.size(); i-- > 0;) {
    const auto& blk = p_.blocks[i];
    const auto& bc = cache.blocks[i];
    const Tensor pre = relu_backward(bc.output, grad);
    Tensor gm = conv_bn_backward(bc.b, blk.b, false, pre, g.blocks[i].b);
    gm = conv_bn_backward(bc.a, blk.a, true, gm, g.blocks[i].a);
    if (blk.proj)
      add_into(gm, conv_bn_backward(*bc.proj, *blk.proj, false, pre, *g.blocks[i].proj));
    else
      add_into(gm, pre);
    grad = std::move(gm);
  }
  conv_bn_backward(cache.stem, p_.stem, true, grad, g.stem);

  std::vector<Tensor> out;
  visit_params(g, [&](const std::string&, Tensor& t, bool, bool) { out.push_back(std::move(t)); });
  return out;
}

MultiTaskLoss multitask_loss(const ForwardResult& out, const Tensor* targets_stress, const Tensor* targets_severity) {
  MultiTaskLoss loss;
  if (out.logits_stress) {
    if (!targets_stress) throw Error(ErrorKind::LabelMissing, "stress targets required by the stress head");
    auto ce = softmax_cross_entropy(*out.logits_stress, *targets_stress);
    loss.stress = ce.loss;
    loss.grad_stress = std::move(ce.grad_logits);
  }
  if (out.logits_severity) {
    if (!targets_severity) throw Error(ErrorKind::LabelMissing, "severity targets required by the severity head");
    auto ce = softmax_cross_entropy(*out.logits_severity, *targets_severity);
    loss.severity = ce.loss;
    loss.grad_severity = std::move(ce.grad_logits);
  }
  loss.total = loss.stress + loss.severity;
  return loss;
}

}  // namespace leafstress
