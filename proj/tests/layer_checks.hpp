#pragma once

// Per-layer finite-difference checks shared by the unit and acceptance suites.
// Each returns the worst relative error over every gradient the layer emits.

#include <algorithm>
#include <random>

#include "gradcheck.hpp"
#include "leafstress/layers.hpp"

namespace leafstress::testing {

struct ConvCase {
  std::size_t n, c_in, h, w, c_out, k, stride, padding;
};

template <typename T>
double check_conv2d(const ConvCase& cs, std::mt19937_64& gen) {
  auto x = random_tensor<T>({cs.n, cs.c_in, cs.h, cs.w}, gen);
  Conv2dParams<T> p{random_tensor<T>({cs.c_out, cs.c_in, cs.k, cs.k}, gen), random_tensor<T>({cs.c_out}, gen),
                    cs.stride, cs.padding};
  const auto y = conv2d_forward(x, p);
  const auto r = random_tensor<T>(y.shape(), gen);
  const auto g = conv2d_backward(x, p, r);
  auto f = [&] { return probe(conv2d_forward(x, p), r); };
  const double h = fd_step<T>();
  return std::max({relative_error(g.grad_x, numeric_gradient<T>(f, x, h)),
                   relative_error(g.grad_w, numeric_gradient<T>(f, p.weight, h)),
                   relative_error(g.grad_b, numeric_gradient<T>(f, p.bias, h))});
}

template <typename T>
double check_batchnorm2d(Shape shape, Phase phase, std::mt19937_64& gen) {
  auto x = random_normal<T>(shape, gen, 1.5);
  const std::size_t c = shape[1];
  auto p = BatchNormParams<T>::make(c);
  p.gamma = random_tensor<T>({c}, gen, 0.5, 1.5);
  p.beta = random_tensor<T>({c}, gen);
  p.running_mean = random_tensor<T>({c}, gen);
  p.running_var = random_tensor<T>({c}, gen, 0.5, 2.0);

  BatchNormCache<T> cache;
  auto scratch = p;
  const auto y = batchnorm2d_forward(x, scratch, phase, &cache);
  const auto r = random_tensor<T>(y.shape(), gen);
  const auto g = batchnorm2d_backward(cache, p, r);
  auto f = [&] {
    auto q = p;
    return probe(batchnorm2d_forward(x, q, phase), r);
  };
  const double h = fd_step<T>();
  return std::max({relative_error(g.grad_x, numeric_gradient<T>(f, x, h)),
                   relative_error(g.grad_gamma, numeric_gradient<T>(f, p.gamma, h)),
                   relative_error(g.grad_beta, numeric_gradient<T>(f, p.beta, h))});
}

template <typename T>
double check_maxpool(Shape shape, std::mt19937_64& gen) {
  auto x = distinct_tensor<T>(shape, gen);
  const auto fwd = maxpool2x2_forward(x);
  const auto r = random_tensor<T>(fwd.output.shape(), gen);
  const auto gx = maxpool2x2_backward(r, fwd.argmax, x.shape());
  auto f = [&] { return probe(maxpool2x2_forward(x).output, r); };
  return relative_error(gx, numeric_gradient<T>(f, x, fd_step<T>()));
}

template <typename T>
double check_global_avg(Shape shape, std::mt19937_64& gen) {
  auto x = random_tensor<T>(shape, gen);
  const auto y = global_avg_pool_forward(x);
  const auto r = random_tensor<T>(y.shape(), gen);
  const auto gx = global_avg_pool_backward(r, x.shape());
  auto f = [&] { return probe(global_avg_pool_forward(x), r); };
  return relative_error(gx, numeric_gradient<T>(f, x, fd_step<T>()));
}

template <typename T>
double check_dense(std::size_t n, std::size_t in, std::size_t out, Activation act, std::mt19937_64& gen) {
  // Resample until no pre-activation sits near the ReLU kink.
  BasicTensor<T> x;
  DenseParams<T> p;
  for (;;) {
    x = random_tensor<T>({n, in}, gen);
    p = DenseParams<T>{random_tensor<T>({out, in}, gen), random_tensor<T>({out}, gen)};
    const auto pre = dense_forward(x, p, Activation::none);
    const bool clear = std::all_of(pre.data().begin(), pre.data().end(),
                                   [](T v) { return std::abs(static_cast<double>(v)) > 0.1; });
    if (act == Activation::none || clear) break;
  }
  const auto y = dense_forward(x, p, act);
  const auto r = random_tensor<T>(y.shape(), gen);
  const auto g = dense_backward(x, p, act, y, r);
  auto f = [&] { return probe(dense_forward(x, p, act), r); };
  const double h = sizeof(T) == 4 ? 1e-2 : 1e-5;
  return std::max({relative_error(g.grad_x, numeric_gradient<T>(f, x, h)),
                   relative_error(g.grad_w, numeric_gradient<T>(f, p.weight, h)),
                   relative_error(g.grad_b, numeric_gradient<T>(f, p.bias, h))});
}

template <typename T>
BasicTensor<T> random_soft_targets(std::size_t n, std::size_t k, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  BasicTensor<T> t({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(k);
    double s = 0.0;
    for (auto& v : row) s += (v = dist(gen));
    for (std::size_t j = 0; j < k; ++j) t[i * k + j] = static_cast<T>(row[j] / s);
  }
  return t;
}

template <typename T>
double check_softmax_ce(std::size_t n, std::size_t k, std::mt19937_64& gen) {
  auto z = random_tensor<T>({n, k}, gen, -3.0, 3.0);
  const auto t = random_soft_targets<T>(n, k, gen);
  const auto res = softmax_cross_entropy(z, t);
  auto f = [&] { return softmax_cross_entropy(z, t).loss; };
  return relative_error(res.grad_logits, numeric_gradient<T>(f, z, fd_step<T>()));
}

// Five shapes per layer, mixing strides, paddings, odd sizes and batch sizes.
inline const std::vector<ConvCase>& conv_cases() {
  static const std::vector<ConvCase> cases = {
      {2, 3, 8, 8, 4, 3, 1, 1}, {1, 2, 7, 5, 3, 3, 2, 1}, {2, 4, 6, 6, 2, 1, 2, 0},
      {3, 1, 5, 5, 2, 2, 1, 0}, {2, 2, 9, 7, 3, 3, 3, 2},
  };
  return cases;
}

inline const std::vector<Shape>& bn_shapes() {
  static const std::vector<Shape> s = {{2, 3, 4, 4}, {4, 2, 3, 3}, {2, 5, 2, 3}, {3, 1, 5, 2}, {8, 2, 1, 1}};
  return s;
}

inline const std::vector<Shape>& pool_shapes() {
  static const std::vector<Shape> s = {{2, 3, 4, 4}, {1, 2, 6, 2}, {3, 1, 2, 8}, {2, 2, 4, 6}, {1, 4, 2, 2}};
  return s;
}

inline const std::vector<std::array<std::size_t, 3>>& dense_cases() {
  static const std::vector<std::array<std::size_t, 3>> c = {{2, 3, 4}, {5, 8, 5}, {1, 6, 2}, {4, 64, 5}, {3, 2, 7}};
  return c;
}

inline const std::vector<std::array<std::size_t, 2>>& ce_cases() {
  static const std::vector<std::array<std::size_t, 2>> c = {{1, 5}, {4, 5}, {3, 2}, {8, 10}, {6, 3}};
  return c;
}

}  // namespace leafstress::testing
