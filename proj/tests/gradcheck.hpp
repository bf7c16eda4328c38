#pragma once

// Central finite-difference oracle for gradient checks. Lives in test code so
// it stays independent of the analytic backward passes it verifies.

#include <cmath>
#include <functional>
#include <random>

#include "leafstress/tensor.hpp"

namespace leafstress::testing {

/// d f / d wrt by central differences, perturbing `wrt` in place.
template <typename T>
BasicTensor<T> numeric_gradient(const std::function<double()>& f, BasicTensor<T>& wrt, double h) {
  BasicTensor<T> g(wrt.shape());
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    const T orig = wrt[i];
    wrt[i] = static_cast<T>(orig + h);
    const double up = f();
    wrt[i] = static_cast<T>(orig - h);
    const double down = f();
    wrt[i] = orig;
    g[i] = static_cast<T>((up - down) / (2.0 * h));
  }
  return g;
}

/// ‖a − n‖₂ / max(‖a‖₂, ‖n‖₂); 0 when both are zero.
template <typename T>
double relative_error(const BasicTensor<T>& analytic, const BasicTensor<T>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    diff += (a - n) * (a - n);
    na += a * a;
    nn += n * n;
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

/// Scalar probe L = Σ r ⊙ y, accumulated in double.
template <typename T>
double probe(const BasicTensor<T>& y, const BasicTensor<T>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * static_cast<double>(r[i]);
  return s;
}

template <typename T>
BasicTensor<T> random_tensor(Shape shape, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(dist(gen));
  return t;
}

template <typename T>
BasicTensor<T> random_normal(Shape shape, std::mt19937_64& gen, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(dist(gen));
  return t;
}

/// Values spaced at least `gap` apart, in shuffled order, so a max-pool argmax
/// cannot flip under a perturbation smaller than gap/2.
template <typename T>
BasicTensor<T> distinct_tensor(Shape shape, std::mt19937_64& gen, double gap = 0.05) {
  BasicTensor<T> t(std::move(shape));
  std::vector<std::size_t> order(t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), gen);
  for (std::size_t i = 0; i < order.size(); ++i) {
    t[order[i]] = static_cast<T>((static_cast<double>(i) - order.size() / 2.0) * gap);
  }
  return t;
}

template <typename T>
constexpr double fd_step() {
  return sizeof(T) == 4 ? 1e-2 : 1e-5;
}

template <typename T>
constexpr double fd_tolerance() {
  return sizeof(T) == 4 ? 1e-3 : 1e-6;
}

}  // namespace leafstress::testing
