#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leafstress/error.hpp"

namespace leafstress {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major N-dimensional array. `float` is the training precision,
/// `double` is used by the gradient-check suites.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{0});
  BasicTensor(Shape shape, std::vector<T> values);

  /// 2-D tensor from nested rows, e.g. `{{1, 2}, {3, 4}}`.
  static BasicTensor from_rows(std::initializer_list<std::initializer_list<T>> rows);
  static BasicTensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Row-major element access; index count must equal rank.
  template <typename... I>
  T& at(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const T& at(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  BasicTensor reshaped(Shape shape) const;
  void fill(T value);

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
  std::vector<To> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return BasicTensor<To>(t.shape(), std::move(out));
}

// Raw GEMM kernel: c[m×n] = a[m×k] · b[k×n], all row-major. Each output element
// starts at 0 and takes one fused multiply-add per k, strictly in increasing k
// order, so results equal `s = fma(a[i][p], b[p][j], s)` looped over p.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

enum class ElementwiseOp { add, sub, mul, scale, relu, exp, log };

template <typename T>
BasicTensor<T> elementwise(ElementwiseOp op, const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> elementwise(ElementwiseOp op, const BasicTensor<T>& a, T scalar);
/// Unary form for relu/exp/log.
template <typename T>
BasicTensor<T> elementwise(ElementwiseOp op, const BasicTensor<T>& a);

enum class ReduceOp { sum, mean, argmax };

/// Reduces along `axis`, or over all elements when `axis` is empty (result
/// shape {1}). argmax returns the index as a value; ties go to the lowest index.
template <typename T>
BasicTensor<T> reduce(ReduceOp op, const BasicTensor<T>& a, std::optional<std::size_t> axis);

/// Lowest index of the maximum over a contiguous range.
template <typename T>
std::size_t argmax(std::span<const T> values);

template <typename T>
bool all_finite(const BasicTensor<T>& t);

}  // namespace leafstress
