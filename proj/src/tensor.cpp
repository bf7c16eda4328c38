#include "leafstress/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <type_traits>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace leafstress {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw Error(ErrorKind::ShapeMismatch, "zero-sized dimension in " + shape_string(shape));
  }
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw Error(ErrorKind::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                              " does not match shape " + shape_string(shape_));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_rows(std::initializer_list<std::initializer_list<T>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<T> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorKind::ShapeMismatch, "ragged rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return BasicTensor({r, c}, std::move(v));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::identity(std::size_t n) {
  BasicTensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = T{1};
  return out;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
std::size_t BasicTensor<T>::offset(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "index rank does not match " + shape_string(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : idx) {
    if (i >= shape_[axis]) throw Error(ErrorKind::OutOfRange, "index out of bounds");
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

template class BasicTensor<float>;
template class BasicTensor<double>;

// Register-blocked kernel: a block of kRows output rows times kCols output
// columns is accumulated locally over the full k range, so every output still
// sees its products in plain left-to-right order.
namespace {

template <typename T>
void gemm_generic(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  constexpr std::size_t kRows = 4;
  constexpr std::size_t kCols = 256 / sizeof(T);
  for (std::size_t j0 = 0; j0 < n; j0 += kCols) {
    const std::size_t nb = std::min(kCols, n - j0);
    std::size_t i = 0;
    for (; i + kRows <= m; i += kRows) {
      T acc[kRows][kCols] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const T* brow = b + p * n + j0;
        for (std::size_t r = 0; r < kRows; ++r) {
          const T v = a[(i + r) * k + p];
          for (std::size_t j = 0; j < nb; ++j) acc[r][j] = std::fma(v, brow[j], acc[r][j]);
        }
      }
      for (std::size_t r = 0; r < kRows; ++r) std::copy(acc[r], acc[r] + nb, c + (i + r) * n + j0);
    }
    for (; i < m; ++i) {
      T acc[kCols] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const T* brow = b + p * n + j0;
        const T v = a[i * k + p];
        for (std::size_t j = 0; j < nb; ++j) acc[j] = std::fma(v, brow[j], acc[j]);
      }
      std::copy(acc, acc + nb, c + i * n + j0);
    }
  }
}

#if defined(__AVX512F__)

// 4 rows × 64 columns held in 16 zmm accumulators; tails use masked lanes.
template <std::size_t Rows>
void tile_f32(const float* a, const float* b, float* c, std::size_t k, std::size_t n, std::size_t j0,
              std::size_t nb) {
  __m512 acc[Rows][4];
  for (auto& row : acc)
    for (auto& v : row) v = _mm512_setzero_ps();
  __mmask16 mask[4];
  std::size_t vecs = 0;
  for (std::size_t q = 0; q < 4; ++q) {
    const std::size_t lo = q * 16;
    if (lo >= nb) break;
    const std::size_t cnt = std::min<std::size_t>(16, nb - lo);
    mask[q] = static_cast<__mmask16>(cnt == 16 ? 0xFFFF : (1u << cnt) - 1u);
    ++vecs;
  }
  if (vecs == 4 && mask[3] == 0xFFFF) {
    for (std::size_t p = 0; p < k; ++p) {
      const float* brow = b + p * n + j0;
      const __m512 b0 = _mm512_loadu_ps(brow), b1 = _mm512_loadu_ps(brow + 16);
      const __m512 b2 = _mm512_loadu_ps(brow + 32), b3 = _mm512_loadu_ps(brow + 48);
      for (std::size_t r = 0; r < Rows; ++r) {
        const __m512 v = _mm512_set1_ps(a[r * k + p]);
        acc[r][0] = _mm512_fmadd_ps(v, b0, acc[r][0]);
        acc[r][1] = _mm512_fmadd_ps(v, b1, acc[r][1]);
        acc[r][2] = _mm512_fmadd_ps(v, b2, acc[r][2]);
        acc[r][3] = _mm512_fmadd_ps(v, b3, acc[r][3]);
      }
    }
  } else {
    for (std::size_t p = 0; p < k; ++p) {
      const float* brow = b + p * n + j0;
      __m512 bv[4];
      for (std::size_t q = 0; q < vecs; ++q) bv[q] = _mm512_maskz_loadu_ps(mask[q], brow + q * 16);
      for (std::size_t r = 0; r < Rows; ++r) {
        const __m512 v = _mm512_set1_ps(a[r * k + p]);
        for (std::size_t q = 0; q < vecs; ++q) acc[r][q] = _mm512_fmadd_ps(v, bv[q], acc[r][q]);
      }
    }
  }
  for (std::size_t r = 0; r < Rows; ++r)
    for (std::size_t q = 0; q < vecs; ++q) _mm512_mask_storeu_ps(c + r * n + j0 + q * 16, mask[q], acc[r][q]);
}

void gemm_f32(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t j0 = 0; j0 < n; j0 += 64) {
    const std::size_t nb = std::min<std::size_t>(64, n - j0);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) tile_f32<4>(a + i * k, b, c + i * n, k, n, j0, nb);
    for (; i < m; ++i) tile_f32<1>(a + i * k, b, c + i * n, k, n, j0, nb);
  }
}

#endif

}  // namespace

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
#if defined(__AVX512F__)
  if constexpr (std::is_same_v<T, float>) {
    gemm_f32(a, b, c, m, k, n);
    return;
  }
#endif
  gemm_generic(a, b, c, m, k, n);
}

template void gemm<float>(const float*, const float*, float*, std::size_t, std::size_t, std::size_t);
template void gemm<double>(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw Error(ErrorKind::ShapeMismatch,
                "matmul " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  BasicTensor<T> c({a.dim(0), b.dim(1)});
  gemm(a.data().data(), b.data().data(), c.data().data(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  if (a.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "transpose needs a 2-D tensor");
  const std::size_t r = a.dim(0), c = a.dim(1);
  BasicTensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return out;
}

namespace {

template <typename T>
T apply_binary(ElementwiseOp op, T x, T y) {
  switch (op) {
    case ElementwiseOp::add: return x + y;
    case ElementwiseOp::sub: return x - y;
    case ElementwiseOp::mul:
    case ElementwiseOp::scale: return x * y;
    default: throw Error(ErrorKind::InvalidParameter, "not a binary elementwise op");
  }
}

template <typename T>
T apply_unary(ElementwiseOp op, T x) {
  switch (op) {
    case ElementwiseOp::relu: return x > T{0} ? x : T{0};
    case ElementwiseOp::exp: return std::exp(x);
    case ElementwiseOp::log:
      if (!(x > T{0})) throw Error(ErrorKind::DomainError, "log of non-positive value");
      return std::log(x);
    default: throw Error(ErrorKind::InvalidParameter, "not a unary elementwise op");
  }
}

bool is_unary(ElementwiseOp op) {
  return op == ElementwiseOp::relu || op == ElementwiseOp::exp || op == ElementwiseOp::log;
}

}  // namespace

template <typename T>
BasicTensor<T> elementwise(ElementwiseOp op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (is_unary(op)) return elementwise(op, a);
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::ShapeMismatch,
                shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply_binary(op, a[i], b[i]);
  return out;
}

template <typename T>
BasicTensor<T> elementwise(ElementwiseOp op, const BasicTensor<T>& a, T scalar) {
  if (is_unary(op)) return elementwise(op, a);
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply_binary(op, a[i], scalar);
  return out;
}

template <typename T>
BasicTensor<T> elementwise(ElementwiseOp op, const BasicTensor<T>& a) {
  if (!is_unary(op)) throw Error(ErrorKind::InvalidParameter, "binary op needs a second operand");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply_unary(op, a[i]);
  return out;
}

template <typename T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template <typename T>
BasicTensor<T> reduce(ReduceOp op, const BasicTensor<T>& a, std::optional<std::size_t> axis) {
  if (!axis) {
    if (op == ReduceOp::argmax) return BasicTensor<T>({1}, {static_cast<T>(argmax(a.data()))});
    T acc{0};
    for (auto v : a.data()) acc += v;
    if (op == ReduceOp::mean) acc /= static_cast<T>(a.size());
    return BasicTensor<T>({1}, {acc});
  }
  if (*axis >= a.rank()) {
    throw Error(ErrorKind::InvalidAxis,
                "axis " + std::to_string(*axis) + " for shape " + shape_string(a.shape()));
  }
  const auto& s = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < *axis; ++i) outer *= s[i];
  for (std::size_t i = *axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[*axis];

  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != *axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  BasicTensor<T> out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const T* base = a.data().data() + o * len * inner + in;
      T result{0};
      if (op == ReduceOp::argmax) {
        std::size_t best = 0;
        for (std::size_t l = 1; l < len; ++l)
          if (base[l * inner] > base[best * inner]) best = l;
        result = static_cast<T>(best);
      } else {
        for (std::size_t l = 0; l < len; ++l) result += base[l * inner];
        if (op == ReduceOp::mean) result /= static_cast<T>(len);
      }
      out[o * inner + in] = result;
    }
  }
  return out;
}

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](T v) { return std::isfinite(v); });
}

#define LEAFSTRESS_INSTANTIATE(T)                                                              \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                     \
  template BasicTensor<T> elementwise(ElementwiseOp, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> elementwise(ElementwiseOp, const BasicTensor<T>&, T);                 \
  template BasicTensor<T> elementwise(ElementwiseOp, const BasicTensor<T>&);                    \
  template BasicTensor<T> reduce(ReduceOp, const BasicTensor<T>&, std::optional<std::size_t>);  \
  template std::size_t argmax(std::span<const T>);                                              \
  template bool all_finite(const BasicTensor<T>&);

LEAFSTRESS_INSTANTIATE(float)
LEAFSTRESS_INSTANTIATE(double)

#undef LEAFSTRESS_INSTANTIATE

}  // namespace leafstress
