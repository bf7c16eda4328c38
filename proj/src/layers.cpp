#include "leafstress/layers.hpp"

#include <algorithm>
#include <cmath>

namespace leafstress {

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (kernel == 0 || stride == 0) throw Error(ErrorKind::ShapeMismatch, "kernel and stride must be positive");
  if (in + 2 * padding < kernel) {
    throw Error(ErrorKind::ShapeMismatch, "padded input smaller than kernel");
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t n, c_in, h, w, c_out, kh, kw, oh, ow;
  std::size_t patch() const { return c_in * kh * kw; }
  std::size_t out_area() const { return oh * ow; }
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& x, const Conv2dParams<T>& p) {
  if (x.rank() != 4 || p.weight.rank() != 4) {
    throw Error(ErrorKind::ShapeMismatch, "conv2d expects NCHW input and 4-D weight");
  }
  if (x.dim(1) != p.weight.dim(1)) {
    throw Error(ErrorKind::ShapeMismatch, "conv2d channel mismatch: input " + shape_string(x.shape()) +
                                              ", weight " + shape_string(p.weight.shape()));
  }
  if (p.bias.rank() != 1 || p.bias.dim(0) != p.weight.dim(0)) {
    throw Error(ErrorKind::ShapeMismatch, "conv2d bias must be [C_out]");
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), p.weight.dim(0), p.weight.dim(2), p.weight.dim(3), 0, 0};
  g.oh = conv_output_size(g.h, g.kh, p.stride, p.padding);
  g.ow = conv_output_size(g.w, g.kw, p.stride, p.padding);
  return g;
}

// cols[(c·kh·kw + i·kw + j), (oy·ow + ox)] = padded x[c, oy·s + i, ox·s + j]
template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t stride, std::size_t pad, T* cols) {
  const std::size_t area = g.out_area();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = cols + ((c * g.kh + i) * g.kw + j) * area;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + i) - static_cast<std::ptrdiff_t>(pad);
          T* dst = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.ow, T{0});
            continue;
          }
          const T* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + j) - static_cast<std::ptrdiff_t>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T{0} : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, std::size_t stride, std::size_t pad, T* x) {
  const std::size_t area = g.out_area();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = cols + ((c * g.kh + i) * g.kw + j) * area;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + i) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + j) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

template <typename T>
void transpose_into(const T* src, std::size_t rows, std::size_t cols, T* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const Conv2dParams<T>& p) {
  const auto g = conv_geometry(x, p);
  BasicTensor<T> out({g.n, g.c_out, g.oh, g.ow});
  std::vector<T> cols(g.patch() * g.out_area());
  const std::size_t area = g.out_area();
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(x.data().data() + n * g.c_in * g.h * g.w, g, p.stride, p.padding, cols.data());
    T* out_n = out.data().data() + n * g.c_out * area;
    gemm(p.weight.data().data(), cols.data(), out_n, g.c_out, g.patch(), area);
    for (std::size_t co = 0; co < g.c_out; ++co) {
      const T b = p.bias[co];
      for (std::size_t a = 0; a < area; ++a) out_n[co * area + a] += b;
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& x, const Conv2dParams<T>& p,
                               const BasicTensor<T>& grad_out) {
  const auto g = conv_geometry(x, p);
  if (grad_out.shape() != Shape{g.n, g.c_out, g.oh, g.ow}) {
    throw Error(ErrorKind::ShapeMismatch, "conv2d grad_out shape " + shape_string(grad_out.shape()));
  }
  const std::size_t area = g.out_area();
  const std::size_t patch = g.patch();

  Conv2dGrads<T> grads{BasicTensor<T>(x.shape()), BasicTensor<T>(p.weight.shape()), BasicTensor<T>(p.bias.shape())};
  std::vector<T> cols(patch * area), rows(area * patch), grad_cols(patch * area), gw(g.c_out * patch);
  std::vector<T> w_t(patch * g.c_out);
  transpose_into(p.weight.data().data(), g.c_out, patch, w_t.data());

  for (std::size_t n = 0; n < g.n; ++n) {
    const T* go = grad_out.data().data() + n * g.c_out * area;
    im2col(x.data().data() + n * g.c_in * g.h * g.w, g, p.stride, p.padding, cols.data());
    transpose_into(cols.data(), patch, area, rows.data());

    gemm(go, rows.data(), gw.data(), g.c_out, area, patch);
    for (std::size_t i = 0; i < gw.size(); ++i) grads.grad_w[i] += gw[i];

    for (std::size_t co = 0; co < g.c_out; ++co) {
      T s{0};
      for (std::size_t a = 0; a < area; ++a) s += go[co * area + a];
      grads.grad_b[co] += s;
    }

    gemm(w_t.data(), go, grad_cols.data(), patch, g.c_out, area);
    col2im_add(grad_cols.data(), g, p.stride, p.padding, grads.grad_x.data().data() + n * g.c_in * g.h * g.w);
  }
  return grads;
}

// ---------------------------------------------------------------------------

template <typename T>
BatchNormParams<T> BatchNormParams<T>::make(std::size_t channels) {
  BatchNormParams p;
  p.gamma = BasicTensor<T>({channels}, T{1});
  p.beta = BasicTensor<T>({channels}, T{0});
  p.running_mean = BasicTensor<T>({channels}, T{0});
  p.running_var = BasicTensor<T>({channels}, T{1});
  return p;
}

namespace {

template <typename T>
void check_bn(const BasicTensor<T>& x, const BatchNormParams<T>& p) {
  if (x.rank() != 4) throw Error(ErrorKind::ShapeMismatch, "batchnorm2d expects NCHW input");
  const std::size_t c = x.dim(1);
  for (const auto* t : {&p.gamma, &p.beta, &p.running_mean, &p.running_var}) {
    if (t->shape() != Shape{c}) throw Error(ErrorKind::ShapeMismatch, "batchnorm2d parameter shape");
  }
  if (!(p.eps > T{0})) throw Error(ErrorKind::InvalidParameter, "batchnorm eps must be positive");
}

}  // namespace

template <typename T>
BasicTensor<T> batchnorm2d_forward(const BasicTensor<T>& x, BatchNormParams<T>& p, Phase phase,
                                   BatchNormCache<T>* cache) {
  check_bn(x, p);
  const std::size_t n = x.dim(0), c = x.dim(1), area = x.dim(2) * x.dim(3);
  const std::size_t count = n * area;
  if (phase == Phase::train && count < 2) {
    throw Error(ErrorKind::BatchTooSmall, "batchnorm2d train phase needs N·H·W >= 2");
  }

  BasicTensor<T> y(x.shape());
  BasicTensor<T> x_hat(x.shape());
  std::vector<T> inv_std(c);
  const T* xd = x.data().data();

  for (std::size_t ch = 0; ch < c; ++ch) {
    T mean, var;
    if (phase == Phase::train) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t a = 0; a < area; ++a) s += xd[(b * c + ch) * area + a];
      const double m = s / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t a = 0; a < area; ++a) {
          const double d = xd[(b * c + ch) * area + a] - m;
          sq += d * d;
        }
      mean = static_cast<T>(m);
      var = static_cast<T>(sq / static_cast<double>(count));
      p.running_mean[ch] = (T{1} - p.momentum) * p.running_mean[ch] + p.momentum * mean;
      p.running_var[ch] = (T{1} - p.momentum) * p.running_var[ch] + p.momentum * var;
    } else {
      mean = p.running_mean[ch];
      var = p.running_var[ch];
    }
    const T istd = T{1} / std::sqrt(var + p.eps);
    inv_std[ch] = istd;
    const T gamma = p.gamma[ch], beta = p.beta[ch];
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t a = 0; a < area; ++a) {
        const std::size_t idx = (b * c + ch) * area + a;
        const T xh = (xd[idx] - mean) * istd;
        x_hat[idx] = xh;
        y[idx] = gamma * xh + beta;
      }
    }
  }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->phase = phase;
  }
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>& cache, const BatchNormParams<T>& p,
                                       const BasicTensor<T>& grad_out) {
  if (grad_out.shape() != cache.x_hat.shape()) {
    throw Error(ErrorKind::ShapeMismatch, "batchnorm2d grad_out shape");
  }
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), area = grad_out.dim(2) * grad_out.dim(3);
  const T count = static_cast<T>(n * area);
  BatchNormGrads<T> g{BasicTensor<T>(grad_out.shape()), BasicTensor<T>({c}), BasicTensor<T>({c})};
  const T* dy = grad_out.data().data();
  const T* xh = cache.x_hat.data().data();

  for (std::size_t ch = 0; ch < c; ++ch) {
    T sum_dy{0}, sum_dy_xh{0};
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t a = 0; a < area; ++a) {
        const std::size_t idx = (b * c + ch) * area + a;
        sum_dy += dy[idx];
        sum_dy_xh += dy[idx] * xh[idx];
      }
    g.grad_beta[ch] = sum_dy;
    g.grad_gamma[ch] = sum_dy_xh;
    const T scale = p.gamma[ch] * cache.inv_std[ch];
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t a = 0; a < area; ++a) {
        const std::size_t idx = (b * c + ch) * area + a;
        if (cache.phase == Phase::train) {
          g.grad_x[idx] = scale / count * (count * dy[idx] - sum_dy - xh[idx] * sum_dy_xh);
        } else {
          g.grad_x[idx] = scale * dy[idx];
        }
      }
  }
  return g;
}

// ---------------------------------------------------------------------------

template <typename T>
MaxPoolResult<T> maxpool2x2_forward(const BasicTensor<T>& x) {
  if (x.rank() != 4) throw Error(ErrorKind::ShapeMismatch, "maxpool expects NCHW input");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw Error(ErrorKind::ShapeMismatch, "max2x2 pooling needs even spatial dims, got " + shape_string(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  MaxPoolResult<T> r{BasicTensor<T>({n, c, oh, ow}), std::vector<std::size_t>(n * c * oh * ow)};
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t cand[4] = {base + (2 * oy) * w + 2 * ox, base + (2 * oy) * w + 2 * ox + 1,
                                     base + (2 * oy + 1) * w + 2 * ox, base + (2 * oy + 1) * w + 2 * ox + 1};
        std::size_t best = cand[0];
        for (int k = 1; k < 4; ++k)
          if (x[cand[k]] > x[best]) best = cand[k];
        const std::size_t o = (plane * oh + oy) * ow + ox;
        r.output[o] = x[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool2x2_backward(const BasicTensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                                   const Shape& input_shape) {
  if (grad_out.size() != argmax.size()) throw Error(ErrorKind::ShapeMismatch, "maxpool argmax size");
  BasicTensor<T> gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += grad_out[i];
  return gx;
}

template <typename T>
BasicTensor<T> global_avg_pool_forward(const BasicTensor<T>& x) {
  if (x.rank() != 4) throw Error(ErrorKind::ShapeMismatch, "global_avg_pool expects NCHW input");
  const std::size_t n = x.dim(0), c = x.dim(1), area = x.dim(2) * x.dim(3);
  BasicTensor<T> y({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    T s{0};
    for (std::size_t a = 0; a < area; ++a) s += x[i * area + a];
    y[i] = s / static_cast<T>(area);
  }
  return y;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape) {
  if (input_shape.size() != 4 || grad_out.shape() != Shape{input_shape[0], input_shape[1]}) {
    throw Error(ErrorKind::ShapeMismatch, "global_avg_pool grad shape");
  }
  const std::size_t area = input_shape[2] * input_shape[3];
  BasicTensor<T> gx(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const T v = grad_out[i] / static_cast<T>(area);
    for (std::size_t a = 0; a < area; ++a) gx[i * area + a] = v;
  }
  return gx;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void check_dense(const BasicTensor<T>& x, const DenseParams<T>& p) {
  if (x.rank() != 2 || p.weight.rank() != 2 || x.dim(1) != p.weight.dim(1) ||
      p.bias.shape() != Shape{p.weight.dim(0)}) {
    throw Error(ErrorKind::ShapeMismatch, "dense: input " + shape_string(x.shape()) + ", weight " +
                                              shape_string(p.weight.shape()));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const DenseParams<T>& p, Activation act) {
  check_dense(x, p);
  auto y = matmul(x, transpose(p.weight));
  const std::size_t out = p.weight.dim(0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] += p.bias[i % out];
    if (act == Activation::relu && !(y[i] > T{0})) y[i] = T{0};
  }
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& x, const DenseParams<T>& p, Activation act,
                             const BasicTensor<T>& y, const BasicTensor<T>& grad_out) {
  check_dense(x, p);
  if (grad_out.shape() != Shape{x.dim(0), p.weight.dim(0)} || y.shape() != grad_out.shape()) {
    throw Error(ErrorKind::ShapeMismatch, "dense grad_out shape");
  }
  BasicTensor<T> g = grad_out;
  if (act == Activation::relu) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(y[i] > T{0})) g[i] = T{0};
  }
  DenseGrads<T> r;
  r.grad_x = matmul(g, p.weight);
  r.grad_w = matmul(transpose(g), x);
  r.grad_b = reduce(ReduceOp::sum, g, 0);
  return r;
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out) {
  if (y.shape() != grad_out.shape()) throw Error(ErrorKind::ShapeMismatch, "relu grad shape");
  BasicTensor<T> g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "softmax expects [N, K]");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  BasicTensor<T> p(logits.shape());
  std::vector<double> e(k);
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.data().data() + i * k;
    const double zmax = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (e[j] = std::exp(static_cast<double>(z[j]) - zmax));
    for (std::size_t j = 0; j < k; ++j) p[i * k + j] = static_cast<T>(e[j] / s);
  }
  return p;
}

template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, const BasicTensor<T>& targets) {
  if (logits.rank() != 2 || targets.shape() != logits.shape()) {
    throw Error(ErrorKind::ShapeMismatch, "cross-entropy logits " + shape_string(logits.shape()) +
                                              " vs targets " + shape_string(targets.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double t = targets[i * k + j];
      if (t < 0.0 || !std::isfinite(t)) throw Error(ErrorKind::InvalidTarget, "negative target entry");
      s += t;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw Error(ErrorKind::InvalidTarget, "target row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }

  constexpr double kLogFloor = 1e-12;
  CrossEntropyResult<T> r;
  r.grad_logits = BasicTensor<T>(logits.shape());
  std::vector<double> e(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.data().data() + i * k;
    const double zmax = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (e[j] = std::exp(static_cast<double>(z[j]) - zmax));
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = e[j] / s;
      const double t = targets[i * k + j];
      if (t != 0.0) row -= t * std::log(std::max(p, kLogFloor));
      r.grad_logits[i * k + j] = static_cast<T>((p - t) / static_cast<double>(n));
    }
    total += row;
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

#define LEAFSTRESS_INSTANTIATE(T)                                                                          \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const Conv2dParams<T>&);                   \
  template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const Conv2dParams<T>&, const BasicTensor<T>&); \
  template struct BatchNormParams<T>;                                                                      \
  template BasicTensor<T> batchnorm2d_forward(const BasicTensor<T>&, BatchNormParams<T>&, Phase, BatchNormCache<T>*); \
  template BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>&, const BatchNormParams<T>&,     \
                                                  const BasicTensor<T>&);                                  \
  template MaxPoolResult<T> maxpool2x2_forward(const BasicTensor<T>&);                                     \
  template BasicTensor<T> maxpool2x2_backward(const BasicTensor<T>&, const std::vector<std::size_t>&, const Shape&); \
  template BasicTensor<T> global_avg_pool_forward(const BasicTensor<T>&);                                  \
  template BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>&, const Shape&);                   \
  template BasicTensor<T> dense_forward(const BasicTensor<T>&, const DenseParams<T>&, Activation);         \
  template DenseGrads<T> dense_backward(const BasicTensor<T>&, const DenseParams<T>&, Activation,          \
                                        const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                             \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                                  \
  template CrossEntropyResult<T> softmax_cross_entropy(const BasicTensor<T>&, const BasicTensor<T>&);

LEAFSTRESS_INSTANTIATE(float)
LEAFSTRESS_INSTANTIATE(double)

#undef LEAFSTRESS_INSTANTIATE

}  // namespace leafstress
