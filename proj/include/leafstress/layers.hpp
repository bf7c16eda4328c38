#pragma once

#include <cstddef>
#include <vector>

#include "leafstress/tensor.hpp"

namespace leafstress {

enum class Phase { train, eval };
enum class Activation { none, relu };

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, no kernel flip), NCHW layout.

template <typename T>
struct Conv2dParams {
  BasicTensor<T> weight;  // [C_out, C_in, k_h, k_w]
  BasicTensor<T> bias;    // [C_out]
  std::size_t stride = 1;
  std::size_t padding = 0;
};

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> grad_x;
  BasicTensor<T> grad_w;
  BasicTensor<T> grad_b;
};

/// Output spatial size floor((in + 2·pad − k) / stride) + 1; throws when < 1.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const Conv2dParams<T>& p);

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& x, const Conv2dParams<T>& p,
                               const BasicTensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Batch normalization over (N, H, W) per channel.

template <typename T>
struct BatchNormParams {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  static BatchNormParams make(std::size_t channels);
};

template <typename T>
struct BatchNormCache {
  BasicTensor<T> x_hat;
  std::vector<T> inv_std;
  Phase phase = Phase::train;
};

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> grad_x;
  BasicTensor<T> grad_gamma;
  BasicTensor<T> grad_beta;
};

/// Train phase normalizes with batch statistics and updates the running
/// statistics in `p`; eval phase reads the running statistics only.
template <typename T>
BasicTensor<T> batchnorm2d_forward(const BasicTensor<T>& x, BatchNormParams<T>& p, Phase phase,
                                   BatchNormCache<T>* cache = nullptr);

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>& cache, const BatchNormParams<T>& p,
                                       const BasicTensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Pooling.

template <typename T>
struct MaxPoolResult {
  BasicTensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

template <typename T>
MaxPoolResult<T> maxpool2x2_forward(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> maxpool2x2_backward(const BasicTensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                                   const Shape& input_shape);

template <typename T>
BasicTensor<T> global_avg_pool_forward(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape);

// ---------------------------------------------------------------------------
// Fully connected: y = x·Wᵀ + b.

template <typename T>
struct DenseParams {
  BasicTensor<T> weight;  // [out, in]
  BasicTensor<T> bias;    // [out]
};

template <typename T>
struct DenseGrads {
  BasicTensor<T> grad_x;
  BasicTensor<T> grad_w;
  BasicTensor<T> grad_b;
};

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const DenseParams<T>& p, Activation act);

/// `y` is the forward output; with ReLU it masks the upstream gradient
/// (gradient at exactly 0 is 0).
template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& x, const DenseParams<T>& p, Activation act,
                             const BasicTensor<T>& y, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Softmax cross-entropy with soft (row-stochastic) targets.

template <typename T>
struct CrossEntropyResult {
  double loss = 0.0;
  BasicTensor<T> grad_logits;
};

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

/// loss = −(1/N) Σᵢ Σₖ tᵢₖ log softmax(zᵢ)ₖ; grad = (softmax − t) / N.
template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, const BasicTensor<T>& targets);

}  // namespace leafstress
