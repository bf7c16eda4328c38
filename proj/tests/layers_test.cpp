#include <gtest/gtest.h>

#include <cmath>

#include "layer_checks.hpp"
#include "leafstress/layers.hpp"

using namespace leafstress;
using namespace leafstress::testing;

template <typename T>
class LayerGradients : public ::testing::Test {};
using Precisions = ::testing::Types<float, double>;
TYPED_TEST_SUITE(LayerGradients, Precisions);

TYPED_TEST(LayerGradients, Conv2d) {
  std::mt19937_64 gen(101);
  for (const auto& cs : conv_cases()) EXPECT_LT(check_conv2d<TypeParam>(cs, gen), fd_tolerance<TypeParam>());
}

TYPED_TEST(LayerGradients, BatchNormTrainAndEval) {
  std::mt19937_64 gen(202);
  for (const auto& s : bn_shapes()) {
    EXPECT_LT(check_batchnorm2d<TypeParam>(s, Phase::train, gen), fd_tolerance<TypeParam>()) << shape_string(s);
    EXPECT_LT(check_batchnorm2d<TypeParam>(s, Phase::eval, gen), fd_tolerance<TypeParam>()) << shape_string(s);
  }
}

TYPED_TEST(LayerGradients, Pools) {
  std::mt19937_64 gen(303);
  for (const auto& s : pool_shapes()) {
    EXPECT_LT(check_maxpool<TypeParam>(s, gen), fd_tolerance<TypeParam>());
    EXPECT_LT(check_global_avg<TypeParam>(s, gen), fd_tolerance<TypeParam>());
  }
}

TYPED_TEST(LayerGradients, Dense) {
  std::mt19937_64 gen(404);
  for (const auto& [n, in, out] : dense_cases()) {
    EXPECT_LT(check_dense<TypeParam>(n, in, out, Activation::none, gen), fd_tolerance<TypeParam>());
    EXPECT_LT(check_dense<TypeParam>(n, in, out, Activation::relu, gen), fd_tolerance<TypeParam>());
  }
}

TYPED_TEST(LayerGradients, SoftmaxCrossEntropy) {
  std::mt19937_64 gen(505);
  for (const auto& [n, k] : ce_cases()) EXPECT_LT(check_softmax_ce<TypeParam>(n, k, gen), fd_tolerance<TypeParam>());
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 gen(1);
  const auto x = random_tensor<float>({2, 1, 4, 5}, gen);
  Conv2dParams<float> p{Tensor({1, 1, 1, 1}, 1.0f), Tensor({1}, 0.0f), 1, 0};
  EXPECT_EQ(conv2d_forward(x, p), x);
}

TEST(Conv2d, AllOnesKernel) {
  Conv2dParams<float> p{Tensor({1, 1, 3, 3}, 1.0f), Tensor({1}, 0.5f), 1, 0};
  const auto y = conv2d_forward(Tensor({1, 1, 3, 3}, 1.0f), p);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 9.5f);
}

TEST(Conv2d, SamePaddingPreservesSpatialDims) {
  for (std::size_t k : {1u, 3u, 5u, 7u}) {
    Conv2dParams<float> p{Tensor({2, 3, k, k}), Tensor({2}), 1, (k - 1) / 2};
    EXPECT_EQ(conv2d_forward(Tensor({1, 3, 9, 6}), p).shape(), (Shape{1, 2, 9, 6}));
  }
}

TEST(Conv2d, ChannelMismatch) {
  Conv2dParams<float> p{Tensor({2, 3, 3, 3}), Tensor({2}), 1, 1};
  try {
    conv2d_forward(Tensor({1, 2, 5, 5}), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  EXPECT_THROW(conv2d_forward(Tensor({1, 3, 2, 2}), Conv2dParams<float>{Tensor({2, 3, 5, 5}), Tensor({2}), 1, 0}),
               Error);
}

TEST(BatchNorm, ConstantInputGivesBeta) {
  auto p = BatchNormParams<float>::make(2);
  p.beta = Tensor({2}, {0.25f, -1.0f});
  const auto y = batchnorm2d_forward(Tensor({3, 2, 2, 2}, 4.0f), p, Phase::train);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], p.beta[(i / 4) % 2]);
}

TEST(BatchNorm, EvalIdentityStatistics) {
  std::mt19937_64 gen(2);
  const auto x = random_tensor<float>({2, 3, 4, 4}, gen);
  auto p = BatchNormParams<float>::make(3);
  const auto y = batchnorm2d_forward(x, p, Phase::eval);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-5);
}

TEST(BatchNorm, TrainOutputIsStandardized) {
  std::mt19937_64 gen(3);
  const auto x = random_normal<float>({8, 4, 5, 5}, gen, 3.0);
  auto p = BatchNormParams<float>::make(4);
  const auto y = batchnorm2d_forward(x, p, Phase::train);
  for (std::size_t c = 0; c < 4; ++c) {
    double s = 0, sq = 0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t a = 0; a < 25; ++a) {
        const double v = y[(n * 4 + c) * 25 + a];
        s += v;
        sq += v * v;
      }
    const double m = s / 200.0;
    EXPECT_LT(std::abs(m), 1e-5);
    EXPECT_NEAR(sq / 200.0 - m * m, 1.0, 1e-4);
  }
}

TEST(BatchNorm, RunningStatisticsUpdate) {
  auto p = BatchNormParams<double>::make(1);
  const Tensor64 x({2, 1, 1, 1}, {1.0, 3.0});
  batchnorm2d_forward(x, p, Phase::train);
  // batch mean 2, biased variance 1
  EXPECT_DOUBLE_EQ(p.running_mean[0], 0.1 * 2.0);
  EXPECT_DOUBLE_EQ(p.running_var[0], 0.9 * 1.0 + 0.1 * 1.0);
}

TEST(BatchNorm, TooSmallBatch) {
  auto p = BatchNormParams<float>::make(1);
  try {
    batchnorm2d_forward(Tensor({1, 1, 1, 1}), p, Phase::train);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BatchTooSmall);
  }
  EXPECT_NO_THROW(batchnorm2d_forward(Tensor({1, 1, 1, 1}), p, Phase::eval));
}

TEST(Pool, MaxRoutesToArgmax) {
  const Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  const auto r = maxpool2x2_forward(x);
  EXPECT_EQ(r.output[0], 4.0f);
  EXPECT_EQ(maxpool2x2_backward(Tensor({1, 1, 1, 1}, 1.0f), r.argmax, x.shape()), Tensor({1, 1, 2, 2}, {0, 0, 0, 1}));
}

TEST(Pool, MaxTieBreaksToLowestIndex) {
  const Tensor x({1, 1, 2, 2}, {5, 5, 5, 5});
  const auto r = maxpool2x2_forward(x);
  EXPECT_EQ(r.argmax[0], 0u);
}

TEST(Pool, MaxOddDims) {
  try {
    maxpool2x2_forward(Tensor({1, 1, 3, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Pool, GlobalAverageOfConstant) {
  const auto y = global_avg_pool_forward(Tensor({2, 3, 5, 7}, 0.375f));
  EXPECT_EQ(y.shape(), (Shape{2, 3}));
  for (auto v : y.data()) EXPECT_FLOAT_EQ(v, 0.375f);
}

TEST(Dense, IdentityWeights) {
  std::mt19937_64 gen(4);
  const auto x = random_tensor<float>({3, 4}, gen);
  DenseParams<float> p{Tensor::identity(4), Tensor({4})};
  EXPECT_EQ(dense_forward(x, p, Activation::none), x);
}

TEST(Dense, ReluDeadRegion) {
  const Tensor x({2, 2}, {1, 2, 3, 4});
  DenseParams<float> p{Tensor({3, 2}, 1.0f), Tensor({3}, -100.0f)};
  const auto y = dense_forward(x, p, Activation::relu);
  for (auto v : y.data()) EXPECT_EQ(v, 0.0f);
  const auto g = dense_backward(x, p, Activation::relu, y, Tensor({2, 3}, 1.0f));
  for (auto v : g.grad_x.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Dense, ShapeMismatch) {
  DenseParams<float> p{Tensor({3, 2}), Tensor({3})};
  EXPECT_THROW(dense_forward(Tensor({2, 4}), p, Activation::none), Error);
}

TEST(CrossEntropy, UniformLogits) {
  std::mt19937_64 gen(5);
  const auto t = random_soft_targets<double>(4, 5, gen);
  EXPECT_NEAR(softmax_cross_entropy(Tensor64({4, 5}, 0.7), t).loss, std::log(5.0), 1e-12);
  EXPECT_NEAR(std::log(5.0), 1.6094, 1e-4);
}

TEST(CrossEntropy, SaturatedLogit) {
  Tensor z({1, 5}, 0.0f);
  z[2] = 30.0f;
  Tensor t({1, 5}, 0.0f);
  t[2] = 1.0f;
  EXPECT_LT(softmax_cross_entropy(z, t).loss, 1e-9);
}

TEST(CrossEntropy, LinearInTarget) {
  std::mt19937_64 gen(6);
  const auto z = random_tensor<double>({1, 5}, gen, -2, 2);
  for (double lambda : {0.0, 0.13, 0.5, 0.91, 1.0}) {
    Tensor64 ei({1, 5}), ej({1, 5}), mix({1, 5});
    ei[1] = 1;
    ej[4] = 1;
    mix[1] = lambda;
    mix[4] = 1 - lambda;
    const double lhs = softmax_cross_entropy(z, mix).loss;
    const double rhs = lambda * softmax_cross_entropy(z, ei).loss + (1 - lambda) * softmax_cross_entropy(z, ej).loss;
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(CrossEntropy, InvalidTarget) {
  try {
    softmax_cross_entropy(Tensor({1, 3}), Tensor({1, 3}, {0.5f, 0.2f, 0.2f}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidTarget);
  }
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 2}), Tensor({1, 2}, {1.5f, -0.5f})), Error);
}

TEST(CrossEntropy, SoftmaxRowsSumToOneAndLossNonNegative) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto z = random_tensor<float>({6, 5}, gen, -20, 20);
    const auto p = softmax(z);
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 5; ++j) s += p[i * 5 + j];
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
    EXPECT_GE(softmax_cross_entropy(z, random_soft_targets<float>(6, 5, gen)).loss, 0.0);
  }
}
