#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "leafstress/tsne.hpp"

using namespace leafstress;

namespace {

Tensor64 gaussian(std::size_t n, std::size_t f, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Tensor64 x({n, f});
  for (auto& v : x.data()) v = z(gen);
  return x;
}

// Three isotropic clusters with centres 10σ apart along separate axes.
Tensor64 clusters(std::size_t per, std::size_t f, std::uint64_t seed, std::vector<std::size_t>& labels) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Tensor64 x({3 * per, f});
  labels.clear();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t r = c * per + i;
      for (std::size_t k = 0; k < f; ++k) x.at(r, k) = z(gen) + (k == c ? 10.0 / std::sqrt(2.0) : 0.0);
      labels.push_back(c);
    }
  return x;
}

double entropy_bits(const Tensor64& p, std::size_t i) {
  double h = 0.0;
  for (std::size_t j = 0; j < p.dim(1); ++j)
    if (p.at(i, j) > 0.0) h -= p.at(i, j) * std::log2(p.at(i, j));
  return h;
}

}  // namespace

TEST(Calibrate, EquidistantGivesUniformRows) {
  const std::size_t n = 6;
  Tensor64 d({n, n}, 4.0);
  for (std::size_t i = 0; i < n; ++i) d.at(i, i) = 0.0;
  const auto c = calibrate_perplexity(d, double(n - 1));
  EXPECT_TRUE(c.failed.empty());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(c.p.at(i, j), i == j ? 0.0 : 1.0 / (n - 1), 1e-12);
}

TEST(Calibrate, AchievesTargetPerplexity) {
  const auto x = gaussian(200, 10, 1);
  const auto c = calibrate_perplexity(squared_distances(x), 30.0);
  EXPECT_TRUE(c.failed.empty());
  for (std::size_t i = 0; i < 200; ++i) {
    EXPECT_NEAR(std::exp2(entropy_bits(c.p, i)), 30.0, 1e-3);
    double s = 0.0;
    for (std::size_t j = 0; j < 200; ++j) s += c.p.at(i, j);
    EXPECT_NEAR(s, 1.0, 1e-9);
    EXPECT_EQ(c.p.at(i, i), 0.0);
    EXPECT_GT(c.sigma[i], 0.0);
  }
}

TEST(Calibrate, ScaleInvariantBandwidth) {
  // Scaling features by s scales every σ by s.
  const auto x = gaussian(40, 5, 2);
  Tensor64 xs = x;
  for (auto& v : xs.data()) v *= 7.0;
  const auto a = calibrate_perplexity(squared_distances(x), 10.0);
  const auto b = calibrate_perplexity(squared_distances(xs), 10.0);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(b.sigma[i] / a.sigma[i], 7.0, 1e-3);
}

TEST(Calibrate, InvalidPerplexity) {
  const auto d = squared_distances(gaussian(10, 2, 3));
  EXPECT_THROW(calibrate_perplexity(d, 1.0), Error);
  EXPECT_THROW(calibrate_perplexity(d, 9.5), Error);
  EXPECT_NO_THROW(calibrate_perplexity(d, 9.0));
}

TEST(Calibrate, UnreachableRowIsReported) {
  // Eight coincident points: every row has entropy ≥ log2(7) for any bandwidth.
  Tensor64 x({10, 1});
  x.at(8, 0) = 5.0;
  x.at(9, 0) = 9.0;
  const auto c = calibrate_perplexity(squared_distances(x), 2.0);
  EXPECT_FALSE(c.failed.empty());
  TsneConfig cfg;
  cfg.perplexity = 2.0;
  RngStream rng(1, 1);
  try {
    run_tsne(x, cfg, rng);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CalibrationFailed);
  }
}

TEST(Joint, SymmetricMassAndFloor) {
  const std::size_t n = 50;
  const auto c = calibrate_perplexity(squared_distances(gaussian(n, 4, 4)), 8.0);
  const auto p = joint_probabilities(c.p);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_EQ(p.at(i, j), p.at(j, i));
      total += p.at(i, j);
      if (i == j)
        EXPECT_EQ(p.at(i, j), 0.0);
      else
        EXPECT_GE(p.at(i, j), 0.0);
    }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Joint, SymmetricConditionalInput) {
  const std::size_t n = 6;
  Tensor64 d({n, n}, 1.0);
  for (std::size_t i = 0; i < n; ++i) d.at(i, i) = 0.0;
  const auto c = calibrate_perplexity(d, 5.0);
  const auto p = joint_probabilities(c.p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) EXPECT_NEAR(p.at(i, j), c.p.at(i, j) / n, 1e-15);
}

TEST(Kl, TriangleIdentity) {
  const double s = std::sqrt(3.0);
  const auto y = Tensor64::from_rows({{0.0, 0.0}, {1.0, 0.0}, {0.5, s / 2.0}});
  Tensor64 p({3, 3}, 1.0 / 6.0);
  for (std::size_t i = 0; i < 3; ++i) p.at(i, i) = 0.0;
  const auto r = kl_and_gradient(p, y);
  EXPECT_NEAR(r.kl, 0.0, 1e-9);
  for (double g : r.grad.data()) EXPECT_NEAR(g, 0.0, 1e-9);
}

TEST(Kl, GradientMatchesFiniteDifferences) {
  const std::size_t n = 12;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = joint_probabilities(calibrate_perplexity(squared_distances(gaussian(n, 3, 10 + seed)), 4.0).p);
    auto y = gaussian(n, 2, 20 + seed);
    const auto r = kl_and_gradient(p, y);
    double num2 = 0.0, diff2 = 0.0, ana2 = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double h = 1e-5, keep = y[k];
      y[k] = keep + h;
      const double up = kl_and_gradient(p, y).kl;
      y[k] = keep - h;
      const double down = kl_and_gradient(p, y).kl;
      y[k] = keep;
      const double fd = (up - down) / (2.0 * h);
      diff2 += (fd - r.grad[k]) * (fd - r.grad[k]);
      num2 += fd * fd;
      ana2 += r.grad[k] * r.grad[k];
    }
    EXPECT_LT(std::sqrt(diff2) / std::max(std::sqrt(num2), std::sqrt(ana2)), 1e-5);
  }
}

TEST(Kl, NonNegative) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto p = joint_probabilities(calibrate_perplexity(squared_distances(gaussian(15, 3, seed)), 5.0).p);
    EXPECT_GE(kl_and_gradient(p, gaussian(15, 2, 100 + seed)).kl, 0.0);
  }
}

TEST(RunTsne, SeparatesClustersAndReducesKl) {
  std::vector<std::size_t> labels;
  const auto x = clusters(50, 10, 5, labels);
  RngStream rng(7, 1);
  const auto r = run_tsne(x, TsneConfig{}, rng);
  ASSERT_EQ(r.kl_trace.size(), 1001u);
  EXPECT_LT(r.kl_trace.back(), r.kl_trace.front());
  EXPECT_GE(nearest_neighbor_purity(r.y, labels), 0.95);
  for (std::size_t k = 0; k < 2; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 150; ++i) mean += r.y.at(i, k);
    EXPECT_LT(std::abs(mean / 150.0), 1e-9);
  }
  for (double v : r.kl_trace) EXPECT_GE(v, 0.0);
}

TEST(RunTsne, DeterministicPerSeed) {
  std::vector<std::size_t> labels;
  const auto x = clusters(10, 4, 6, labels);
  TsneConfig cfg;
  cfg.perplexity = 8.0;
  cfg.iterations = 300;
  RngStream a(3, 9), b(3, 9), c(4, 9);
  const auto ra = run_tsne(x, cfg, a);
  EXPECT_EQ(ra.y, run_tsne(x, cfg, b).y);
  EXPECT_NE(ra.y, run_tsne(x, cfg, c).y);
}

TEST(RunTsne, Preconditions) {
  RngStream rng(1, 1);
  EXPECT_THROW(run_tsne(gaussian(4, 3, 1), TsneConfig{}, rng), Error);
  TsneConfig cfg;
  cfg.output_dim = 3;
  cfg.perplexity = 5;
  EXPECT_THROW(run_tsne(gaussian(20, 3, 1), cfg, rng), Error);
}

TEST(Embedding, CsvHeader) {
  const auto path = std::filesystem::temp_directory_path() / "leafstress_embedding.csv";
  write_embedding_csv(path, {{"img_1", 0.5, -1.25, "rust", "low"}});
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "sample_id,x,y,stress_label,severity_label");
  EXPECT_EQ(row, "img_1,0.5,-1.25,rust,low");
}

TEST(Embedding, CsvRoundTripIsExact) {
  const auto path = std::filesystem::temp_directory_path() / "leafstress_embedding_rt.csv";
  const std::vector<EmbeddingRow> rows{{"a", 0.1, -1.0 / 3.0, "rust", ""},
                                       {"b", 1e-300, 12345.678901234567, "healthy", "healthy"}};
  write_embedding_csv(path, rows);
  EXPECT_EQ(read_embedding_csv(path), rows);
}

TEST(Standardize, ZeroMeanUnitVariance) {
  auto x = gaussian(30, 4, 8);
  for (std::size_t i = 0; i < 30; ++i) x.at(i, 3) = 2.0;
  const auto z = standardize_columns(x);
  for (std::size_t k = 0; k < 3; ++k) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 30; ++i) m += z.at(i, k);
    for (std::size_t i = 0; i < 30; ++i) v += z.at(i, k) * z.at(i, k);
    EXPECT_NEAR(m / 30.0, 0.0, 1e-12);
    EXPECT_NEAR(v / 30.0, 1.0, 1e-12);
  }
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(z.at(i, 3), 0.0);
}
