#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "leafstress/rng.hpp"
#include "leafstress/tensor.hpp"

namespace leafstress {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t output_dim = 2;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iter = 250;
  double min_gain = 0.01;
  double init_std = 1e-4;
  double entropy_tol = 1e-4;
  std::size_t max_bisection_steps = 50;

  /// Throws InvalidParameter unless 1 < perplexity <= n - 1 and the rest is sane.
  void validate(std::size_t n) const;
};

/// Pairwise squared Euclidean distances of the rows of `x` [n, F].
Tensor64 squared_distances(const Tensor64& x);

struct ConditionalAffinities {
  Tensor64 p;                        // [n, n], row i holds p_{j|i}
  std::vector<double> sigma;         // per-row Gaussian bandwidth
  std::vector<double> perplexity;    // achieved 2^H per row
  std::vector<std::size_t> failed;   // rows that did not reach tolerance
};

/// Per-row bisection on the Gaussian precision until 2^H of the row (H in
/// bits) is within `entropy_tol` of the target perplexity. Rows that fail keep the best
/// bandwidth found and are listed in `failed`.
ConditionalAffinities calibrate_perplexity(const Tensor64& sq_dist, double perplexity, double entropy_tol = 1e-4,
                                           std::size_t max_bisection_steps = 50);

/// (p_{j|i} + p_{i|j}) / 2n with off-diagonal entries floored at 1e-12 and
/// the result renormalised to unit mass.
Tensor64 joint_probabilities(const Tensor64& conditional);

struct KlResult {
  double kl;
  Tensor64 grad;  // [n, d]
};

KlResult kl_and_gradient(const Tensor64& p, const Tensor64& y);

struct TsneResult {
  Tensor64 y;                   // [n, output_dim]
  std::vector<double> kl_trace; // KL against the unexaggerated P: before each iteration, then final
};

/// Throws CalibrationFailed when any row of the affinity calibration fails.
TsneResult run_tsne(const Tensor64& features, const TsneConfig& cfg, RngStream& stream);

/// Column-wise z-scoring; constant columns become 0.
Tensor64 standardize_columns(const Tensor64& x);

/// Fraction of points whose nearest other point (Euclidean) shares its label.
double nearest_neighbor_purity(const Tensor64& y, const std::vector<std::size_t>& labels);

struct EmbeddingRow {
  std::string sample_id;
  double x;
  double y;
  std::string stress_label;
  std::string severity_label;

  friend bool operator==(const EmbeddingRow&, const EmbeddingRow&) = default;
};

/// Coordinates are written with 17 significant digits so reading back is exact.
void write_embedding_csv(const std::filesystem::path& path, const std::vector<EmbeddingRow>& rows);
std::vector<EmbeddingRow> read_embedding_csv(const std::filesystem::path& path);

}  // namespace leafstress
