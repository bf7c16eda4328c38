#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace leafstress {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Mixes a list of integers into a single 64-bit stream id, e.g.
/// `stream_key({epoch, sample_index, purpose})`.
std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts);

enum class Distribution { uniform01, standard_normal, beta };

/// Counter-based random stream. Output i depends only on (seed, stream_id, i),
/// so two streams never share state and any draw can be reproduced in isolation.
///
/// Counter cost per draw:
///   next_u64, uniform01      1 step
///   standard_normal          2 steps (Box-Muller, second variate discarded)
///   gamma, beta              1 step (rejection sampling runs in a child
///                            stream keyed by that step)
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter = 0)
      : seed_(seed), stream_id_(stream_id), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double standard_normal();
  /// Gamma(shape, 1) via Marsaglia–Tsang; shape < 1 uses the U^(1/shape) boost.
  double gamma(double shape);
  /// Beta(a, b) as X / (X + Y) with X ~ Gamma(a), Y ~ Gamma(b).
  double beta(double a, double b);
  /// Uniform integer in [0, bound).
  std::uint64_t uniform_index(std::uint64_t bound);

  std::vector<double> draw(Distribution dist, std::size_t n, double alpha = 1.0, double beta = 1.0);

 private:
  RngStream child();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
};

}  // namespace leafstress
