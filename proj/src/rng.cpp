#include "leafstress/rng.hpp"

#include <cmath>
#include <numbers>

#include "leafstress/error.hpp"

namespace leafstress {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kChildTag = 0x6368696C64ull;  // "child"

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }
  return c;
}

std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243F6A8885A308D3ull;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t ctr = counter_++;
  const auto out = philox4x32(
      {static_cast<std::uint32_t>(ctr), static_cast<std::uint32_t>(ctr >> 32),
       static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)},
      {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
  return static_cast<std::uint64_t>(out[0]) | (static_cast<std::uint64_t>(out[1]) << 32);
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::standard_normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorKind::InvalidParameter, "uniform_index bound must be positive");
  return static_cast<std::uint64_t>(uniform01() * static_cast<double>(bound)) % bound;
}

RngStream RngStream::child() {
  const std::uint64_t ctr = counter_++;
  return RngStream(seed_, stream_key({stream_id_, ctr, kChildTag}));
}

namespace {

double gamma_at_least_one(RngStream& rng, double shape) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = rng.standard_normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw Error(ErrorKind::InvalidParameter, "gamma shape must be positive");
  RngStream sub = child();
  if (shape < 1.0) {
    const double g = gamma_at_least_one(sub, shape + 1.0);
    const double u = 1.0 - sub.uniform01();
    return g * std::pow(u, 1.0 / shape);
  }
  return gamma_at_least_one(sub, shape);
}

double RngStream::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "beta parameters must be positive");
  }
  RngStream sub = child();
  const double x = sub.gamma(a);
  const double y = sub.gamma(b);
  const double s = x + y;
  if (s <= 0.0) return sub.uniform01() < a / (a + b) ? 1.0 : 0.0;
  return x / s;
}

std::vector<double> RngStream::draw(Distribution dist, std::size_t n, double alpha, double beta_param) {
  if (n == 0) throw Error(ErrorKind::InvalidParameter, "draw count must be at least 1");
  if (dist == Distribution::beta && (!(alpha > 0.0) || !(beta_param > 0.0))) {
    throw Error(ErrorKind::InvalidParameter, "beta parameters must be positive");
  }
  std::vector<double> out(n);
  for (auto& v : out) {
    switch (dist) {
      case Distribution::uniform01: v = uniform01(); break;
      case Distribution::standard_normal: v = standard_normal(); break;
      case Distribution::beta: v = beta(alpha, beta_param); break;
    }
  }
  return out;
}

}  // namespace leafstress
