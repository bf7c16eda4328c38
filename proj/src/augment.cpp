#include "leafstress/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace leafstress {

namespace {

constexpr double kSnap = 1e-4;

void check_image(const Tensor& img) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw Error(ErrorKind::ShapeMismatch, "expected a [3,H,W] image, got " + shape_string(img.shape()));
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

// Snaps a sample coordinate to the nearest integer when within tolerance, so
// right-angle rotations land exactly on source pixels.
double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kSnap ? r : v;
}

double jitter_factor(double u, double range) { return 1.0 + (2.0 * u - 1.0) * range; }

}  // namespace

LabelVector one_hot(std::size_t index) {
  if (index >= kNumClasses) throw Error(ErrorKind::IndexOutOfRange, "class index out of range");
  LabelVector v{};
  v[index] = 1.0f;
  return v;
}

void AugmentConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(hflip_prob) || !prob(vflip_prob)) throw Error(ErrorKind::InvalidConfig, "flip probability outside [0,1]");
  if (!(rotation_range_deg >= 0.0 && rotation_range_deg <= 180.0))
    throw Error(ErrorKind::InvalidConfig, "rotation range must be in [0,180]");
  for (double j : {brightness_jitter, contrast_jitter, saturation_jitter})
    if (!(j >= 0.0 && j < 1.0)) throw Error(ErrorKind::InvalidConfig, "jitter range must be in [0,1)");
  if (!(mixup_alpha > 0.0)) throw Error(ErrorKind::InvalidConfig, "mixup alpha must be positive");
}

Tensor hflip(const Tensor& img) {
  check_image(img);
  const std::size_t h = img.dim(1), w = img.dim(2);
  Tensor out(img.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y, w - 1 - x);
  return out;
}

Tensor vflip(const Tensor& img) {
  check_image(img);
  const std::size_t h = img.dim(1), w = img.dim(2);
  Tensor out(img.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, h - 1 - y, x);
  return out;
}

Tensor rotate(const Tensor& img, double degrees, std::array<float, 3> fill) {
  check_image(img);
  const std::size_t h = img.dim(1), w = img.dim(2);
  const std::size_t plane = h * w;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cx = (double(w) - 1.0) / 2.0, cy = (double(h) - 1.0) / 2.0;
  const double xmax = double(w) - 1.0, ymax = double(h) - 1.0;
  Tensor out(img.shape());
  const float* src = img.data().data();
  float* dst = out.data().data();
  for (std::size_t oy = 0; oy < h; ++oy) {
    const double dy = double(oy) - cy;
    for (std::size_t ox = 0; ox < w; ++ox) {
      const double dx = double(ox) - cx;
      double x = snap(cx + dx * cs - dy * sn);
      double y = snap(cy + dx * sn + dy * cs);
      const std::size_t o = oy * w + ox;
      if (x < -kSnap || y < -kSnap || x > xmax + kSnap || y > ymax + kSnap) {
        for (std::size_t c = 0; c < 3; ++c) dst[c * plane + o] = fill[c];
        continue;
      }
      x = std::clamp(x, 0.0, xmax);
      y = std::clamp(y, 0.0, ymax);
      const std::size_t x0 = static_cast<std::size_t>(x), y0 = static_cast<std::size_t>(y);
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = x - double(x0), fy = y - double(y0);
      for (std::size_t c = 0; c < 3; ++c) {
        const float* p = src + c * plane;
        if (fx == 0.0 && fy == 0.0) {
          dst[c * plane + o] = p[y0 * w + x0];
          continue;
        }
        const double top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
        const double bot = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
        dst[c * plane + o] = static_cast<float>(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return out;
}

Tensor geometric(const Tensor& img, GeometricOp op, double degrees, std::array<float, 3> fill) {
  switch (op) {
    case GeometricOp::hflip: return hflip(img);
    case GeometricOp::vflip: return vflip(img);
    case GeometricOp::rotate: return rotate(img, degrees, fill);
  }
  return img;
}

Tensor color_jitter(const Tensor& img, JitterFactors f) {
  check_image(img);
  if (!(f.brightness > 0.0) || !(f.contrast > 0.0) || !(f.saturation > 0.0))
    throw Error(ErrorKind::InvalidFactor, "jitter factors must be positive");
  const std::size_t plane = img.dim(1) * img.dim(2);
  Tensor out = img;
  float* r = out.data().data();
  float* g = r + plane;
  float* b = g + plane;
  auto luma = [&](std::size_t i) { return 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]; };

  for (auto& v : out.data()) v = clamp01(v * f.brightness);

  double mean = 0.0;
  for (std::size_t i = 0; i < plane; ++i) mean += luma(i);
  mean /= double(plane);
  for (auto& v : out.data()) v = clamp01(mean + (v - mean) * f.contrast);

  for (std::size_t i = 0; i < plane; ++i) {
    const double l = luma(i);
    r[i] = clamp01(l + (r[i] - l) * f.saturation);
    g[i] = clamp01(l + (g[i] - l) * f.saturation);
    b[i] = clamp01(l + (b[i] - l) * f.saturation);
  }
  return out;
}

LabeledSample standard_augment(const LabeledSample& sample, const AugmentConfig& cfg, RngStream& stream) {
  std::array<double, kAugmentDraws> u{};
  for (auto& v : u) v = stream.uniform01();
  const bool do_h = u[0] < cfg.hflip_prob;
  const bool do_v = u[1] < cfg.vflip_prob;
  const double angle = (2.0 * u[2] - 1.0) * cfg.rotation_range_deg;
  const JitterFactors f{jitter_factor(u[3], cfg.brightness_jitter), jitter_factor(u[4], cfg.contrast_jitter),
                        jitter_factor(u[5], cfg.saturation_jitter)};

  LabeledSample out = sample;
  if (do_h) out.image = hflip(out.image);
  if (do_v) out.image = vflip(out.image);
  if (angle != 0.0) out.image = rotate(out.image, angle);
  if (f.brightness != 1.0 || f.contrast != 1.0 || f.saturation != 1.0) out.image = color_jitter(out.image, f);
  return out;
}

LabeledSample mix_pair(const LabeledSample& a, const LabeledSample& b, double lambda, MixupHeads heads) {
  if (a.image.shape() != b.image.shape()) throw Error(ErrorKind::ShapeMismatch, "mixup images differ in shape");
  auto blend = [lambda](const LabelVector& x, const LabelVector& y) {
    LabelVector out{};
    for (std::size_t k = 0; k < kNumClasses; ++k) out[k] = static_cast<float>(lambda * x[k] + (1.0 - lambda) * y[k]);
    return out;
  };
  LabeledSample m = a;
  auto dst = m.image.data();
  const auto pa = a.image.data();
  const auto pb = b.image.data();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    const float v = static_cast<float>(lambda * pa[k] + (1.0 - lambda) * pb[k]);
    dst[k] = std::clamp(v, std::min(pa[k], pb[k]), std::max(pa[k], pb[k]));
  }
  if (heads != MixupHeads::severity_only) m.y_stress = blend(a.y_stress, b.y_stress);
  if (heads != MixupHeads::stress_only && a.y_severity && b.y_severity) m.y_severity = blend(*a.y_severity, *b.y_severity);
  return m;
}

std::vector<LabeledSample> mixup_batch(const std::vector<LabeledSample>& batch, double alpha, RngStream& stream,
                                       MixupHeads heads) {
  const std::size_t n = batch.size();
  if (n < 2) throw Error(ErrorKind::BatchTooSmall, "mixup needs at least two samples");
  if (!(alpha > 0.0)) throw Error(ErrorKind::InvalidParameter, "mixup alpha must be positive");

  std::vector<std::size_t> partner(n);
  std::iota(partner.begin(), partner.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) std::swap(partner[i], partner[stream.uniform_index(i + 1)]);
  std::vector<double> lambda(n);
  for (auto& l : lambda) l = stream.beta(alpha, alpha);

  std::vector<LabeledSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(mix_pair(batch[i], batch[partner[i]], lambda[i], heads));
  return out;
}

}  // namespace leafstress
