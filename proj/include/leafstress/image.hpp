#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "leafstress/labels.hpp"
#include "leafstress/tensor.hpp"

namespace leafstress {

/// RGB image with interleaved float channels in [0, 1].
struct ImageRGB {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  ImageRGB() = default;
  ImageRGB(std::size_t h, std::size_t w, std::array<float, 3> fill = {0.f, 0.f, 0.f});

  float& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;
};

struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(std::size_t h, std::size_t w) : height(h), width(w), bits(h * w, 0) {}

  bool at(std::size_t y, std::size_t x) const { return bits[y * width + x] != 0; }
  void set(std::size_t y, std::size_t x, bool v = true) { bits[y * width + x] = v ? 1 : 0; }
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

enum class ImageFormat { ppm_p6, png };

ImageRGB decode_image(std::span<const std::uint8_t> bytes, ImageFormat format);
/// 8-bit binary PPM; channels are rounded to the nearest level.
std::vector<std::uint8_t> encode_ppm(const ImageRGB& img);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
ImageRGB read_image(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageRGB& img);

/// Masks travel as binary PGM (P5), 0 = off, 255 = on.
std::vector<std::uint8_t> encode_mask_pgm(const Mask& mask);
Mask decode_mask_pgm(std::span<const std::uint8_t> bytes);
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

struct Hsv {
  double h;  // degrees, [0, 360)
  double s;
  double v;
};

Hsv rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

struct HsvPlanes {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> h, s, v;
};

HsvPlanes rgb_to_hsv(const ImageRGB& img);

struct ImagingConfig {
  double s_threshold = 0.25;
  double hue_lo = 60.0;
  double hue_hi = 170.0;
  double s_min = 0.15;
  double v_max = 0.35;
  double margin_frac = 0.05;
};

/// (S ≥ threshold), reduced to its largest 4-connected component.
Mask segment_leaf(const ImageRGB& img, double s_threshold);

/// Leaf pixels with S ≥ s_min whose hue leaves [hue_lo, hue_hi] or whose V ≤ v_max.
Mask segment_symptoms(const ImageRGB& img, const Mask& leaf, const ImagingConfig& cfg);

/// Bilinear resampling with half-pixel centre alignment and edge clamping.
ImageRGB resize_bilinear(const ImageRGB& img, std::size_t out_h, std::size_t out_w);

/// Crops the mask's bounding box grown by margin_frac of each box side
/// (clamped to the image), then resizes to out_h × out_w.
ImageRGB crop_and_resize(const ImageRGB& img, const Mask& leaf, double margin_frac, std::size_t out_h,
                         std::size_t out_w);

SeverityClass bin_severity(double ratio);

struct SeverityResult {
  double ratio;
  SeverityClass severity;
};

SeverityResult severity_ratio_and_bin(const Mask& symptom, const Mask& leaf);

/// HWC image → CHW tensor [3, H, W] and back.
Tensor to_tensor(const ImageRGB& img);
ImageRGB from_tensor(const Tensor& t);

}  // namespace leafstress
