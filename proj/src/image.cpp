#include "leafstress/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "leafstress/error.hpp"

namespace leafstress {

ImageRGB::ImageRGB(std::size_t h, std::size_t w, std::array<float, 3> fill) : height(h), width(w) {
  pixels.resize(h * w * 3);
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t c = 0; c < 3; ++c) pixels[i * 3 + c] = fill[c];
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

// ---------------------------------------------------------------------------
// Netpbm

namespace {

struct PnmHeader {
  std::size_t width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

// Reads magic + three integers, skipping whitespace and '#' comments; exactly
// one whitespace byte separates maxval from the raster.
PnmHeader parse_pnm_header(std::span<const std::uint8_t> bytes, std::string_view magic) {
  if (bytes.size() < 2 || bytes[0] != static_cast<std::uint8_t>(magic[0]) ||
      bytes[1] != static_cast<std::uint8_t>(magic[1])) {
    throw Error(ErrorKind::MalformedHeader, "expected magic " + std::string(magic));
  }
  std::size_t pos = 2;
  auto next_int = [&]() -> std::size_t {
    for (;;) {
      if (pos >= bytes.size()) throw Error(ErrorKind::MalformedHeader, "header ends early");
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (!std::isdigit(bytes[pos])) throw Error(ErrorKind::MalformedHeader, "expected a number in header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1u << 24) throw Error(ErrorKind::MalformedHeader, "header value too large");
      ++pos;
    }
    return v;
  };
  // Magic must be followed by whitespace.
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw Error(ErrorKind::MalformedHeader, "bad magic");
  PnmHeader h;
  h.width = next_int();
  h.height = next_int();
  h.maxval = next_int();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorKind::MalformedHeader, "missing whitespace after maxval");
  }
  h.data_offset = pos + 1;
  if (h.width == 0 || h.height == 0 || h.maxval == 0) {
    throw Error(ErrorKind::MalformedHeader, "zero dimension or maxval");
  }
  if (h.maxval > 255) throw Error(ErrorKind::UnsupportedFormat, "only 8-bit netpbm is supported");
  return h;
}

std::vector<std::uint8_t> pnm_header(std::string_view magic, std::size_t w, std::size_t h) {
  const std::string s = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  return {s.begin(), s.end()};
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

ImageRGB decode_image(std::span<const std::uint8_t> bytes, ImageFormat format) {
  if (format == ImageFormat::png) {
    throw Error(ErrorKind::UnsupportedFormat, "PNG decoding is not built in; convert to PPM (P6)");
  }
  const auto h = parse_pnm_header(bytes, "P6");
  const std::size_t need = h.width * h.height * 3;
  if (bytes.size() - h.data_offset < need) {
    throw Error(ErrorKind::TruncatedPixelData, "expected " + std::to_string(need) + " pixel bytes, found " +
                                                   std::to_string(bytes.size() - h.data_offset));
  }
  ImageRGB img;
  img.height = h.height;
  img.width = h.width;
  img.pixels.resize(need);
  const float scale = 1.0f / static_cast<float>(h.maxval);
  for (std::size_t i = 0; i < need; ++i) {
    img.pixels[i] = std::min(1.0f, static_cast<float>(bytes[h.data_offset + i]) * scale);
  }
  return img;
}

std::vector<std::uint8_t> encode_ppm(const ImageRGB& img) {
  auto out = pnm_header("P6", img.width, img.height);
  out.reserve(out.size() + img.pixels.size());
  for (float v : img.pixels) out.push_back(to_byte(v));
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

ImageRGB read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  const auto format = (ext == ".png" || ext == ".PNG") ? ImageFormat::png : ImageFormat::ppm_p6;
  return decode_image(read_file_bytes(path), format);
}

void write_ppm(const std::filesystem::path& path, const ImageRGB& img) {
  write_file_bytes(path, encode_ppm(img));
}

std::vector<std::uint8_t> encode_mask_pgm(const Mask& mask) {
  auto out = pnm_header("P5", mask.width, mask.height);
  for (auto b : mask.bits) out.push_back(b ? 255 : 0);
  return out;
}

Mask decode_mask_pgm(std::span<const std::uint8_t> bytes) {
  const auto h = parse_pnm_header(bytes, "P5");
  if (bytes.size() - h.data_offset < h.width * h.height) {
    throw Error(ErrorKind::TruncatedPixelData, "mask raster is short");
  }
  Mask m(h.height, h.width);
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = bytes[h.data_offset + i] * 2 > h.maxval ? 1 : 0;
  return m;
}

Mask read_mask(const std::filesystem::path& path) { return decode_mask_pgm(read_file_bytes(path)); }

void write_mask(const std::filesystem::path& path, const Mask& mask) { write_file_bytes(path, encode_mask_pgm(mask)); }

// ---------------------------------------------------------------------------
// Colour

Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out{0.0, mx > 0.0 ? delta / mx : 0.0, mx};
  if (delta > 0.0) {
    double h;
    if (mx == r) {
      h = 60.0 * ((g - b) / delta);
    } else if (mx == g) {
      h = 60.0 * ((b - r) / delta + 2.0);
    } else {
      h = 60.0 * ((r - g) / delta + 4.0);
    }
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    out.h = h;
  }
  return out;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0.0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

HsvPlanes rgb_to_hsv(const ImageRGB& img) {
  HsvPlanes p{img.height, img.width, {}, {}, {}};
  const std::size_t n = img.height * img.width;
  p.h.resize(n);
  p.s.resize(n);
  p.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hsv = rgb_to_hsv(img.pixels[i * 3], img.pixels[i * 3 + 1], img.pixels[i * 3 + 2]);
    p.h[i] = static_cast<float>(hsv.h);
    p.s[i] = static_cast<float>(hsv.s);
    p.v[i] = static_cast<float>(hsv.v);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Segmentation

namespace {

// Keeps the largest 4-connected component; ties go to the component whose
// first pixel (row-major) comes first.
Mask largest_component(const Mask& m) {
  const std::size_t h = m.height, w = m.width;
  std::vector<std::int32_t> label(h * w, -1);
  std::vector<std::size_t> stack;
  std::int32_t best_label = -1;
  std::size_t best_size = 0;
  std::int32_t next = 0;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (!m.bits[start] || label[start] >= 0) continue;
    std::size_t size = 0;
    label[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++size;
      const std::size_t y = i / w, x = i % w;
      auto visit = [&](std::size_t j) {
        if (m.bits[j] && label[j] < 0) {
          label[j] = next;
          stack.push_back(j);
        }
      };
      if (y > 0) visit(i - w);
      if (y + 1 < h) visit(i + w);
      if (x > 0) visit(i - 1);
      if (x + 1 < w) visit(i + 1);
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
    ++next;
  }
  Mask out(h, w);
  for (std::size_t i = 0; i < h * w; ++i) out.bits[i] = (best_label >= 0 && label[i] == best_label) ? 1 : 0;
  return out;
}

}  // namespace

Mask segment_leaf(const ImageRGB& img, double s_threshold) {
  if (!(s_threshold > 0.0 && s_threshold < 1.0)) {
    throw Error(ErrorKind::InvalidParameter, "saturation threshold must lie in (0, 1)");
  }
  const auto hsv = rgb_to_hsv(img);
  Mask raw(img.height, img.width);
  bool any = false;
  for (std::size_t i = 0; i < raw.bits.size(); ++i) {
    raw.bits[i] = hsv.s[i] >= s_threshold ? 1 : 0;
    any = any || raw.bits[i];
  }
  if (!any) throw Error(ErrorKind::NoLeafFound, "no pixel reaches the saturation threshold");
  return largest_component(raw);
}

Mask segment_symptoms(const ImageRGB& img, const Mask& leaf, const ImagingConfig& cfg) {
  if (leaf.height != img.height || leaf.width != img.width) {
    throw Error(ErrorKind::ShapeMismatch, "leaf mask does not match image");
  }
  if (leaf.count() == 0) throw Error(ErrorKind::EmptyMask, "leaf mask is empty");
  const auto hsv = rgb_to_hsv(img);
  Mask out(img.height, img.width);
  for (std::size_t i = 0; i < out.bits.size(); ++i) {
    if (!leaf.bits[i] || hsv.s[i] < cfg.s_min) continue;
    const bool off_hue = hsv.h[i] < cfg.hue_lo || hsv.h[i] > cfg.hue_hi;
    const bool dark = hsv.v[i] <= cfg.v_max;
    out.bits[i] = (off_hue || dark) ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

ImageRGB resize_bilinear(const ImageRGB& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0 || img.height == 0 || img.width == 0) {
    throw Error(ErrorKind::InvalidParameter, "resize dimensions must be positive");
  }
  ImageRGB out(out_h, out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  const double max_y = static_cast<double>(img.height - 1);
  const double max_x = static_cast<double>(img.width - 1);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp((static_cast<double>(oy) + 0.5) * sy - 0.5, 0.0, max_y);
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp((static_cast<double>(ox) + 0.5) * sx - 0.5, 0.0, max_x);
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        const double bottom = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        out.at(oy, ox, c) = static_cast<float>((1.0 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

ImageRGB crop_and_resize(const ImageRGB& img, const Mask& leaf, double margin_frac, std::size_t out_h,
                         std::size_t out_w) {
  if (leaf.height != img.height || leaf.width != img.width) {
    throw Error(ErrorKind::ShapeMismatch, "leaf mask does not match image");
  }
  if (!(margin_frac >= 0.0 && margin_frac < 0.5)) {
    throw Error(ErrorKind::InvalidParameter, "margin_frac must lie in [0, 0.5)");
  }
  std::size_t top = img.height, bottom = 0, left = img.width, right = 0;
  bool any = false;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      if (leaf.at(y, x)) {
        any = true;
        top = std::min(top, y);
        bottom = std::max(bottom, y);
        left = std::min(left, x);
        right = std::max(right, x);
      }
  if (!any) throw Error(ErrorKind::EmptyMask, "cannot crop to an empty mask");

  const auto pad_y = static_cast<std::size_t>(margin_frac * static_cast<double>(bottom - top + 1));
  const auto pad_x = static_cast<std::size_t>(margin_frac * static_cast<double>(right - left + 1));
  top = top >= pad_y ? top - pad_y : 0;
  left = left >= pad_x ? left - pad_x : 0;
  bottom = std::min(img.height - 1, bottom + pad_y);
  right = std::min(img.width - 1, right + pad_x);

  ImageRGB crop(bottom - top + 1, right - left + 1);
  for (std::size_t y = 0; y < crop.height; ++y)
    for (std::size_t x = 0; x < crop.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) crop.at(y, x, c) = img.at(top + y, left + x, c);
  return resize_bilinear(crop, out_h, out_w);
}

// ---------------------------------------------------------------------------
// Severity

SeverityClass bin_severity(double ratio) {
  if (ratio < 0.001) return SeverityClass::healthy;
  if (ratio <= 0.05) return SeverityClass::very_low;
  if (ratio <= 0.10) return SeverityClass::low;
  if (ratio <= 0.15) return SeverityClass::high;
  return SeverityClass::very_high;
}

SeverityResult severity_ratio_and_bin(const Mask& symptom, const Mask& leaf) {
  if (symptom.height != leaf.height || symptom.width != leaf.width) {
    throw Error(ErrorKind::ShapeMismatch, "symptom and leaf masks differ in size");
  }
  const std::size_t leaf_px = leaf.count();
  if (leaf_px == 0) throw Error(ErrorKind::EmptyLeafMask, "leaf mask has no pixels");
  std::size_t sym_px = 0;
  for (std::size_t i = 0; i < leaf.bits.size(); ++i) {
    if (!symptom.bits[i]) continue;
    if (!leaf.bits[i]) throw Error(ErrorKind::SymptomOutsideLeaf, "symptom pixel outside the leaf mask");
    ++sym_px;
  }
  const double ratio = static_cast<double>(sym_px) / static_cast<double>(leaf_px);
  return {ratio, bin_severity(ratio)};
}

Tensor to_tensor(const ImageRGB& img) {
  Tensor t({3, img.height, img.width});
  const std::size_t area = img.height * img.width;
  for (std::size_t i = 0; i < area; ++i)
    for (std::size_t c = 0; c < 3; ++c) t[c * area + i] = img.pixels[i * 3 + c];
  return t;
}

ImageRGB from_tensor(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw Error(ErrorKind::ShapeMismatch, "expected [3, H, W] tensor");
  ImageRGB img(t.dim(1), t.dim(2));
  const std::size_t area = img.height * img.width;
  for (std::size_t i = 0; i < area; ++i)
    for (std::size_t c = 0; c < 3; ++c) img.pixels[i * 3 + c] = t[c * area + i];
  return img;
}

}  // namespace leafstress
