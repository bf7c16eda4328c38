#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "leafstress/error.hpp"
#include "leafstress/image.hpp"

using namespace leafstress;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::IoError;
}

// Bilinear oracle written as a separable tent-kernel sum over every source
// pixel, independent of the floor/fraction formulation in the library.
ImageRGB tent_resize(const ImageRGB& src, std::size_t oh, std::size_t ow) {
  ImageRGB out(oh, ow);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    double v = (oy + 0.5) * double(src.height) / double(oh) - 0.5;
    v = std::min(std::max(v, 0.0), double(src.height - 1));
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double u = (ox + 0.5) * double(src.width) / double(ow) - 0.5;
      u = std::min(std::max(u, 0.0), double(src.width - 1));
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::size_t y = 0; y < src.height; ++y)
          for (std::size_t x = 0; x < src.width; ++x) {
            const double wy = std::max(0.0, 1.0 - std::abs(v - double(y)));
            const double wx = std::max(0.0, 1.0 - std::abs(u - double(x)));
            acc += wy * wx * src.at(y, x, c);
          }
        out.at(oy, ox, c) = float(acc);
      }
    }
  }
  return out;
}

void paint(ImageRGB& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w, std::array<double, 3> rgb) {
  for (std::size_t y = y0; y < y0 + h; ++y)
    for (std::size_t x = x0; x < x0 + w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = float(rgb[c]);
}

const std::array<double, 3> kGreen = hsv_to_rgb(120.0, 0.7, 0.6);
const std::array<double, 3> kOrange = hsv_to_rgb(30.0, 0.9, 0.95);

}  // namespace

TEST(Ppm, DecodesTwoPixels) {
  auto bytes = bytes_of("P6\n2 1\n255\n");
  for (int v : {255, 0, 0, 0, 255, 0}) bytes.push_back(std::uint8_t(v));
  const auto img = decode_image(bytes, ImageFormat::ppm_p6);
  EXPECT_EQ(img.height, 1u);
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.pixels, (std::vector<float>{1, 0, 0, 0, 1, 0}));
}

TEST(Ppm, HeaderWithComment) {
  auto bytes = bytes_of("P6 # made by hand\n1 1 # size\n255\n");
  for (int v : {0, 51, 255}) bytes.push_back(std::uint8_t(v));
  const auto img = decode_image(bytes, ImageFormat::ppm_p6);
  EXPECT_FLOAT_EQ(img.pixels[1], 0.2f);
}

TEST(Ppm, Errors) {
  EXPECT_EQ(kind_of([] { decode_image(bytes_of("P3\n1 1\n255\n0 0 0\n"), ImageFormat::ppm_p6); }),
            ErrorKind::MalformedHeader);
  EXPECT_EQ(kind_of([] { decode_image(bytes_of("P6\n2 2\n255\n" + std::string(9, 'a')), ImageFormat::ppm_p6); }),
            ErrorKind::TruncatedPixelData);
  EXPECT_EQ(kind_of([] { decode_image(bytes_of("P6\n1 1\n65535\n"), ImageFormat::ppm_p6); }),
            ErrorKind::UnsupportedFormat);
  EXPECT_EQ(kind_of([] { decode_image(bytes_of("\x89PNG"), ImageFormat::png); }), ErrorKind::UnsupportedFormat);
  EXPECT_EQ(kind_of([] { decode_image(bytes_of("P6\nx 1\n255\n"), ImageFormat::ppm_p6); }),
            ErrorKind::MalformedHeader);
}

TEST(Ppm, ByteRoundTripIsExact) {
  std::mt19937 gen(3);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 20; ++trial) {
    auto bytes = bytes_of("P6\n7 5\n255\n");
    for (int i = 0; i < 7 * 5 * 3; ++i) bytes.push_back(std::uint8_t(byte(gen)));
    EXPECT_EQ(encode_ppm(decode_image(bytes, ImageFormat::ppm_p6)), bytes);
  }
}

TEST(Pgm, MaskRoundTrip) {
  Mask m(3, 4);
  m.set(0, 1);
  m.set(2, 3);
  EXPECT_EQ(decode_mask_pgm(encode_mask_pgm(m)), m);
}

TEST(Hsv, Examples) {
  auto w = rgb_to_hsv(1.0, 1.0, 1.0);
  EXPECT_EQ(w.s, 0.0);
  EXPECT_EQ(w.v, 1.0);
  EXPECT_EQ(w.h, 0.0);
  auto r = rgb_to_hsv(1.0, 0.0, 0.0);
  EXPECT_EQ(r.h, 0.0);
  EXPECT_EQ(r.s, 1.0);
  EXPECT_EQ(r.v, 1.0);
  auto az = rgb_to_hsv(0.0, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(az.h, 210.0);
  EXPECT_EQ(az.s, 1.0);
  EXPECT_EQ(az.v, 1.0);
}

TEST(Hsv, InverseRoundTrip) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    const double r = u(gen), g = u(gen), b = u(gen);
    const auto hsv = rgb_to_hsv(r, g, b);
    if (hsv.s <= 0.0) continue;
    EXPECT_LT(hsv.h, 360.0);
    const auto back = hsv_to_rgb(hsv.h, hsv.s, hsv.v);
    ASSERT_NEAR(back[0], r, 1e-5);
    ASSERT_NEAR(back[1], g, 1e-5);
    ASSERT_NEAR(back[2], b, 1e-5);
  }
}

TEST(SegmentLeaf, RectangleOnWhite) {
  ImageRGB img(20, 30, {1, 1, 1});
  paint(img, 4, 6, 10, 15, kGreen);
  const auto mask = segment_leaf(img, 0.25);
  Mask expected(20, 30);
  for (std::size_t y = 4; y < 14; ++y)
    for (std::size_t x = 6; x < 21; ++x) expected.set(y, x);
  EXPECT_EQ(mask, expected);
}

TEST(SegmentLeaf, AllWhite) {
  EXPECT_EQ(kind_of([] { segment_leaf(ImageRGB(8, 8, {1, 1, 1}), 0.25); }), ErrorKind::NoLeafFound);
}

TEST(SegmentLeaf, KeepsLargestBlob) {
  ImageRGB img(30, 30, {1, 1, 1});
  paint(img, 2, 2, 10, 10, kGreen);   // 100 px
  paint(img, 20, 20, 5, 6, kGreen);   // 30 px
  const auto mask = segment_leaf(img, 0.25);
  EXPECT_EQ(mask.count(), 100u);
  EXPECT_TRUE(mask.at(5, 5));
  EXPECT_FALSE(mask.at(22, 22));
}

TEST(SegmentLeaf, IdempotentOnMaskedImage) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageRGB img(24, 24);
  for (auto& v : img.pixels) v = float(u(gen));
  const auto mask = segment_leaf(img, 0.4);
  ImageRGB masked = img;
  for (std::size_t y = 0; y < 24; ++y)
    for (std::size_t x = 0; x < 24; ++x)
      if (!mask.at(y, x))
        for (std::size_t c = 0; c < 3; ++c) masked.at(y, x, c) = 1.0f;
  EXPECT_EQ(segment_leaf(masked, 0.4), mask);
}

TEST(CropAndResize, FullMaskIsPlainResize) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageRGB img(9, 13);
  for (auto& v : img.pixels) v = float(u(gen));
  Mask full(9, 13);
  std::fill(full.bits.begin(), full.bits.end(), 1);
  EXPECT_EQ(crop_and_resize(img, full, 0.0, 16, 10), resize_bilinear(img, 16, 10));
}

TEST(CropAndResize, ConstantImageStaysConstant) {
  const ImageRGB img(10, 12, {0.2f, 0.4f, 0.6f});
  Mask m(10, 12);
  m.set(3, 4);
  m.set(6, 8);
  for (auto [h, w] : {std::pair{1, 1}, {7, 3}, {64, 64}}) {
    const auto out = crop_and_resize(img, m, 0.2, h, w);
    ASSERT_EQ(out.height, std::size_t(h));
    ASSERT_EQ(out.width, std::size_t(w));
    for (std::size_t i = 0; i < out.pixels.size(); ++i) EXPECT_NEAR(out.pixels[i], img.pixels[i % 3], 1e-7);
  }
}

TEST(CropAndResize, CheckerboardMatchesNaiveOracle) {
  ImageRGB board(2, 2);
  paint(board, 0, 0, 1, 1, {1, 1, 1});
  paint(board, 1, 1, 1, 1, {1, 1, 1});
  const auto up = resize_bilinear(board, 4, 4);
  const auto ref = tent_resize(board, 4, 4);
  for (std::size_t i = 0; i < up.pixels.size(); ++i) EXPECT_NEAR(up.pixels[i], ref.pixels[i], 1e-6);
  EXPECT_EQ(up.at(0, 0, 0), 1.0f);
  EXPECT_EQ(up.at(0, 3, 0), 0.0f);
  EXPECT_EQ(up.at(3, 0, 0), 0.0f);
  EXPECT_EQ(up.at(3, 3, 0), 1.0f);
  // Interior sample at source (0.25, 0.25): 0.75² + 0.25² = 0.625.
  EXPECT_NEAR(up.at(1, 1, 0), 0.625f, 1e-7);
}

TEST(CropAndResize, RandomResizesMatchOracleAndStayInRange) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int trial = 0; trial < 40; ++trial) {
    ImageRGB img(dim(gen), dim(gen));
    for (auto& v : img.pixels) v = float(u(gen));
    const std::size_t oh = dim(gen), ow = dim(gen);
    const auto out = resize_bilinear(img, oh, ow);
    const auto ref = tent_resize(img, oh, ow);
    ASSERT_EQ(out.height, oh);
    ASSERT_EQ(out.width, ow);
    const float lo = *std::min_element(img.pixels.begin(), img.pixels.end());
    const float hi = *std::max_element(img.pixels.begin(), img.pixels.end());
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
      EXPECT_NEAR(out.pixels[i], ref.pixels[i], 1e-6);
      EXPECT_GE(out.pixels[i], lo);
      EXPECT_LE(out.pixels[i], hi);
    }
  }
}

TEST(CropAndResize, MarginAndErrors) {
  ImageRGB img(20, 20, {1, 1, 1});
  paint(img, 5, 5, 10, 10, kGreen);
  const auto leaf = segment_leaf(img, 0.25);
  // Box 10×10, margin 0.2 → 2 px each side → 14×14 crop, returned at native size.
  const auto out = crop_and_resize(img, leaf, 0.2, 14, 14);
  EXPECT_EQ(out.at(0, 0, 0), 1.0f);
  EXPECT_NEAR(out.at(2, 2, 1), float(kGreen[1]), 1e-6);
  EXPECT_EQ(kind_of([&] { crop_and_resize(img, Mask(20, 20), 0.1, 8, 8); }), ErrorKind::EmptyMask);
}

TEST(SegmentSymptoms, UniformGreenLeafIsHealthy) {
  ImageRGB img(16, 16, {1, 1, 1});
  paint(img, 2, 2, 12, 12, kGreen);
  const auto leaf = segment_leaf(img, 0.25);
  EXPECT_EQ(segment_symptoms(img, leaf, ImagingConfig{}).count(), 0u);
}

TEST(SegmentSymptoms, OrangeBlobIsFound) {
  ImageRGB img(16, 16, {1, 1, 1});
  paint(img, 2, 2, 12, 12, kGreen);
  paint(img, 5, 6, 3, 4, kOrange);
  const auto leaf = segment_leaf(img, 0.25);
  const auto sym = segment_symptoms(img, leaf, ImagingConfig{});
  Mask expected(16, 16);
  for (std::size_t y = 5; y < 8; ++y)
    for (std::size_t x = 6; x < 10; ++x) expected.set(y, x);
  EXPECT_EQ(sym, expected);
}

TEST(SegmentSymptoms, DarkLesionAndSubset) {
  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageRGB img(20, 20);
  for (auto& v : img.pixels) v = float(u(gen));
  const auto leaf = segment_leaf(img, 0.3);
  const auto sym = segment_symptoms(img, leaf, ImagingConfig{});
  for (std::size_t i = 0; i < sym.bits.size(); ++i)
    if (sym.bits[i]) EXPECT_TRUE(leaf.bits[i]);

  ImageRGB dark(8, 8, {1, 1, 1});
  paint(dark, 1, 1, 6, 6, kGreen);
  paint(dark, 3, 3, 2, 2, hsv_to_rgb(120.0, 0.6, 0.25));  // green hue but dark
  const auto dleaf = segment_leaf(dark, 0.25);
  EXPECT_EQ(segment_symptoms(dark, dleaf, ImagingConfig{}).count(), 4u);
  EXPECT_EQ(kind_of([&] { segment_symptoms(dark, Mask(8, 8), ImagingConfig{}); }), ErrorKind::EmptyMask);
}

TEST(Severity, Examples) {
  auto make = [](std::size_t sym, std::size_t leaf) {
    Mask l(1, leaf), s(1, leaf);
    std::fill(l.bits.begin(), l.bits.end(), 1);
    for (std::size_t i = 0; i < sym; ++i) s.bits[i] = 1;
    return severity_ratio_and_bin(s, l);
  };
  auto r = make(50, 1000);
  EXPECT_EQ(r.ratio, 0.05);
  EXPECT_EQ(r.severity, SeverityClass::very_low);
  r = make(120, 1000);
  EXPECT_EQ(r.ratio, 0.12);
  EXPECT_EQ(r.severity, SeverityClass::high);
  r = make(0, 1000);
  EXPECT_EQ(r.ratio, 0.0);
  EXPECT_EQ(r.severity, SeverityClass::healthy);
  EXPECT_EQ(bin_severity(0.0501), SeverityClass::low);
  EXPECT_EQ(bin_severity(0.001), SeverityClass::very_low);
  EXPECT_EQ(bin_severity(0.10), SeverityClass::low);
  EXPECT_EQ(bin_severity(0.15), SeverityClass::high);
  EXPECT_EQ(bin_severity(0.1500001), SeverityClass::very_high);
}

TEST(Severity, Errors) {
  EXPECT_EQ(kind_of([] { severity_ratio_and_bin(Mask(2, 2), Mask(2, 2)); }), ErrorKind::EmptyLeafMask);
  Mask leaf(2, 2), sym(2, 2);
  leaf.set(0, 0);
  sym.set(1, 1);
  EXPECT_EQ(kind_of([&] { severity_ratio_and_bin(sym, leaf); }), ErrorKind::SymptomOutsideLeaf);
}

TEST(Severity, BinIsMonotone) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  for (int i = 0; i < 10000; ++i) {
    double a = u(gen), b = u(gen);
    if (a > b) std::swap(a, b);
    ASSERT_LE(rank(bin_severity(a)), rank(bin_severity(b)));
  }
}

TEST(TensorConversion, RoundTrip) {
  ImageRGB img(3, 2);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = float(i) / 20.0f;
  const auto t = to_tensor(img);
  EXPECT_EQ(t.shape(), (Shape{3, 3, 2}));
  EXPECT_EQ(t.at(1, 0, 1), img.at(0, 1, 1));
  EXPECT_EQ(from_tensor(t), img);
}
