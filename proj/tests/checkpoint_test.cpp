#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>

#include "leafstress/checkpoint.hpp"
#include "leafstress/image.hpp"

using namespace leafstress;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::IoError;
}

Checkpoint sample_checkpoint() {
  ArchConfig c;
  c.input_size = 16;
  MultiTaskNet net(c, 9);
  // Nudge running statistics so buffers are not trivially default.
  RngStream rng(1, 1);
  Tensor x({2, 3, 16, 16});
  for (auto& v : x.data()) v = float(rng.uniform01());
  net.forward(x, Phase::train);
  return snapshot(net, 7, 0.123456789012345);
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto ckpt = sample_checkpoint();
  const auto path = std::filesystem::temp_directory_path() / "leafstress_ckpt_test.lfst";
  save_checkpoint(path, ckpt);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back, ckpt);
  EXPECT_EQ(back.epoch, 7u);
  EXPECT_EQ(back.val_loss, 0.123456789012345);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(ckpt));
}

TEST(Checkpoint, SpecialFloatsSurvive) {
  Checkpoint c;
  c.tensors.push_back({"odd", Tensor({2, 2}, {-0.0f, 1e-45f, 3.4e38f, std::nanf("")})});
  const auto back = decode_checkpoint(encode_checkpoint(c));
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.tensors[0].tensor[i]), std::bit_cast<std::uint32_t>(c.tensors[0].tensor[i]));
}

TEST(Checkpoint, LayoutHeader) {
  Checkpoint c;
  c.tensors.push_back({"w", Tensor({3}, {1, 2, 3})});
  const auto bytes = encode_checkpoint(c);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "LFST");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[8], 4);  // one tensor plus three meta tensors
  EXPECT_EQ(bytes[12], 1);  // name length
  EXPECT_EQ(bytes[14], 'w');
  EXPECT_EQ(bytes[15], 1);  // rank
  EXPECT_EQ(bytes[16], 3);  // dim
  // 1.0f = 0x3f800000 little-endian.
  EXPECT_EQ(bytes[20], 0x00);
  EXPECT_EQ(bytes[23], 0x3f);
}

TEST(Checkpoint, Errors) {
  auto bytes = encode_checkpoint(sample_checkpoint());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bad_magic); }), ErrorKind::BadMagic);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bad_version); }), ErrorKind::UnsupportedVersion);
  for (std::size_t cut : {std::size_t(10), bytes.size() / 2, bytes.size() - 5}) {
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + cut);
    EXPECT_EQ(kind_of([&] { decode_checkpoint(truncated); }), ErrorKind::TruncatedFile) << cut;
  }
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  EXPECT_EQ(kind_of([&] { decode_checkpoint(flipped); }), ErrorKind::ChecksumMismatch);
  EXPECT_EQ(kind_of([] { load_checkpoint("/nonexistent/ckpt.lfst"); }), ErrorKind::FileNotFound);
}

TEST(Checkpoint, RestoreIntoNetwork) {
  ArchConfig c;
  c.input_size = 16;
  MultiTaskNet a(c, 1), b(c, 2);
  const auto ck = snapshot(a, 0, 1.0);
  restore(b, ck);
  for (std::size_t i = 0; i < a.state().size(); ++i) EXPECT_EQ(*a.state()[i].second, *b.state()[i].second);
  ArchConfig other = c;
  other.mode = TaskMode::single_task_stress;
  MultiTaskNet s(other, 1);
  EXPECT_EQ(kind_of([&] { restore(s, ck); }), ErrorKind::FingerprintMismatch);
}
