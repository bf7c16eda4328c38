#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "leafstress/model.hpp"

namespace leafstress {

struct NamedTensor {
  std::string name;
  Tensor tensor;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::uint64_t epoch = 0;
  double val_loss = 0.0;
  std::uint64_t fingerprint = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "LFST", u32 version, u32 count, then per tensor u16 name length + name,
/// u8 rank, u32 dims, f32 payload (all little-endian), and a trailing CRC32
/// of every preceding byte. Epoch, validation loss and fingerprint travel as
/// tensors named meta.* that hold their 64-bit patterns in 16-bit pieces.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint snapshot(MultiTaskNet& net, std::uint64_t epoch, double val_loss);
/// Copies tensors into `net`; throws FingerprintMismatch or ShapeMismatch.
void restore(MultiTaskNet& net, const Checkpoint& ckpt);

}  // namespace leafstress
