#include "leafstress/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include <zlib.h>

#include "leafstress/image.hpp"

namespace leafstress {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'S', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw Error(ErrorKind::TruncatedFile, "checkpoint ends unexpectedly");
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

Tensor pack_u64(std::uint64_t v) {
  Tensor t({4});
  for (std::size_t i = 0; i < 4; ++i) t[i] = static_cast<float>((v >> (16 * i)) & 0xFFFF);
  return t;
}

std::uint64_t unpack_u64(const Tensor& t) {
  if (t.shape() != Shape{4}) throw Error(ErrorKind::ShapeMismatch, "meta tensor must have 4 elements");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const float f = t[i];
    if (!(f >= 0.0f && f <= 65535.0f) || f != static_cast<float>(static_cast<std::uint32_t>(f)))
      throw Error(ErrorKind::ShapeMismatch, "corrupt meta tensor");
    v |= static_cast<std::uint64_t>(f) << (16 * i);
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<NamedTensor> all = ckpt.tensors;
  all.push_back({"meta.epoch", pack_u64(ckpt.epoch)});
  all.push_back({"meta.val_loss", pack_u64(std::bit_cast<std::uint64_t>(ckpt.val_loss))});
  all.push_back({"meta.fingerprint", pack_u64(ckpt.fingerprint)});

  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kCheckpointVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(all.size()));
  for (const auto& nt : all) {
    if (nt.name.size() > 0xFFFF) throw Error(ErrorKind::InvalidParameter, "tensor name too long");
    if (nt.tensor.rank() > 0xFF) throw Error(ErrorKind::InvalidParameter, "tensor rank too large");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(nt.name.size()));
    w.bytes(nt.name.data(), nt.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(nt.tensor.rank()));
    for (std::size_t d : nt.tensor.shape()) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (float v : nt.tensor.data()) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
  }
  w.le<std::uint32_t>(crc32_of(w.out.data(), w.out.size()));
  return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw Error(ErrorKind::TruncatedFile, "checkpoint shorter than its magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorKind::BadMagic, "not a checkpoint file");
  Reader r(bytes.data() + 4, bytes.size() - 4);
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::UnsupportedVersion, "checkpoint version " + std::to_string(version));
  const auto count = r.le<std::uint32_t>();
  std::vector<NamedTensor> all;
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name = r.str(r.le<std::uint16_t>());
    const auto rank = r.le<std::uint8_t>();
    Shape shape(rank);
    std::uint64_t elems = 1;
    for (auto& d : shape) {
      d = r.le<std::uint32_t>();
      elems *= d;
    }
    if (rank == 0 || elems == 0) throw Error(ErrorKind::ShapeMismatch, "empty tensor '" + nt.name + "'");
    if (elems > r.remaining() / 4) throw Error(ErrorKind::TruncatedFile, "payload of '" + nt.name + "' is truncated");
    std::vector<float> values(elems);
    for (auto& v : values) v = std::bit_cast<float>(r.le<std::uint32_t>());
    nt.tensor = Tensor(std::move(shape), std::move(values));
    all.push_back(std::move(nt));
  }
  const std::size_t body = bytes.size() - r.remaining();
  const auto stored = r.le<std::uint32_t>();
  if (r.remaining() != 0) throw Error(ErrorKind::ChecksumMismatch, "trailing bytes after checksum");
  if (stored != crc32_of(bytes.data(), body)) throw Error(ErrorKind::ChecksumMismatch, "checkpoint CRC32 mismatch");

  Checkpoint ckpt;
  bool epoch = false, loss = false, fp = false;
  for (auto& nt : all) {
    if (nt.name == "meta.epoch") {
      ckpt.epoch = unpack_u64(nt.tensor);
      epoch = true;
    } else if (nt.name == "meta.val_loss") {
      ckpt.val_loss = std::bit_cast<double>(unpack_u64(nt.tensor));
      loss = true;
    } else if (nt.name == "meta.fingerprint") {
      ckpt.fingerprint = unpack_u64(nt.tensor);
      fp = true;
    } else {
      ckpt.tensors.push_back(std::move(nt));
    }
  }
  if (!epoch || !loss || !fp) throw Error(ErrorKind::TruncatedFile, "checkpoint metadata missing");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

Checkpoint snapshot(MultiTaskNet& net, std::uint64_t epoch, double val_loss) {
  Checkpoint c;
  for (auto& [name, t] : net.state()) c.tensors.push_back({name, *t});
  c.epoch = epoch;
  c.val_loss = val_loss;
  c.fingerprint = net.config().fingerprint();
  return c;
}

void restore(MultiTaskNet& net, const Checkpoint& ckpt) {
  if (ckpt.fingerprint != net.config().fingerprint())
    throw Error(ErrorKind::FingerprintMismatch, "checkpoint was trained with a different architecture");
  std::map<std::string, const Tensor*> by_name;
  for (const auto& nt : ckpt.tensors) by_name[nt.name] = &nt.tensor;
  auto state = net.state();
  if (by_name.size() != state.size()) throw Error(ErrorKind::ShapeMismatch, "checkpoint tensor count differs from network");
  for (auto& [name, t] : state) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorKind::ShapeMismatch, "checkpoint lacks tensor '" + name + "'");
    if (it->second->shape() != t->shape()) throw Error(ErrorKind::ShapeMismatch, "shape differs for '" + name + "'");
    *t = *it->second;
  }
}

}  // namespace leafstress
