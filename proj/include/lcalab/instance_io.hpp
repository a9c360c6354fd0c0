#pragma once

#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "lcalab/errors.hpp"
#include "lcalab/instance.hpp"

namespace lcalab {

// LCAM layout, all integers little-endian:
//   "LCAM" u16 version
//   params: u64 N, u32 k, u32 d, u32 s, u8 variant, u8 world, u64 seed
//   u32 extended_repairs
//   u32 block count B, B x (u8 kind, u8 level, u8 side, u8 part), (B+1) x u32 block_begin
//   u32 n, n x u16 block index (the label array)
//   (n+1) x u64 CSR offsets, u64 adjacency length, adjacency x u32
//   u64 broken count, broken x u32
inline constexpr std::uint16_t kLcamVersion = 1;

namespace detail {

class ByteWriter {
 public:
  template <class T>
  void put(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bytes.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
  std::string bytes;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& data) : data_(data) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw FormatError("LCAM: truncated file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= std::uint64_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  std::uint64_t count(std::uint64_t max) {
    auto c = get<std::uint64_t>();
    if (c > max) throw FormatError("LCAM: implausible array length");
    return c;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_instance(const Instance& inst) {
  detail::ByteWriter w;
  w.bytes = "LCAM";
  w.put<std::uint16_t>(kLcamVersion);
  const auto& p = inst.params;
  w.put<std::uint64_t>(p.N);
  w.put<std::uint32_t>(p.k);
  w.put<std::uint32_t>(p.d);
  w.put<std::uint32_t>(p.s);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.variant));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.world));
  w.put<std::uint64_t>(p.seed);
  w.put<std::uint32_t>(inst.extended_repairs);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.blocks.size()));
  for (const auto& b : inst.blocks) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(b.kind));
    w.put<std::uint8_t>(b.level);
    w.put<std::uint8_t>(b.side);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(b.part));
  }
  for (auto x : inst.block_begin) w.put<std::uint32_t>(x);
  w.put<std::uint32_t>(inst.n());
  for (auto x : inst.block_of) w.put<std::uint16_t>(x);
  for (auto x : inst.offsets) w.put<std::uint64_t>(x);
  w.put<std::uint64_t>(inst.adjacency.size());
  for (auto x : inst.adjacency) w.put<std::uint32_t>(x);
  w.put<std::uint64_t>(inst.broken.size());
  for (auto x : inst.broken) w.put<std::uint32_t>(x);
  return std::move(w.bytes);
}

inline Instance decode_instance(const std::string& data) {
  if (data.size() < 6 || data.compare(0, 4, "LCAM") != 0) throw FormatError("LCAM: bad magic");
  const std::string body = data.substr(4);
  detail::ByteReader r(body);
  const auto version = r.get<std::uint16_t>();
  if (version != kLcamVersion)
    throw FormatError("LCAM: unsupported version " + std::to_string(version));

  Instance inst;
  auto& p = inst.params;
  p.N = r.get<std::uint64_t>();
  p.k = r.get<std::uint32_t>();
  p.d = r.get<std::uint32_t>();
  p.s = r.get<std::uint32_t>();
  const auto variant = r.get<std::uint8_t>();
  const auto world = r.get<std::uint8_t>();
  if (variant > 2 || world > 1) throw FormatError("LCAM: bad enum in params");
  p.variant = static_cast<Variant>(variant);
  p.world = static_cast<World>(world);
  p.seed = r.get<std::uint64_t>();
  inst.extended_repairs = r.get<std::uint32_t>();

  const auto nb = r.get<std::uint32_t>();
  if (nb > 65535) throw FormatError("LCAM: too many blocks");
  for (std::uint32_t i = 0; i < nb; ++i) {
    BlockLabel b;
    b.kind = static_cast<BlockKind>(r.get<std::uint8_t>());
    b.level = r.get<std::uint8_t>();
    b.side = r.get<std::uint8_t>();
    b.part = static_cast<Part>(r.get<std::uint8_t>());
    if (!b.well_formed()) throw FormatError("LCAM: malformed block label");
    inst.blocks.push_back(b);
  }
  for (std::uint32_t i = 0; i <= nb; ++i) inst.block_begin.push_back(r.get<std::uint32_t>());
  const auto n = r.get<std::uint32_t>();
  if (inst.block_begin.back() != n) throw FormatError("LCAM: block table does not cover n");
  inst.block_of.resize(n);
  for (auto& x : inst.block_of) {
    x = r.get<std::uint16_t>();
    if (x >= nb) throw FormatError("LCAM: block index out of range");
  }
  inst.offsets.resize(std::size_t(n) + 1);
  for (auto& x : inst.offsets) x = r.get<std::uint64_t>();
  const auto m2 = r.count(body.size() / 4);
  if (m2 != inst.offsets.back()) throw FormatError("LCAM: adjacency length mismatch");
  inst.adjacency.resize(m2);
  for (auto& x : inst.adjacency) x = r.get<std::uint32_t>();
  const auto nbroken = r.count(n);
  inst.broken.resize(nbroken);
  for (auto& x : inst.broken) x = r.get<std::uint32_t>();
  if (!r.done()) throw FormatError("LCAM: trailing bytes");
  return inst;
}

inline void save_instance(const Instance& inst, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  const auto bytes = encode_instance(inst);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline Instance load_instance(const std::string& path) { return decode_instance(read_file(path)); }

}  // namespace lcalab
