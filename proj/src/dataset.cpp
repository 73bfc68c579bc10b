#include "musgae/dataset.h"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "musgae/errors.h"

namespace musgae {
namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> buf;
  for (size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf.data(), buf.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> buf;
  if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size())) throw DataError("MTP1: truncated file");
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
  return v;
}

void put_bits(std::ostream& out, const BitVec& b) {
  const auto bytes = b.to_bytes();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

BitVec get_bits(std::istream& in, size_t bits) {
  std::vector<uint8_t> bytes((bits + 7) / 8);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw DataError("MTP1: truncated sample data");
  }
  return BitVec::from_bytes(bytes, bits);
}

}  // namespace

void write_mtp1(std::ostream& out, const PairDataset& ds) {
  out.write("MTP1", 4);
  put_le<uint32_t>(out, kMtp1Version);
  put_le<uint8_t>(out, static_cast<uint8_t>(ds.type));
  put_le<uint32_t>(out, static_cast<uint32_t>(kNgramBits));
  put_le<uint64_t>(out, static_cast<uint64_t>(ds.samples.size()));
  for (const auto& s : ds.samples) {
    put_le<uint16_t>(out, s.label);
    put_bits(out, s.x);
    put_bits(out, s.y);
  }
}

void write_mtp1(const std::filesystem::path& path, const PairDataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset " + path.string());
  write_mtp1(out, ds);
  if (!out) throw DataError("error writing dataset " + path.string());
}

PairDataset read_mtp1(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MTP1", 4) != 0) throw DataError("MTP1: bad magic");
  const auto version = get_le<uint32_t>(in);
  if (version != kMtp1Version) throw DataError("MTP1: unsupported version " + std::to_string(version));
  const auto tag = get_le<uint8_t>(in);
  if (tag > 3) throw DataError("MTP1: unknown transform tag " + std::to_string(tag));
  const auto bits = get_le<uint32_t>(in);
  if (bits != static_cast<uint32_t>(kNgramBits)) throw DataError("MTP1: expected P = 520, got " + std::to_string(bits));
  const auto count = get_le<uint64_t>(in);

  PairDataset ds;
  ds.type = static_cast<TransformType>(tag);
  const auto classes = static_cast<uint16_t>(class_count(ds.type));
  ds.samples.reserve(static_cast<size_t>(std::min<uint64_t>(count, 1u << 24)));
  for (uint64_t i = 0; i < count; ++i) {
    PairSample s;
    s.type = ds.type;
    s.label = get_le<uint16_t>(in);
    if (s.label >= classes) throw DataError("MTP1: label " + std::to_string(s.label) + " out of range at sample " + std::to_string(i));
    s.x = get_bits(in, bits);
    s.y = get_bits(in, bits);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

PairDataset read_mtp1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return read_mtp1(in);
}

}  // namespace musgae
