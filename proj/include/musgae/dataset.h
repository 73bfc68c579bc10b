// MTP1 pair-dataset files.
//
// Layout (all integers little-endian):
//   bytes 0..3   magic "MTP1"
//   bytes 4..7   u32 format version (1)
//   byte  8      u8 transform type tag (0 TransC, 1 TransD, 2 Tempo, 3 Retro)
//   bytes 9..12  u32 P, bits per n-gram (520)
//   bytes 13..20 u64 sample count
//   then per sample: u16 label, x packed LSB-first into ceil(P/8) bytes,
//   y likewise.

#pragma once

#include <filesystem>
#include <iosfwd>

#include "musgae/transforms.h"

namespace musgae {

inline constexpr uint32_t kMtp1Version = 1;

void write_mtp1(std::ostream& out, const PairDataset& ds);
void write_mtp1(const std::filesystem::path& path, const PairDataset& ds);

// Throws DataError on a bad magic, version, type tag, P or label, or on
// truncation. Rejection statistics are not stored and come back zeroed.
PairDataset read_mtp1(std::istream& in);
PairDataset read_mtp1(const std::filesystem::path& path);

}  // namespace musgae
