#include "musgae/rng.h"

#include <cmath>
#include <numeric>

namespace musgae {

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  const auto span = static_cast<uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
  // Multiply-high reduction; the bias is below span / 2^64.
  const auto wide = static_cast<unsigned __int128>(next_u64()) * span;
  return lo + static_cast<int64_t>(wide >> 64);
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Rng Rng::split(uint64_t tag) const {
  return Rng(mix64(key_ ^ mix64(tag + 0x243F6A8885A308D3ULL)), true);
}

Rng Rng::split(std::string_view tag) const {
  // FNV-1a
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return split(h);
}

std::vector<size_t> Rng::permutation(size_t n) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = n; i > 1; --i) {
    const auto j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace musgae
