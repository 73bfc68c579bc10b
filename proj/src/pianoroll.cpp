#include "musgae/pianoroll.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace musgae {

RollResult roll_from_notes(std::span<const NoteEvent> notes) {
  int64_t end = 0;
  for (const auto& n : notes) end = std::max(end, n.onset + n.duration);
  RollResult out{PianoRoll(end), 0, 0};
  for (const auto& n : notes) {
    if (n.pitch < kMinPitch || n.pitch > kMaxPitch) {
      ++out.dropped;
      continue;
    }
    ++out.in_range;
    for (int64_t t = n.onset; t < n.onset + n.duration; ++t) out.roll.set(n.pitch - kMinPitch, t);
  }
  return out;
}

bool NGram::empty() const {
  return std::none_of(cells_.begin(), cells_.end(), [](uint8_t c) { return c != 0; });
}

int NGram::count() const {
  return static_cast<int>(std::count(cells_.begin(), cells_.end(), uint8_t{1}));
}

std::vector<int> NGram::pitches() const {
  std::vector<int> out;
  for (int r = 0; r < kPitchRows; ++r) {
    for (int c = 0; c < kNgramCols; ++c) {
      if (at(r, c)) {
        out.push_back(r + kMinPitch);
        break;
      }
    }
  }
  return out;
}

int64_t window_count(int64_t cols, int64_t stride) {
  if (cols < kNgramCols) return 0;
  return (cols - kNgramCols) / stride + 1;
}

std::vector<NGram> extract_ngrams(const PianoRoll& roll, int64_t stride) {
  if (stride < 1) throw std::invalid_argument("n-gram stride must be >= 1");
  std::vector<NGram> out;
  const int64_t n = window_count(roll.cols(), stride);
  for (int64_t w = 0; w < n; ++w) {
    const int64_t off = w * stride;
    NGram g;
    bool any = false;
    for (int r = 0; r < kPitchRows; ++r) {
      for (int c = 0; c < kNgramCols; ++c) {
        if (roll.at(r, off + c)) {
          g.set(r, c);
          any = true;
        }
      }
    }
    if (any) out.push_back(g);
  }
  return out;
}

BitVec::BitVec(size_t size) : size_(size), words_((size + 63) / 64, 0) {}

void BitVec::set(size_t i, bool on) {
  const uint64_t bit = 1ULL << (i & 63);
  if (on) {
    words_[i >> 6] |= bit;
  } else {
    words_[i >> 6] &= ~bit;
  }
}

size_t BitVec::count() const {
  size_t n = 0;
  for (auto w : words_) n += static_cast<size_t>(std::popcount(w));
  return n;
}

std::vector<uint32_t> BitVec::ones() const {
  std::vector<uint32_t> out;
  for (size_t w = 0; w < words_.size(); ++w) {
    uint64_t bits = words_[w];
    while (bits) {
      out.push_back(static_cast<uint32_t>(w * 64 + static_cast<size_t>(std::countr_zero(bits))));
      bits &= bits - 1;
    }
  }
  return out;
}

std::vector<uint8_t> BitVec::to_bytes() const {
  std::vector<uint8_t> out((size_ + 7) / 8, 0);
  for (size_t i = 0; i < size_; ++i) {
    if (get(i)) out[i >> 3] |= static_cast<uint8_t>(1u << (i & 7));
  }
  return out;
}

BitVec BitVec::from_bytes(std::span<const uint8_t> bytes, size_t size) {
  if (bytes.size() != (size + 7) / 8) throw std::invalid_argument("bit vector byte length mismatch");
  BitVec b(size);
  for (size_t i = 0; i < size; ++i) {
    if ((bytes[i >> 3] >> (i & 7)) & 1u) b.set(i);
  }
  return b;
}

BitVec encode(const NGram& g) {
  BitVec b(kNgramBits);
  const auto& cells = g.cells();
  for (size_t i = 0; i < cells.size(); ++i) {
    if (cells[i]) b.set(i);
  }
  return b;
}

NGram decode(const BitVec& b) {
  if (b.size() != static_cast<size_t>(kNgramBits)) {
    throw std::invalid_argument("decode expects 520 bits, got " + std::to_string(b.size()));
  }
  NGram g;
  for (int r = 0; r < kPitchRows; ++r) {
    for (int c = 0; c < kNgramCols; ++c) {
      if (b.get(static_cast<size_t>(r * kNgramCols + c))) g.set(r, c);
    }
  }
  return g;
}

BitVec concat(const BitVec& x, const BitVec& y) {
  BitVec out(x.size() + y.size());
  for (auto i : x.ones()) out.set(i);
  for (auto i : y.ones()) out.set(x.size() + i);
  return out;
}

std::vector<double> to_probs(const NGram& g) {
  std::vector<double> p(kNgramBits);
  for (size_t i = 0; i < p.size(); ++i) p[i] = g.cells()[i];
  return p;
}

namespace {

void check_probs(std::span<const double> probs) {
  if (probs.size() != static_cast<size_t>(kNgramBits)) {
    throw std::invalid_argument("render expects 520 values");
  }
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("render values must lie in [0, 1]");
  }
}

}  // namespace

std::string render_pgm(std::span<const double> probs,
                       const std::optional<std::array<bool, 12>>& scale_pitch_classes) {
  check_probs(probs);
  std::string out = "P5\n8 65\n255\n";
  out.reserve(out.size() + kNgramBits);
  for (int line = 0; line < kPitchRows; ++line) {
    const int row = kPitchRows - 1 - line;
    const bool guide = scale_pitch_classes && (*scale_pitch_classes)[(row + kMinPitch) % 12];
    for (int c = 0; c < kNgramCols; ++c) {
      const double p = probs[static_cast<size_t>(row * kNgramCols + c)];
      long v = std::lround(255.0 * (1.0 - p));
      if (guide) v = std::min(v, 208L);
      out.push_back(static_cast<char>(static_cast<uint8_t>(v)));
    }
  }
  return out;
}

std::string render_pgm(const NGram& g) { return render_pgm(to_probs(g)); }

std::string render_ascii(std::span<const double> probs) {
  check_probs(probs);
  std::string out;
  char label[8];
  for (int line = 0; line < kPitchRows; ++line) {
    const int row = kPitchRows - 1 - line;
    std::snprintf(label, sizeof(label), "%3d |", row + kMinPitch);
    out += label;
    for (int c = 0; c < kNgramCols; ++c) {
      const double p = probs[static_cast<size_t>(row * kNgramCols + c)];
      out.push_back(p >= 0.75 ? '#' : p >= 0.5 ? '+' : p >= 0.25 ? '.' : ' ');
    }
    out += "|\n";
  }
  return out;
}

std::string render_ascii(const NGram& g) { return render_ascii(to_probs(g)); }

}  // namespace musgae
