// Binary piano rolls over MIDI pitches [36, 100] at 1/16-note resolution,
// the 65 x 8 n-grams cut from them, and their packed bit-vector encoding.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace musgae {

inline constexpr int kMinPitch = 36;
inline constexpr int kMaxPitch = 100;
inline constexpr int kPitchRows = kMaxPitch - kMinPitch + 1;  // 65
inline constexpr int kNgramCols = 8;
inline constexpr int kNgramBits = kPitchRows * kNgramCols;  // 520
inline constexpr int kPairBits = 2 * kNgramBits;            // 1040

struct NoteEvent {
  int pitch = 60;         // MIDI number
  int64_t onset = 0;      // 1/16-note grid ticks
  int64_t duration = 1;   // grid ticks, >= 1

  bool operator==(const NoteEvent&) const = default;
};

class PianoRoll {
 public:
  PianoRoll() = default;
  explicit PianoRoll(int64_t cols) : cols_(cols), cells_(static_cast<size_t>(kPitchRows * cols), 0) {}

  int rows() const { return kPitchRows; }
  int64_t cols() const { return cols_; }

  uint8_t at(int row, int64_t col) const { return cells_[index(row, col)]; }
  void set(int row, int64_t col, bool on = true) { cells_[index(row, col)] = on ? 1 : 0; }

 private:
  size_t index(int row, int64_t col) const { return static_cast<size_t>(row * cols_ + col); }

  int64_t cols_ = 0;
  std::vector<uint8_t> cells_;
};

struct RollResult {
  PianoRoll roll;
  size_t in_range = 0;
  size_t dropped = 0;  // notes outside [36, 100]
};

// Cell (pitch - 36, t) is set iff some note sounds at t. The roll spans up
// to the latest note end over all input notes.
RollResult roll_from_notes(std::span<const NoteEvent> notes);

// Binary 65 x 8 pitch/time matrix; row 0 is pitch 36.
class NGram {
 public:
  NGram() { cells_.fill(0); }

  uint8_t at(int row, int col) const { return cells_[static_cast<size_t>(row * kNgramCols + col)]; }
  void set(int row, int col, bool on = true) {
    cells_[static_cast<size_t>(row * kNgramCols + col)] = on ? 1 : 0;
  }
  bool empty() const;
  int count() const;

  // Distinct sounding MIDI pitches, ascending.
  std::vector<int> pitches() const;

  const std::array<uint8_t, kNgramBits>& cells() const { return cells_; }

  bool operator==(const NGram&) const = default;

 private:
  std::array<uint8_t, kNgramBits> cells_;
};

// Windows at offsets 0, stride, 2*stride, ... that fit completely; all-zero
// windows are skipped. Throws std::invalid_argument for stride < 1.
std::vector<NGram> extract_ngrams(const PianoRoll& roll, int64_t stride);

// Number of windows before empty filtering.
int64_t window_count(int64_t cols, int64_t stride);

// Packed bit vector of length 520 (one n-gram) or 1040 (a concatenated pair).
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(size_t size);

  size_t size() const { return size_; }
  bool get(size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1ULL; }
  void set(size_t i, bool on = true);
  size_t count() const;
  bool none() const { return count() == 0; }

  // Indices of set bits, ascending.
  std::vector<uint32_t> ones() const;

  // Bits packed LSB-first into ceil(size / 8) bytes.
  std::vector<uint8_t> to_bytes() const;
  static BitVec from_bytes(std::span<const uint8_t> bytes, size_t size);

  bool operator==(const BitVec&) const = default;

 private:
  size_t size_ = 0;
  std::vector<uint64_t> words_;
};

// Pitch-major flattening: bit index = row * 8 + col.
BitVec encode(const NGram& g);
// Throws std::invalid_argument unless b.size() == 520.
NGram decode(const BitVec& b);

BitVec concat(const BitVec& x, const BitVec& y);

// Renders a 65 x 8 grid of probabilities in [0, 1] (pitch-major, row 0 =
// pitch 36). Values outside [0, 1] throw std::invalid_argument.
//
// PGM layout: the ASCII header "P5\n8 65\n255\n" followed by 520 raster
// bytes, 8 per line, top line = pitch 100 (row 64) down to pitch 36. Each
// byte is round(255 * (1 - p)), so certain notes are black. When
// `scale_pitch_classes` is given, cells on scale pitches are capped at 208
// to draw light guide lines.
std::string render_pgm(std::span<const double> probs,
                       const std::optional<std::array<bool, 12>>& scale_pitch_classes = std::nullopt);
std::string render_pgm(const NGram& g);

// ASCII: one line per pitch from 100 down to 36, "NNN |" then 8 cells then
// "|". Cells: '#' for p >= 0.75, '+' for p >= 0.5, '.' for p >= 0.25, ' '
// otherwise.
std::string render_ascii(std::span<const double> probs);
std::string render_ascii(const NGram& g);

std::vector<double> to_probs(const NGram& g);

}  // namespace musgae
