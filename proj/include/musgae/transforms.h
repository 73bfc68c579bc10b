// Labeled n-gram pairs for the four transformation types: chromatic
// transposition, diatonic transposition, tempo change and retrograde.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "musgae/pianoroll.h"
#include "musgae/rng.h"

namespace musgae {

enum class TransformType : uint8_t { TransC = 0, TransD = 1, Tempo = 2, Retro = 3 };

inline constexpr TransformType kAllTransforms[] = {TransformType::TransC, TransformType::TransD,
                                                   TransformType::Tempo, TransformType::Retro};

// 24 / 14 / 3 / 2
int class_count(TransformType t);
std::string_view transform_name(TransformType t);
// Accepts "TransC", "transc", ... Throws UsageError otherwise.
TransformType parse_transform(std::string_view name);
// Human-readable class label: "-12".."11", "-7".."6", "double"/"half"/"identity",
// "retrograde"/"identity".
std::string class_name(TransformType t, int label);

// Tempo labels.
inline constexpr int kTempoDouble = 0;
inline constexpr int kTempoHalf = 1;
inline constexpr int kTempoIdentity = 2;
// Retro labels.
inline constexpr int kRetroRetrograde = 0;
inline constexpr int kRetroIdentity = 1;

struct KeyId {
  int tonic = 0;        // pitch class of the major key's tonic
  int accidentals = 0;  // 0..6

  bool operator==(const KeyId&) const = default;
};

// Shifts every set cell by k pitch rows; empty if any note leaves [36, 100].
std::optional<NGram> shift_pitch(const NGram& g, int k);

// Random shift by k in [-12, 11], resampled while the result leaves the
// pitch range; gives up after 24 attempts.
std::optional<NGram> preshift(const NGram& g, Rng& rng);

// k in [-12, 11] (std::invalid_argument otherwise); label = k + 12.
std::optional<NGram> transpose_chromatic(const NGram& g, int k);

// Minimum-accidental major key whose scale holds every pitch class of g.
// Empty if no key fits or the minimum is shared.
std::optional<KeyId> estimate_key(const NGram& g);

// Moves every pitch by `steps` scale degrees of the key (degrees counted
// across octaves, so 7 steps is an octave). Throws std::invalid_argument if
// a pitch is not in the scale; empty if the result leaves the pitch range.
std::optional<NGram> shift_scale_steps(const NGram& g, const KeyId& key, int steps);

// Range-checked form: k in [-7, 6]; label = k + 7.
std::optional<NGram> transpose_diatonic(const NGram& g, const KeyId& key, int k);

// Output columns 2i and 2i+1 copy input column i, i in [0, 3].
NGram halftime(const NGram& g);

// Output column t = input column 7 - t.
NGram retrograde(const NGram& g);

struct PairSample {
  BitVec x;
  BitVec y;
  uint16_t label = 0;
  TransformType type = TransformType::TransC;

  bool operator==(const PairSample&) const = default;
};

struct PairStats {
  uint64_t ngrams_used = 0;
  uint64_t preshift_failures = 0;   // no in-range pre-shift in 24 attempts
  uint64_t range_rejections = 0;    // counterpart left the pitch range
  uint64_t key_fit_rejections = 0;  // no major key holds the n-gram
  uint64_t key_tie_rejections = 0;  // minimum-accidental key not unique
  uint64_t empty_rejections = 0;    // half-time counterpart would be empty
};

struct PairDataset {
  TransformType type = TransformType::TransC;
  std::vector<PairSample> samples;
  PairStats stats;

  std::vector<size_t> class_counts() const;
};

// Builds n pairs of the given type. Source n-grams are drawn without
// replacement in a random order; each one is pre-shifted and then given the
// counterpart for the sample's label. With `balance` the labels cycle
// through all classes before shuffling, so class counts differ by at most
// one. Throws DataError when the n-gram pool runs out, naming the dominant
// rejection reason.
PairDataset make_pairs(std::span<const NGram> ngrams, TransformType type, size_t n, Rng& rng,
                       bool balance = true);

// Applies the labeled transformation to x (Tempo "double" is not
// computable from x alone and yields empty).
std::optional<NGram> apply_label(const NGram& x, TransformType type, int label);

}  // namespace musgae
