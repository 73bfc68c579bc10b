// Major-scale arithmetic shared by key estimation, diatonic transposition
// and the synthetic corpus generator.

#pragma once

#include <array>
#include <optional>

namespace musgae::scale {

inline constexpr std::array<int, 7> kMajorSteps = {0, 2, 4, 5, 7, 9, 11};

constexpr int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
constexpr int floor_mod(int a, int b) { return a - b * floor_div(a, b); }

// Number of sharps or flats in the signature of the major key on `tonic`
// (pitch class); F#/Gb counts 6.
constexpr int accidentals(int tonic) {
  const int fifths = floor_mod(tonic * 7, 12);
  return fifths <= 6 ? fifths : 12 - fifths;
}

constexpr bool in_scale(int pitch, int tonic) {
  const int rel = floor_mod(pitch - tonic, 12);
  for (int s : kMajorSteps) {
    if (s == rel) return true;
  }
  return false;
}

// Scale-degree index counted across octaves: 7 * octave + position, with
// degree 0 at MIDI pitch `tonic` (octave -1). Empty for non-scale pitches.
constexpr std::optional<int> degree_of(int pitch, int tonic) {
  const int rel = pitch - tonic;
  const int oct = floor_div(rel, 12);
  const int pc = floor_mod(rel, 12);
  for (int i = 0; i < 7; ++i) {
    if (kMajorSteps[static_cast<size_t>(i)] == pc) return 7 * oct + i;
  }
  return std::nullopt;
}

constexpr int pitch_of_degree(int degree, int tonic) {
  return tonic + 12 * floor_div(degree, 7) + kMajorSteps[static_cast<size_t>(floor_mod(degree, 7))];
}

constexpr std::array<bool, 12> pitch_class_mask(int tonic) {
  std::array<bool, 12> m{};
  for (int s : kMajorSteps) m[static_cast<size_t>(floor_mod(tonic + s, 12))] = true;
  return m;
}

}  // namespace musgae::scale
