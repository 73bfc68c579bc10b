// Deterministic synthetic corpus: diatonic random-walk polyphony with
// parallel thirds, fifths and octaves, one major key per piece. Stands in
// for a score corpus when none is available.

#pragma once

#include <cstdint>
#include <vector>

#include "musgae/pianoroll.h"

namespace musgae {

struct SynthConfig {
  int n_pieces = 200;
  int64_t length = 256;  // 1/16-note ticks per piece
  int min_voices = 2;
  int max_voices = 4;
  int tonic = -1;  // fixed major key tonic (pitch class), or -1 for a random key per piece
  // Relative weights of scale-step moves -3..+3 between consecutive notes.
  std::vector<double> step_weights = {0.05, 0.15, 0.25, 0.10, 0.25, 0.15, 0.05};
  // Relative weights of note durations 1, 2, 3, 4, 6, 8 ticks.
  std::vector<double> duration_weights = {0.30, 0.30, 0.10, 0.20, 0.05, 0.05};
  double rest_prob = 0.1;
  // Per note, probability of adding a parallel note a diatonic third, fifth
  // or octave above or below (relative weights below), as in keyboard
  // textures with doubled voices.
  double doubling_prob = 0.3;
  std::vector<double> doubling_weights = {0.3, 0.2, 0.5};
  uint64_t seed = 1;

  void validate() const;
};

// Per-piece tonic actually used (for tests and reports).
struct SynthCorpus {
  std::vector<std::vector<NoteEvent>> pieces;
  std::vector<int> tonics;
};

SynthCorpus gen_synthetic(const SynthConfig& cfg);

}  // namespace musgae
