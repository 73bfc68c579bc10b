// Analogy-making: infer a mapping code from a template pair and apply it to
// an unseen n-gram ("x is to y as x_new is to ?").

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "musgae/gae.h"
#include "musgae/pianoroll.h"
#include "musgae/transforms.h"

namespace musgae {

// m = map(template_x, template_y) on the clean pair, length L.
Vector infer_mapping(const GaeModel& model, const BitVec& template_x, const BitVec& template_y);

// y~ = sigmoid(V^T ((W^T m) * (U x_new))), length P.
Vector apply_mapping(const GaeModel& model, const Vector& m, const BitVec& x_new);

struct AnalogyScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Binarizes at `threshold` (cell set iff p >= threshold) and compares with
// the truth cell by cell. Edge cases: no predicted and no true notes gives
// P = R = F1 = 1; no predictions against a non-empty truth gives P = 1,
// R = 0; predictions against an empty truth give P = 0, R = 1. F1 is the
// harmonic mean of P and R (0 when both are 0).
AnalogyScore score(std::span<const float> probs, const NGram& truth, double threshold = 0.5);

NGram threshold_ngram(std::span<const float> probs, double threshold = 0.5);

struct AnalogyResult {
  NGram source;
  Vector probs;  // length 520, pitch-major
  NGram generated;
  std::optional<NGram> truth;
  std::optional<AnalogyScore> scores;
};

AnalogyResult analogize(const GaeModel& model, const Vector& m, const NGram& source,
                        const std::optional<NGram>& truth, double threshold = 0.5);

// Indices of targets whose estimated key equals the template source's key
// (the diatonic protocol only transfers shifts within a key). Empty if the
// template has no unique key.
std::vector<size_t> same_key_targets(const NGram& template_source, std::span<const NGram> targets);

// PGM of a generated probability grid, with the key's scale pitches marked
// when `key` is given.
std::string render_generated(const Vector& probs, const std::optional<KeyId>& key = std::nullopt);

}  // namespace musgae
