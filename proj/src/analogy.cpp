#include "musgae/analogy.h"

#include <stdexcept>

#include "musgae/scale.h"

namespace musgae {

Vector infer_mapping(const GaeModel& model, const BitVec& template_x, const BitVec& template_y) {
  return map(model, template_x, template_y);
}

Vector apply_mapping(const GaeModel& model, const Vector& m, const BitVec& x_new) {
  return reconstruct_y(model, m, x_new);
}

NGram threshold_ngram(std::span<const float> probs, double threshold) {
  if (probs.size() != static_cast<size_t>(kNgramBits)) throw std::invalid_argument("threshold_ngram: need 520 values");
  NGram g;
  for (int r = 0; r < kPitchRows; ++r) {
    for (int c = 0; c < kNgramCols; ++c) {
      if (probs[static_cast<size_t>(r * kNgramCols + c)] >= threshold) g.set(r, c, true);
    }
  }
  return g;
}

AnalogyScore score(std::span<const float> probs, const NGram& truth, double threshold) {
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("score: threshold must lie in (0, 1)");
  const NGram gen = threshold_ngram(probs, threshold);
  int tp = 0, predicted = 0, actual = 0;
  for (int r = 0; r < kPitchRows; ++r) {
    for (int c = 0; c < kNgramCols; ++c) {
      const bool p = gen.at(r, c), t = truth.at(r, c);
      predicted += p;
      actual += t;
      tp += p && t;
    }
  }
  AnalogyScore s;
  s.precision = predicted == 0 ? 1.0 : static_cast<double>(tp) / predicted;
  s.recall = actual == 0 ? 1.0 : static_cast<double>(tp) / actual;
  if (predicted == 0 && actual > 0) s.recall = 0.0;
  if (actual == 0 && predicted > 0) s.precision = 0.0;
  const double denom = s.precision + s.recall;
  s.f1 = denom > 0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

AnalogyResult analogize(const GaeModel& model, const Vector& m, const NGram& source,
                        const std::optional<NGram>& truth, double threshold) {
  AnalogyResult r;
  r.source = source;
  r.probs = apply_mapping(model, m, encode(source));
  const std::span<const float> probs(r.probs.data(), static_cast<size_t>(r.probs.size()));
  r.generated = threshold_ngram(probs, threshold);
  r.truth = truth;
  if (truth) r.scores = score(probs, *truth, threshold);
  return r;
}

std::vector<size_t> same_key_targets(const NGram& template_source, std::span<const NGram> targets) {
  std::vector<size_t> out;
  const auto key = estimate_key(template_source);
  if (!key) return out;
  for (size_t i = 0; i < targets.size(); ++i) {
    const auto k = estimate_key(targets[i]);
    if (k && *k == *key) out.push_back(i);
  }
  return out;
}

std::string render_generated(const Vector& probs, const std::optional<KeyId>& key) {
  std::vector<double> p(probs.data(), probs.data() + probs.size());
  if (key) return render_pgm(p, scale::pitch_class_mask(key->tonic));
  return render_pgm(p);
}

}  // namespace musgae
