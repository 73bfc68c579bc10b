#include "musgae/synth.h"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "musgae/errors.h"
#include "musgae/rng.h"
#include "musgae/scale.h"

namespace musgae {
namespace {

size_t draw(const std::vector<double>& weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

constexpr int kDurations[] = {1, 2, 3, 4, 6, 8};
// Scale steps of a third, a fifth and an octave.
constexpr int kDoublingSteps[] = {2, 4, 7};

}  // namespace

void SynthConfig::validate() const {
  if (n_pieces < 0) throw UsageError("synthetic corpus: n_pieces must be >= 0");
  if (length < kNgramCols) throw UsageError("synthetic corpus: length must be >= 8");
  if (min_voices < 1 || max_voices < min_voices) throw UsageError("synthetic corpus: need 1 <= min_voices <= max_voices");
  if (tonic < -1 || tonic > 11) throw UsageError("synthetic corpus: tonic must be -1 or a pitch class");
  if (step_weights.size() != 7) throw UsageError("synthetic corpus: step_weights needs 7 entries (-3..+3)");
  if (duration_weights.size() != std::size(kDurations)) {
    throw UsageError("synthetic corpus: duration_weights needs 6 entries (1,2,3,4,6,8)");
  }
  auto bad = [](const std::vector<double>& w) {
    return std::any_of(w.begin(), w.end(), [](double v) { return v < 0; }) ||
           std::accumulate(w.begin(), w.end(), 0.0) <= 0;
  };
  if (bad(step_weights) || bad(duration_weights)) throw UsageError("synthetic corpus: weights must be non-negative with positive sum");
  if (!(rest_prob >= 0 && rest_prob < 1)) throw UsageError("synthetic corpus: rest_prob must lie in [0, 1)");
  if (!(doubling_prob >= 0 && doubling_prob <= 1)) throw UsageError("synthetic corpus: doubling_prob must lie in [0, 1]");
  if (doubling_weights.size() != std::size(kDoublingSteps) || bad(doubling_weights)) {
    throw UsageError("synthetic corpus: doubling_weights needs 3 non-negative entries (third, fifth, octave)");
  }
}

SynthCorpus gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const Rng base(cfg.seed);
  SynthCorpus out;
  for (int p = 0; p < cfg.n_pieces; ++p) {
    Rng rng = base.split(static_cast<uint64_t>(p));
    const int tonic = cfg.tonic >= 0 ? cfg.tonic : static_cast<int>(rng.uniform_int(0, 11));
    const int voices = static_cast<int>(rng.uniform_int(cfg.min_voices, cfg.max_voices));
    std::vector<NoteEvent> notes;
    for (int v = 0; v < voices; ++v) {
      // Voice registers spread from bass (~45) to treble (~81).
      const int center = voices == 1 ? 64 : 45 + (36 * v) / (voices - 1);
      const int lo = std::max(kMinPitch, center - 9);
      const int hi = std::min(kMaxPitch, center + 9);
      // Scale degrees inside [lo, hi].
      std::vector<int> degrees;
      const int first = 7 * scale::floor_div(lo - tonic, 12);
      for (int d = first; scale::pitch_of_degree(d, tonic) <= hi; ++d) {
        if (scale::pitch_of_degree(d, tonic) >= lo) degrees.push_back(d);
      }
      int idx = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(degrees.size()) - 1));
      int64_t t = 0;
      while (t < cfg.length) {
        const int64_t dur = kDurations[draw(cfg.duration_weights, rng)];
        const bool rest = rng.bernoulli(cfg.rest_prob);
        if (!rest) {
          const int64_t len = std::min(dur, cfg.length - t);
          const int degree = degrees[static_cast<size_t>(idx)];
          notes.push_back({scale::pitch_of_degree(degree, tonic), t, len});
          if (rng.bernoulli(cfg.doubling_prob)) {
            const int steps = kDoublingSteps[draw(cfg.doubling_weights, rng)];
            const int dir = rng.bernoulli(0.5) ? 1 : -1;
            int pitch = scale::pitch_of_degree(degree + dir * steps, tonic);
            if (pitch < kMinPitch || pitch > kMaxPitch) pitch = scale::pitch_of_degree(degree - dir * steps, tonic);
            if (pitch >= kMinPitch && pitch <= kMaxPitch) notes.push_back({pitch, t, len});
          }
        }
        t += dur;
        int step = static_cast<int>(draw(cfg.step_weights, rng)) - 3;
        int next = idx + step;
        // Reflect at the register bounds.
        const int last = static_cast<int>(degrees.size()) - 1;
        if (next < 0) next = -next;
        if (next > last) next = 2 * last - next;
        idx = std::clamp(next, 0, last);
      }
    }
    std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
      return std::tie(a.onset, a.pitch, a.duration) < std::tie(b.onset, b.pitch, b.duration);
    });
    out.pieces.push_back(std::move(notes));
    out.tonics.push_back(tonic);
  }
  return out;
}

}  // namespace musgae
