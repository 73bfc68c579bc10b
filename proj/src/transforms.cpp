#include "musgae/transforms.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "musgae/errors.h"
#include "musgae/scale.h"

namespace musgae {

int class_count(TransformType t) {
  switch (t) {
    case TransformType::TransC: return 24;
    case TransformType::TransD: return 14;
    case TransformType::Tempo: return 3;
    case TransformType::Retro: return 2;
  }
  throw std::invalid_argument("unknown transform type");
}

std::string_view transform_name(TransformType t) {
  switch (t) {
    case TransformType::TransC: return "TransC";
    case TransformType::TransD: return "TransD";
    case TransformType::Tempo: return "Tempo";
    case TransformType::Retro: return "Retro";
  }
  throw std::invalid_argument("unknown transform type");
}

TransformType parse_transform(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto t : kAllTransforms) {
    std::string n(transform_name(t));
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
    if (n == lower) return t;
  }
  throw UsageError("unknown transformation type '" + std::string(name) + "' (expected TransC, TransD, Tempo or Retro)");
}

std::string class_name(TransformType t, int label) {
  switch (t) {
    case TransformType::TransC: return std::to_string(label - 12);
    case TransformType::TransD: return std::to_string(label - 7);
    case TransformType::Tempo: return label == kTempoDouble ? "double" : label == kTempoHalf ? "half" : "identity";
    case TransformType::Retro: return label == kRetroRetrograde ? "retrograde" : "identity";
  }
  return std::to_string(label);
}

std::optional<NGram> shift_pitch(const NGram& g, int k) {
  NGram out;
  for (int r = 0; r < kPitchRows; ++r) {
    for (int c = 0; c < kNgramCols; ++c) {
      if (!g.at(r, c)) continue;
      const int nr = r + k;
      if (nr < 0 || nr >= kPitchRows) return std::nullopt;
      out.set(nr, c);
    }
  }
  return out;
}

std::optional<NGram> preshift(const NGram& g, Rng& rng) {
  for (int attempt = 0; attempt < 24; ++attempt) {
    const int k = static_cast<int>(rng.uniform_int(-12, 11));
    if (auto s = shift_pitch(g, k)) return s;
  }
  return std::nullopt;
}

std::optional<NGram> transpose_chromatic(const NGram& g, int k) {
  if (k < -12 || k > 11) throw std::invalid_argument("chromatic shift must lie in [-12, 11]");
  return shift_pitch(g, k);
}

std::optional<KeyId> estimate_key(const NGram& g) {
  std::array<bool, 12> pcs{};
  for (int p : g.pitches()) pcs[static_cast<size_t>(p % 12)] = true;
  int best = 99;
  int best_tonic = -1;
  int ties = 0;
  for (int tonic = 0; tonic < 12; ++tonic) {
    bool fits = true;
    for (int pc = 0; pc < 12 && fits; ++pc) {
      if (pcs[static_cast<size_t>(pc)] && !scale::in_scale(pc, tonic)) fits = false;
    }
    if (!fits) continue;
    const int acc = scale::accidentals(tonic);
    if (acc < best) {
      best = acc;
      best_tonic = tonic;
      ties = 0;
    } else if (acc == best) {
      ++ties;
    }
  }
  if (best_tonic < 0 || ties > 0) return std::nullopt;
  return KeyId{best_tonic, best};
}

std::optional<NGram> shift_scale_steps(const NGram& g, const KeyId& key, int steps) {
  NGram out;
  for (int r = 0; r < kPitchRows; ++r) {
    const int pitch = r + kMinPitch;
    bool sounding = false;
    for (int c = 0; c < kNgramCols; ++c) sounding |= g.at(r, c) != 0;
    if (!sounding) continue;
    const auto deg = scale::degree_of(pitch, key.tonic);
    if (!deg) {
      throw std::invalid_argument("pitch " + std::to_string(pitch) + " is not in the scale of the key");
    }
    const int target = scale::pitch_of_degree(*deg + steps, key.tonic);
    if (target < kMinPitch || target > kMaxPitch) return std::nullopt;
    for (int c = 0; c < kNgramCols; ++c) {
      if (g.at(r, c)) out.set(target - kMinPitch, c);
    }
  }
  return out;
}

std::optional<NGram> transpose_diatonic(const NGram& g, const KeyId& key, int k) {
  if (k < -7 || k > 6) throw std::invalid_argument("diatonic shift must lie in [-7, 6]");
  return shift_scale_steps(g, key, k);
}

NGram halftime(const NGram& g) {
  NGram out;
  for (int r = 0; r < kPitchRows; ++r) {
    for (int c = 0; c < kNgramCols; ++c) {
      if (g.at(r, c / 2)) out.set(r, c);
    }
  }
  return out;
}

NGram retrograde(const NGram& g) {
  NGram out;
  for (int r = 0; r < kPitchRows; ++r) {
    for (int c = 0; c < kNgramCols; ++c) {
      if (g.at(r, kNgramCols - 1 - c)) out.set(r, c);
    }
  }
  return out;
}

std::vector<size_t> PairDataset::class_counts() const {
  std::vector<size_t> counts(static_cast<size_t>(class_count(type)), 0);
  for (const auto& s : samples) ++counts[s.label];
  return counts;
}

std::optional<NGram> apply_label(const NGram& x, TransformType type, int label) {
  switch (type) {
    case TransformType::TransC: return transpose_chromatic(x, label - 12);
    case TransformType::TransD: {
      const auto key = estimate_key(x);
      if (!key) return std::nullopt;
      return transpose_diatonic(x, *key, label - 7);
    }
    case TransformType::Tempo:
      if (label == kTempoHalf) return halftime(x);
      if (label == kTempoIdentity) return x;
      return std::nullopt;
    case TransformType::Retro: return label == kRetroRetrograde ? retrograde(x) : x;
  }
  return std::nullopt;
}

namespace {

// Builds (x, y) for `label` from an already pre-shifted n-gram, or records
// why it cannot.
std::optional<std::pair<NGram, NGram>> build_pair(const NGram& g, TransformType type, int label,
                                                  PairStats& stats) {
  switch (type) {
    case TransformType::TransC: {
      auto y = transpose_chromatic(g, label - 12);
      if (!y) {
        ++stats.range_rejections;
        return std::nullopt;
      }
      return std::pair{g, *y};
    }
    case TransformType::TransD: {
      const auto key = estimate_key(g);
      if (!key) {
        // Tell a tie apart from a misfit by retrying with no tie rule.
        bool any_fit = false;
        const auto pcs = g.pitches();
        for (int tonic = 0; tonic < 12 && !any_fit; ++tonic) {
          any_fit = std::all_of(pcs.begin(), pcs.end(), [&](int p) { return scale::in_scale(p, tonic); });
        }
        ++(any_fit ? stats.key_tie_rejections : stats.key_fit_rejections);
        return std::nullopt;
      }
      auto y = transpose_diatonic(g, *key, label - 7);
      if (!y) {
        ++stats.range_rejections;
        return std::nullopt;
      }
      return std::pair{g, *y};
    }
    case TransformType::Tempo: {
      if (label == kTempoIdentity) return std::pair{g, g};
      const NGram h = halftime(g);
      if (h.empty()) {
        ++stats.empty_rejections;
        return std::nullopt;
      }
      return label == kTempoHalf ? std::pair{g, h} : std::pair{h, g};
    }
    case TransformType::Retro:
      return label == kRetroRetrograde ? std::pair{g, retrograde(g)} : std::pair{g, g};
  }
  return std::nullopt;
}

std::string bottleneck(const PairStats& s, TransformType type) {
  std::vector<std::pair<uint64_t, std::string>> reasons = {
      {s.preshift_failures, "pre-shift range failures"},
      {s.range_rejections, "counterpart out of pitch range"},
      {s.key_fit_rejections, "n-grams fitting no major key (TransD key-fit rate)"},
      {s.key_tie_rejections, "ambiguous key estimates"},
      {s.empty_rejections, "empty half-time counterparts"},
  };
  const auto worst = std::max_element(reasons.begin(), reasons.end());
  std::string msg = "bottleneck: ";
  if (worst->first == 0) {
    msg += "corpus too small";
  } else {
    msg += worst->second + " (" + std::to_string(worst->first) + " of " + std::to_string(s.ngrams_used) +
           " n-grams rejected)";
  }
  if (type == TransformType::TransD && s.ngrams_used > 0) {
    const double fit = 1.0 - static_cast<double>(s.key_fit_rejections + s.key_tie_rejections) /
                                 static_cast<double>(s.ngrams_used);
    msg += "; key-fit rate " + std::to_string(fit);
  }
  return msg;
}

}  // namespace

PairDataset make_pairs(std::span<const NGram> ngrams, TransformType type, size_t n, Rng& rng, bool balance) {
  if (ngrams.empty()) throw DataError("make_pairs: no n-grams available");
  const int classes = class_count(type);
  Rng label_rng = rng.split("labels");
  Rng order_rng = rng.split("order");
  const Rng sample_base = rng.split("samples");

  std::vector<int> labels(n);
  if (balance) {
    for (size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<size_t>(classes));
    const auto perm = label_rng.permutation(n);
    std::vector<int> shuffled(n);
    for (size_t i = 0; i < n; ++i) shuffled[i] = labels[perm[i]];
    labels = std::move(shuffled);
  } else {
    for (auto& l : labels) l = static_cast<int>(label_rng.uniform_int(0, classes - 1));
  }

  const auto order = order_rng.permutation(ngrams.size());
  size_t cursor = 0;

  PairDataset ds;
  ds.type = type;
  ds.samples.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    Rng r = sample_base.split(static_cast<uint64_t>(i));
    for (;;) {
      if (cursor >= order.size()) {
        throw DataError("make_pairs: n-gram pool exhausted after " + std::to_string(i) + " of " +
                        std::to_string(n) + " " + std::string(transform_name(type)) + " pairs; " +
                        bottleneck(ds.stats, type));
      }
      const NGram& source = ngrams[order[cursor++]];
      ++ds.stats.ngrams_used;
      const auto shifted = preshift(source, r);
      if (!shifted) {
        ++ds.stats.preshift_failures;
        continue;
      }
      auto pair = build_pair(*shifted, type, labels[i], ds.stats);
      if (!pair) continue;
      ds.samples.push_back({encode(pair->first), encode(pair->second), static_cast<uint16_t>(labels[i]), type});
      break;
    }
  }
  return ds;
}

}  // namespace musgae
