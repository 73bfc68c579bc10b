// Run configuration and the pipeline stages shared by the command-line tool
// and the acceptance suite: corpus -> pairs -> unsupervised model -> codes ->
// probe -> report.
//
// Config files are flat JSON objects ("gae.lr": 3e-5, ...); see
// run_config_keys() for the full list. Every stage's seed is derived from
// the single top-level "seed" via stage_seed(seed, "<stage>").

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "musgae/classifier.h"
#include "musgae/eval.h"
#include "musgae/gae.h"
#include "musgae/rbm.h"
#include "musgae/synth.h"
#include "musgae/transforms.h"

namespace musgae {

struct RunConfig {
  // Corpus: synthetic unless exactly one of the paths is set.
  std::string corpus_jsonl;
  std::string corpus_midi_dir;
  SynthConfig synth;
  int stride = 1;

  TransformType transform = TransformType::TransC;
  std::string model = "gae";  // "gae" or "rbm"
  int size1 = 128;  // GAE factors / RBM first hidden layer
  int size2 = 64;   // GAE mapping units / RBM second hidden layer

  size_t n_train = 20000;
  size_t n_val = 1000;
  size_t n_test = 4000;

  GaeConfig gae;
  RbmConfig rbm;
  ClfConfig clf;

  double threshold = 0.5;  // analogy binarization
  int analogy_targets = 200;

  uint64_t seed = 1;
  std::string out_dir = "out";

  // Throws UsageError on an invalid combination.
  void validate() const;
  size_t total_pairs() const { return n_train + n_val + n_test; }
};

// Desk-scale defaults (the values above, with module epochs, rates and
// batch sizes chosen for a single CPU core).
RunConfig desk_profile();

std::vector<std::string> run_config_keys();
nlohmann::json to_json(const RunConfig& cfg);
// Unknown keys and ill-typed values throw UsageError.
void apply_json(RunConfig& cfg, const nlohmann::json& flat);
// "key=value" with the value parsed as JSON, falling back to a string.
void apply_override(RunConfig& cfg, std::string_view assignment);
RunConfig load_run_config(const std::filesystem::path& path);

// Named sizes "128/64", "256/128", "512/256" or any "a/b".
void set_size(RunConfig& cfg, std::string_view size);
std::string size_name(const RunConfig& cfg);

uint64_t stage_seed(uint64_t seed, std::string_view stage);

// Pieces of the configured corpus source. Synthetic corpora are seeded
// with stage_seed(seed, "corpus").
std::vector<std::vector<NoteEvent>> load_corpus(const RunConfig& cfg);
std::vector<NGram> corpus_ngrams(std::span<const std::vector<NoteEvent>> pieces, int stride);

// total_pairs() labeled pairs from the corpus (stage "pairs").
PairDataset generate_pairs(const RunConfig& cfg);
// Sidecar: counts, class histogram (by class name) and rejection counters.
nlohmann::json pairs_sidecar(const PairDataset& ds);

// Contiguous train / validation / test views; DataError if the dataset is
// smaller than the configured split sizes.
struct Splits {
  std::span<const PairSample> train;
  std::span<const PairSample> val;
  std::span<const PairSample> test;
};
Splits split_dataset(const PairDataset& ds, const RunConfig& cfg);

std::vector<int> labels_of(std::span<const PairSample> samples);
// [x | y] rows, n x 1040.
Matrix concat_rows(std::span<const PairSample> samples);

// Module configs with the stage seeds filled in.
GaeConfig gae_config(const RunConfig& cfg);
RbmConfig rbm_config(const RunConfig& cfg);
ClfConfig clf_config(const RunConfig& cfg);

// Either kind of unsupervised model, as stored in a checkpoint.
struct Representation {
  std::optional<GaeModel> gae;
  std::optional<StackedRbm> rbm;

  std::string kind() const { return gae ? "GAE" : "RBM"; }
  std::string size() const;
  // Mapping codes (GAE) or top-layer codes (RBM).
  Matrix encode(std::span<const PairSample> samples) const;
  // Per-unit reconstruction cross-entropy (both directions for the GAE,
  // the full stack for the RBM).
  double reconstruction_ce(std::span<const PairSample> samples) const;
};
Representation load_representation(const std::filesystem::path& checkpoint);

struct ProbeOutcome {
  FfnnModel model;
  std::vector<ClfEpoch> history;
  std::vector<int> predictions;  // on the test codes
  double error = 0;              // percent
  ConfusionMatrix confusion;
};

ProbeOutcome run_probe(const Matrix& train_codes, std::span<const int> train_labels, const Matrix& test_codes,
                       std::span<const int> test_labels, TransformType type, const ClfConfig& cfg,
                       const ClfEpochCallback& on_epoch = {});

// Analogy targets drawn from a held-out corpus: a synthetic corpus seeded
// with stage_seed(seed, "analogy-corpus") (never used for training) unless
// `pool` is given. N-grams are visited in a seeded random order; the truth
// is apply_label(target, type, label), and targets without a computable
// truth are skipped except for Tempo "double", which is not derivable from
// the source alone. For TransD only targets in the template source's key
// are kept.
struct AnalogyTarget {
  NGram source;
  std::optional<NGram> truth;
};
std::vector<AnalogyTarget> held_out_targets(const RunConfig& cfg, const NGram& template_source, int label,
                                            size_t count, const std::vector<NGram>* pool = nullptr);

// Labels permuted uniformly (null-signal control).
std::vector<int> shuffled_labels(std::span<const int> labels, uint64_t seed);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace musgae
