#include "musgae/pipeline.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "musgae/checkpoint.h"
#include "musgae/errors.h"
#include "musgae/midi.h"

namespace musgae {

void RunConfig::validate() const {
  if (!corpus_jsonl.empty() && !corpus_midi_dir.empty()) {
    throw UsageError("config: set at most one of corpus.jsonl and corpus.midi_dir");
  }
  if (stride < 1) throw UsageError("config: corpus.stride must be >= 1");
  if (model != "gae" && model != "rbm") throw UsageError("config: model must be \"gae\" or \"rbm\"");
  if (size1 < 1 || size2 < 1) throw UsageError("config: model sizes must be >= 1");
  if (n_train < 2 || n_test < 1) throw UsageError("config: need n_train >= 2 and n_test >= 1");
  if (!(threshold > 0 && threshold < 1)) throw UsageError("config: analogy.threshold must lie in (0, 1)");
  if (analogy_targets < 0) throw UsageError("config: analogy.targets must be >= 0");
  synth.validate();
  gae.validate();
  rbm.validate();
  clf.validate();
}

RunConfig desk_profile() {
  RunConfig c;
  c.gae.epochs = 200;
  c.gae.batch = 100;
  c.gae.rescale_epochs = 20;
  c.rbm.epochs = 100;
  c.rbm.lr = 0.2;
  c.clf.epochs = 60;
  return c;
}

namespace {

struct KeyDef {
  std::string name;
  std::function<nlohmann::json(const RunConfig&)> get;
  std::function<void(RunConfig&, const nlohmann::json&)> set;
};

template <typename T, typename Proj>
KeyDef field(std::string name, Proj proj) {
  return {std::move(name),
          [proj](const RunConfig& c) {
            RunConfig copy = c;
            return nlohmann::json(proj(copy));
          },
          [proj](RunConfig& c, const nlohmann::json& v) { proj(c) = v.get<T>(); }};
}

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = [] {
    std::vector<KeyDef> d;
    d.push_back(field<std::string>("corpus.jsonl", [](RunConfig& c) -> auto& { return c.corpus_jsonl; }));
    d.push_back(field<std::string>("corpus.midi_dir", [](RunConfig& c) -> auto& { return c.corpus_midi_dir; }));
    d.push_back(field<int>("corpus.stride", [](RunConfig& c) -> auto& { return c.stride; }));
    d.push_back(field<int>("synth.n_pieces", [](RunConfig& c) -> auto& { return c.synth.n_pieces; }));
    d.push_back(field<int64_t>("synth.length", [](RunConfig& c) -> auto& { return c.synth.length; }));
    d.push_back(field<int>("synth.min_voices", [](RunConfig& c) -> auto& { return c.synth.min_voices; }));
    d.push_back(field<int>("synth.max_voices", [](RunConfig& c) -> auto& { return c.synth.max_voices; }));
    d.push_back(field<int>("synth.tonic", [](RunConfig& c) -> auto& { return c.synth.tonic; }));
    d.push_back(field<std::vector<double>>("synth.step_weights", [](RunConfig& c) -> auto& { return c.synth.step_weights; }));
    d.push_back(field<std::vector<double>>("synth.duration_weights",
                                           [](RunConfig& c) -> auto& { return c.synth.duration_weights; }));
    d.push_back(field<double>("synth.rest_prob", [](RunConfig& c) -> auto& { return c.synth.rest_prob; }));
    d.push_back(field<double>("synth.doubling_prob", [](RunConfig& c) -> auto& { return c.synth.doubling_prob; }));
    d.push_back(field<std::vector<double>>("synth.doubling_weights", [](RunConfig& c) -> auto& { return c.synth.doubling_weights; }));
    d.push_back({"transform", [](const RunConfig& c) { return nlohmann::json(std::string(transform_name(c.transform))); },
                 [](RunConfig& c, const nlohmann::json& v) { c.transform = parse_transform(v.get<std::string>()); }});
    d.push_back(field<std::string>("model", [](RunConfig& c) -> auto& { return c.model; }));
    d.push_back({"size", [](const RunConfig& c) { return nlohmann::json(size_name(c)); },
                 [](RunConfig& c, const nlohmann::json& v) { set_size(c, v.get<std::string>()); }});
    d.push_back(field<size_t>("split.train", [](RunConfig& c) -> auto& { return c.n_train; }));
    d.push_back(field<size_t>("split.val", [](RunConfig& c) -> auto& { return c.n_val; }));
    d.push_back(field<size_t>("split.test", [](RunConfig& c) -> auto& { return c.n_test; }));
    d.push_back(field<double>("gae.lr", [](RunConfig& c) -> auto& { return c.gae.lr; }));
    d.push_back(field<double>("gae.momentum", [](RunConfig& c) -> auto& { return c.gae.momentum; }));
    d.push_back(field<int>("gae.epochs", [](RunConfig& c) -> auto& { return c.gae.epochs; }));
    d.push_back(field<int>("gae.batch", [](RunConfig& c) -> auto& { return c.gae.batch; }));
    d.push_back(field<double>("gae.corruption", [](RunConfig& c) -> auto& { return c.gae.corruption; }));
    d.push_back(field<int>("gae.rescale_epochs", [](RunConfig& c) -> auto& { return c.gae.rescale_epochs; }));
    d.push_back(field<double>("gae.l1", [](RunConfig& c) -> auto& { return c.gae.reg.l1_coeff; }));
    d.push_back(field<double>("gae.l2", [](RunConfig& c) -> auto& { return c.gae.reg.l2_coeff; }));
    d.push_back(field<double>("gae.lee_target", [](RunConfig& c) -> auto& { return c.gae.reg.lee_target; }));
    d.push_back(field<double>("gae.lee_coeff", [](RunConfig& c) -> auto& { return c.gae.reg.lee_coeff; }));
    d.push_back(field<bool>("gae.lee_on_mappings", [](RunConfig& c) -> auto& { return c.gae.lee_on_mappings; }));
    d.push_back(field<bool>("gae.lee_on_factors", [](RunConfig& c) -> auto& { return c.gae.lee_on_factors; }));
    d.push_back(field<bool>("gae.corrupt_mapping_inputs",
                            [](RunConfig& c) -> auto& { return c.gae.corrupt_mapping_inputs; }));
    d.push_back(field<double>("rbm.lr", [](RunConfig& c) -> auto& { return c.rbm.lr; }));
    d.push_back(field<int>("rbm.epochs", [](RunConfig& c) -> auto& { return c.rbm.epochs; }));
    d.push_back(field<int>("rbm.batch", [](RunConfig& c) -> auto& { return c.rbm.batch; }));
    d.push_back(field<double>("rbm.reset_threshold", [](RunConfig& c) -> auto& { return c.rbm.reset_threshold; }));
    d.push_back(field<bool>("rbm.goh_sparsity", [](RunConfig& c) -> auto& { return c.rbm.goh_sparsity; }));
    d.push_back(field<double>("rbm.goh_mu", [](RunConfig& c) -> auto& { return c.rbm.goh_mu; }));
    d.push_back(field<double>("rbm.goh_phi", [](RunConfig& c) -> auto& { return c.rbm.goh_phi; }));
    d.push_back(field<double>("rbm.l1", [](RunConfig& c) -> auto& { return c.rbm.l1_coeff; }));
    d.push_back(field<double>("rbm.l2", [](RunConfig& c) -> auto& { return c.rbm.l2_coeff; }));
    d.push_back(field<double>("clf.lr", [](RunConfig& c) -> auto& { return c.clf.lr; }));
    d.push_back(field<double>("clf.momentum", [](RunConfig& c) -> auto& { return c.clf.momentum; }));
    d.push_back(field<int>("clf.epochs", [](RunConfig& c) -> auto& { return c.clf.epochs; }));
    d.push_back(field<int>("clf.batch", [](RunConfig& c) -> auto& { return c.clf.batch; }));
    d.push_back(field<double>("clf.dropout", [](RunConfig& c) -> auto& { return c.clf.dropout; }));
    d.push_back(field<double>("clf.l2", [](RunConfig& c) -> auto& { return c.clf.l2_coeff; }));
    d.push_back(field<double>("clf.lee_target", [](RunConfig& c) -> auto& { return c.clf.lee_target; }));
    d.push_back(field<double>("clf.lee_coeff", [](RunConfig& c) -> auto& { return c.clf.lee_coeff; }));
    d.push_back(field<bool>("clf.lee_hidden1", [](RunConfig& c) -> auto& { return c.clf.lee_hidden1; }));
    d.push_back(field<bool>("clf.lee_hidden2", [](RunConfig& c) -> auto& { return c.clf.lee_hidden2; }));
    d.push_back(field<int>("clf.hidden1", [](RunConfig& c) -> auto& { return c.clf.hidden1; }));
    d.push_back(field<int>("clf.hidden2", [](RunConfig& c) -> auto& { return c.clf.hidden2; }));
    d.push_back(field<double>("analogy.threshold", [](RunConfig& c) -> auto& { return c.threshold; }));
    d.push_back(field<int>("analogy.targets", [](RunConfig& c) -> auto& { return c.analogy_targets; }));
    d.push_back(field<uint64_t>("seed", [](RunConfig& c) -> auto& { return c.seed; }));
    d.push_back(field<std::string>("out_dir", [](RunConfig& c) -> auto& { return c.out_dir; }));
    return d;
  }();
  return defs;
}

}  // namespace

std::vector<std::string> run_config_keys() {
  std::vector<std::string> out;
  for (const auto& d : key_defs()) out.push_back(d.name);
  return out;
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& d : key_defs()) j[d.name] = d.get(cfg);
  return j;
}

void apply_json(RunConfig& cfg, const nlohmann::json& flat) {
  if (!flat.is_object()) throw UsageError("config: expected a flat JSON object");
  for (const auto& [key, value] : flat.items()) {
    const auto& defs = key_defs();
    auto it = std::find_if(defs.begin(), defs.end(), [&](const KeyDef& d) { return d.name == key; });
    if (it == defs.end()) throw UsageError("config: unknown key '" + key + "'");
    try {
      it->set(cfg, value);
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config: bad value for '" + key + "': " + value.dump());
    }
  }
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw UsageError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  apply_json(cfg, nlohmann::json{{key, value}});
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError("config " + path.string() + " is not valid JSON");
  RunConfig cfg = desk_profile();
  apply_json(cfg, j);
  return cfg;
}

void set_size(RunConfig& cfg, std::string_view size) {
  const auto slash = size.find('/');
  int a = 0, b = 0;
  bool ok = slash != std::string_view::npos;
  if (ok) {
    const auto r1 = std::from_chars(size.data(), size.data() + slash, a);
    const auto r2 = std::from_chars(size.data() + slash + 1, size.data() + size.size(), b);
    ok = r1.ec == std::errc() && r1.ptr == size.data() + slash && r2.ec == std::errc() &&
         r2.ptr == size.data() + size.size() && a > 0 && b > 0;
  }
  if (!ok) throw UsageError("size must look like 128/64, got '" + std::string(size) + "'");
  cfg.size1 = a;
  cfg.size2 = b;
}

std::string size_name(const RunConfig& cfg) { return std::to_string(cfg.size1) + "/" + std::to_string(cfg.size2); }

uint64_t stage_seed(uint64_t seed, std::string_view stage) { return Rng(seed).split(stage).next_u64(); }

std::vector<std::vector<NoteEvent>> load_corpus(const RunConfig& cfg) {
  if (!cfg.corpus_jsonl.empty()) {
    std::ifstream in(cfg.corpus_jsonl);
    if (!in) throw DataError("cannot open corpus " + cfg.corpus_jsonl);
    return read_note_jsonl(in);
  }
  if (!cfg.corpus_midi_dir.empty()) return load_midi_dir(cfg.corpus_midi_dir);
  SynthConfig s = cfg.synth;
  s.seed = stage_seed(cfg.seed, "corpus");
  return gen_synthetic(s).pieces;
}

std::vector<NGram> corpus_ngrams(std::span<const std::vector<NoteEvent>> pieces, int stride) {
  std::vector<NGram> out;
  for (const auto& notes : pieces) {
    const auto roll = roll_from_notes(notes);
    auto grams = extract_ngrams(roll.roll, stride);
    out.insert(out.end(), grams.begin(), grams.end());
  }
  return out;
}

PairDataset generate_pairs(const RunConfig& cfg) {
  const auto pieces = load_corpus(cfg);
  const auto grams = corpus_ngrams(pieces, cfg.stride);
  if (grams.empty()) throw DataError("corpus yields no non-empty n-grams");
  Rng rng = Rng(cfg.seed).split("pairs");
  return make_pairs(grams, cfg.transform, cfg.total_pairs(), rng, true);
}

nlohmann::json pairs_sidecar(const PairDataset& ds) {
  nlohmann::json hist = nlohmann::json::object();
  const auto counts = ds.class_counts();
  for (size_t c = 0; c < counts.size(); ++c) hist[class_name(ds.type, static_cast<int>(c))] = counts[c];
  const auto& s = ds.stats;
  return {{"transform", std::string(transform_name(ds.type))},
          {"count", ds.samples.size()},
          {"classes", class_count(ds.type)},
          {"histogram", hist},
          {"rejections",
           {{"ngrams_used", s.ngrams_used},
            {"preshift_failures", s.preshift_failures},
            {"range", s.range_rejections},
            {"key_fit", s.key_fit_rejections},
            {"key_tie", s.key_tie_rejections},
            {"empty", s.empty_rejections}}}};
}

Splits split_dataset(const PairDataset& ds, const RunConfig& cfg) {
  const size_t need = cfg.total_pairs();
  if (ds.samples.size() < need) {
    throw DataError("dataset has " + std::to_string(ds.samples.size()) + " samples but the splits need " +
                    std::to_string(need) + " (train " + std::to_string(cfg.n_train) + ", val " +
                    std::to_string(cfg.n_val) + ", test " + std::to_string(cfg.n_test) + ")");
  }
  const std::span<const PairSample> all(ds.samples);
  return {all.subspan(0, cfg.n_train), all.subspan(cfg.n_train, cfg.n_val),
          all.subspan(cfg.n_train + cfg.n_val, cfg.n_test)};
}

std::vector<int> labels_of(std::span<const PairSample> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

Matrix concat_rows(std::span<const PairSample> samples) {
  const auto mats = to_matrices(samples);
  Matrix out(mats.x.rows(), mats.x.cols() + mats.y.cols());
  out << mats.x, mats.y;
  return out;
}

GaeConfig gae_config(const RunConfig& cfg) {
  GaeConfig g = cfg.gae;
  g.seed = stage_seed(cfg.seed, "gae");
  return g;
}

RbmConfig rbm_config(const RunConfig& cfg) {
  RbmConfig r = cfg.rbm;
  r.seed = stage_seed(cfg.seed, "rbm");
  return r;
}

ClfConfig clf_config(const RunConfig& cfg) {
  ClfConfig c = cfg.clf;
  c.seed = stage_seed(cfg.seed, "probe");
  return c;
}

std::string Representation::size() const {
  if (gae) return std::to_string(gae->params.factors()) + "/" + std::to_string(gae->params.mappings());
  return std::to_string(rbm->layer1.hidden()) + "/" + std::to_string(rbm->layer2.hidden());
}

Matrix Representation::encode(std::span<const PairSample> samples) const {
  if (gae) return encode_dataset(*gae, samples);
  return musgae::encode(*rbm, concat_rows(samples));
}

double Representation::reconstruction_ce(std::span<const PairSample> samples) const {
  if (gae) {
    const auto mats = to_matrices(samples);
    return gae_reconstruction_ce(*gae, mats.x, mats.y);
  }
  return reconstruct_ce(*rbm, concat_rows(samples));
}

Representation load_representation(const std::filesystem::path& checkpoint) {
  const std::string format = peek_checkpoint_format(checkpoint);
  Representation r;
  if (format == "GAE1") {
    r.gae = load_gae(checkpoint);
  } else if (format == "RBM1") {
    r.rbm = load_rbm(checkpoint);
  } else {
    throw DataError(checkpoint.string() + ": expected a GAE1 or RBM1 checkpoint, found " + format);
  }
  return r;
}

ProbeOutcome run_probe(const Matrix& train_codes, std::span<const int> train_labels, const Matrix& test_codes,
                       std::span<const int> test_labels, TransformType type, const ClfConfig& cfg,
                       const ClfEpochCallback& on_epoch) {
  if (train_codes.cols() != test_codes.cols()) throw std::invalid_argument("run_probe: code width mismatch");
  auto trained = train_classifier(train_codes, train_labels, class_count(type), cfg, on_epoch);
  ProbeOutcome out;
  out.model = std::move(trained.model);
  out.history = std::move(trained.history);
  out.predictions = predict(out.model, test_codes);
  out.error = misclassification_rate(out.predictions, test_labels);
  out.confusion = confusion(out.predictions, test_labels, type);
  return out;
}

std::vector<AnalogyTarget> held_out_targets(const RunConfig& cfg, const NGram& template_source, int label,
                                            size_t count, const std::vector<NGram>* pool) {
  std::vector<NGram> own;
  if (!pool) {
    SynthConfig s = cfg.synth;
    s.seed = stage_seed(cfg.seed, "analogy-corpus");
    own = corpus_ngrams(gen_synthetic(s).pieces, cfg.stride);
    pool = &own;
  }
  std::optional<KeyId> key;
  if (cfg.transform == TransformType::TransD) {
    key = estimate_key(template_source);
    if (!key) throw DataError("TransD analogy template has no unique key");
  }
  const bool truthless = cfg.transform == TransformType::Tempo && label == kTempoDouble;
  Rng rng = Rng(cfg.seed).split("analogy-targets");
  const auto order = rng.permutation(pool->size());
  std::vector<AnalogyTarget> out;
  for (size_t i = 0; i < order.size() && out.size() < count; ++i) {
    const NGram& g = (*pool)[order[i]];
    if (key) {
      const auto k = estimate_key(g);
      if (!k || !(*k == *key)) continue;
    }
    auto truth = apply_label(g, cfg.transform, label);
    if (!truth && !truthless) continue;
    out.push_back({g, truth});
  }
  return out;
}

std::vector<int> shuffled_labels(std::span<const int> labels, uint64_t seed) {
  Rng rng = Rng(seed).split("shuffle-labels");
  const auto perm = rng.permutation(labels.size());
  std::vector<int> out(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) out[i] = labels[perm[i]];
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace musgae
