// musgae command-line tool.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric abort.
// MUSGAE_THREADS sets the number of linear-algebra threads (default 1, which
// keeps floating-point reductions in a fixed order).

#include <Eigen/Core>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "musgae/analogy.h"
#include "musgae/checkpoint.h"
#include "musgae/dataset.h"
#include "musgae/errors.h"
#include "musgae/midi.h"
#include "musgae/pipeline.h"

namespace fs = std::filesystem;
using namespace musgae;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  bool quiet = false;

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? desk_profile() : load_run_config(config);
    for (const auto& o : overrides) apply_override(cfg, o);
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "Flat JSON run config (defaults: desk profile)");
  app->add_option("-s,--set", c.overrides, "Override a config key, e.g. --set gae.epochs=10");
  app->add_flag("-q,--quiet", c.quiet, "No progress output");
}

void log(const Common& c, const std::string& msg) {
  if (!c.quiet) std::cerr << msg << std::endl;
}

bool progress_epoch(int epoch, int total) { return epoch == 1 || epoch == total || epoch % 10 == 0; }

PairDataset load_pairs(const std::string& path, const RunConfig& cfg) {
  PairDataset ds = read_mtp1(fs::path(path));
  if (ds.type != cfg.transform) {
    throw UsageError("dataset " + path + " holds " + std::string(transform_name(ds.type)) +
                     " pairs but the config says " + std::string(transform_name(cfg.transform)));
  }
  return ds;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fmt(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// ---- gen-corpus

void cmd_gen_corpus(const Common& common, const std::string& out) {
  const RunConfig cfg = common.resolve();
  const auto pieces = load_corpus(cfg);
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + out);
  write_note_jsonl(f, pieces);
  size_t notes = 0;
  for (const auto& p : pieces) notes += p.size();
  log(common, "wrote " + std::to_string(pieces.size()) + " pieces, " + std::to_string(notes) + " notes to " + out);
}

// ---- gen-pairs

void cmd_gen_pairs(const Common& common, const std::string& out, std::optional<size_t> count) {
  RunConfig cfg = common.resolve();
  if (count) {
    cfg.n_train = *count;
    cfg.n_val = 0;
    cfg.n_test = 0;
  }
  const PairDataset ds = generate_pairs(cfg);
  write_mtp1(fs::path(out), ds);
  write_text_file(out + ".json", pairs_sidecar(ds).dump(2) + "\n");
  log(common, "wrote " + std::to_string(ds.samples.size()) + " " + std::string(transform_name(ds.type)) +
                  " pairs to " + out);
}

// ---- train

void cmd_train(const Common& common, std::string kind, const std::string& data, const std::string& out,
               const std::string& resume, std::string history) {
  const RunConfig cfg = common.resolve();
  if (kind.empty()) kind = cfg.model;
  if (kind != "gae" && kind != "rbm") throw UsageError("--kind must be gae or rbm");
  if (history.empty()) history = out + ".history.csv";
  const PairDataset ds = load_pairs(data, cfg);
  if (ds.samples.size() < cfg.n_train) {
    throw DataError("dataset has " + std::to_string(ds.samples.size()) + " samples, fewer than split.train = " +
                    std::to_string(cfg.n_train));
  }
  const std::span<const PairSample> train(ds.samples.data(), cfg.n_train);
  std::ostringstream csv;
  if (kind == "gae") {
    const GaeConfig gc = gae_config(cfg);
    GaeModel model = resume.empty() ? init_gae(kNgramBits, cfg.size1, cfg.size2, gc.seed) : load_gae(fs::path(resume));
    const auto mats = to_matrices(train);
    const auto hist = train_gae(model, mats.x, mats.y, gc, [&](int e, double loss) {
      if (progress_epoch(e, gc.epochs)) log(common, "gae epoch " + std::to_string(e) + " loss " + fmt(loss));
    });
    save_gae(fs::path(out), model);
    csv << "epoch,loss\n";
    for (size_t e = 0; e < hist.size(); ++e) csv << e + 1 << ',' << format_double(hist[e]) << '\n';
  } else {
    const RbmConfig rc = rbm_config(cfg);
    const Matrix x = concat_rows(train);
    auto cb = [&](int layer, int e, double ce) {
      if (progress_epoch(e, rc.epochs)) {
        log(common, "rbm layer " + std::to_string(layer) + " epoch " + std::to_string(e) + " ce " + fmt(ce));
      }
    };
    const RbmTrainResult res = resume.empty() ? train_stack(x, cfg.size1, cfg.size2, rc, cb)
                                              : continue_stack(load_rbm(fs::path(resume)), x, rc, false, cb);
    save_rbm(fs::path(out), res.stack);
    csv << "epoch,layer1_ce,layer2_ce\n";
    for (size_t e = 0; e < res.history.size(); ++e) {
      csv << e + 1 << ',' << format_double(res.history[e].layer1_ce) << ','
          << format_double(res.history[e].layer2_ce) << '\n';
    }
  }
  write_text_file(history, csv.str());
  log(common, "wrote " + out + " and " + history);
}

// ---- probe

void cmd_probe(const Common& common, const std::string& checkpoint, const std::string& data, const std::string& out_dir,
               bool shuffle) {
  const RunConfig cfg = common.resolve();
  const PairDataset ds = load_pairs(data, cfg);
  const Splits sp = split_dataset(ds, cfg);
  const Representation rep = load_representation(checkpoint);
  const ClfConfig cc = clf_config(cfg);
  const Matrix train_codes = rep.encode(sp.train);
  const Matrix test_codes = rep.encode(sp.test);
  std::vector<int> train_labels = labels_of(sp.train);
  const std::vector<int> test_labels = labels_of(sp.test);
  if (shuffle) train_labels = shuffled_labels(train_labels, stage_seed(cfg.seed, "shuffle-labels"));
  const ProbeOutcome res = run_probe(train_codes, train_labels, test_codes, test_labels, ds.type, cc,
                                     [&](int e, const ClfEpoch& ep) {
                                       if (progress_epoch(e, cc.epochs)) {
                                         log(common, "probe epoch " + std::to_string(e) + " loss " + fmt(ep.loss) +
                                                         " train error " + fmt(ep.train_error, 2) + "%");
                                       }
                                     });
  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  save_ffnn(dir / "probe.ffn1", res.model);
  EvalReport report;
  const std::string model_id = rep.kind() + (shuffle ? " (shuffled labels)" : "");
  report.set("misclassification", model_id, rep.size(), ds.type, res.error);
  report.add_random_baseline();
  report.confusions.emplace_back(ds.type, res.confusion);
  write_text_file(dir / "report.txt", emit_report(report, ReportFormat::Text));
  write_text_file(dir / "report.csv", emit_report(report, ReportFormat::Csv));
  write_text_file(dir / "confusion.csv", confusion_csv(res.confusion));
  std::ostringstream hist;
  hist << "epoch,loss,train_error\n";
  for (size_t e = 0; e < res.history.size(); ++e) {
    hist << e + 1 << ',' << format_double(res.history[e].loss) << ',' << format_double(res.history[e].train_error)
         << '\n';
  }
  write_text_file(dir / "probe_history.csv", hist.str());
  std::cout << emit_report(report, ReportFormat::Text);
}

// ---- eval

void cmd_eval(const Common& common, const std::vector<std::string>& checkpoints, const std::string& data,
              const std::string& probe, const std::string& format, const std::string& out) {
  const RunConfig cfg = common.resolve();
  const PairDataset ds = load_pairs(data, cfg);
  const Splits sp = split_dataset(ds, cfg);
  if (!probe.empty() && checkpoints.size() != 1) throw UsageError("--probe needs exactly one checkpoint");
  EvalReport report;
  for (const auto& ck : checkpoints) {
    const Representation rep = load_representation(ck);
    report.set("cross_entropy", rep.kind(), rep.size(), ds.type, rep.reconstruction_ce(sp.test));
    if (!probe.empty()) {
      const FfnnModel clf = load_ffnn(fs::path(probe));
      const Matrix codes = rep.encode(sp.test);
      if (codes.cols() != clf.params.inputs()) {
        throw DataError("probe expects " + std::to_string(clf.params.inputs()) + "-wide codes, checkpoint gives " +
                        std::to_string(codes.cols()));
      }
      const auto pred = predict(clf, codes);
      const auto cm = confusion(pred, labels_of(sp.test), ds.type);
      report.set("misclassification", rep.kind(), rep.size(), ds.type, misclassification(cm));
      report.confusions.emplace_back(ds.type, cm);
    }
  }
  if (!probe.empty()) report.add_random_baseline();
  const std::string text = emit_report(report, format == "csv" ? ReportFormat::Csv : ReportFormat::Text);
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
}

// ---- pca

void cmd_pca(const Common& common, const std::string& checkpoint, const std::string& data, int k,
             const std::string& out_dir) {
  const RunConfig cfg = common.resolve();
  const PairDataset ds = load_pairs(data, cfg);
  const Splits sp = split_dataset(ds, cfg);
  const Representation rep = load_representation(checkpoint);
  const PcaResult r = pca(rep.encode(sp.test), k);
  const auto labels = labels_of(sp.test);
  std::vector<std::string> names;
  for (int c = 0; c < class_count(ds.type); ++c) names.push_back(class_name(ds.type, c));
  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  write_text_file(dir / "pca_projections.csv", pca_projections_csv(r, labels, names));
  write_text_file(dir / "pca_centroids.csv", pca_centroids_csv(r, labels, names));
  std::ostringstream var;
  var << "component,variance\n";
  for (size_t i = 0; i < r.variances.size(); ++i) var << "pc" << i + 1 << ',' << format_double(r.variances[i]) << '\n';
  write_text_file(dir / "pca_variances.csv", var.str());
  log(common, "wrote PCA of " + std::to_string(sp.test.size()) + " test codes to " + out_dir);
}

// ---- analogize

void cmd_analogize(const Common& common, const std::string& checkpoint, const std::string& data,
                   std::optional<size_t> template_index, std::optional<int> template_label,
                   std::optional<size_t> n_targets, const std::string& targets_corpus, const std::string& out_dir) {
  const RunConfig cfg = common.resolve();
  if (peek_checkpoint_format(checkpoint) != "GAE1") throw UsageError("analogy requires a gated model");
  const GaeModel model = load_gae(fs::path(checkpoint));
  const PairDataset ds = load_pairs(data, cfg);
  if (template_index.has_value() == template_label.has_value()) {
    throw UsageError("give exactly one of --template-index and --template-label");
  }
  size_t idx = 0;
  if (template_index) {
    idx = *template_index;
    if (idx >= ds.samples.size()) throw UsageError("--template-index out of range");
  } else {
    // First test-split sample with the requested label.
    const size_t start = std::min(ds.samples.size(), cfg.n_train + cfg.n_val);
    idx = ds.samples.size();
    for (size_t i = start; i < ds.samples.size(); ++i) {
      if (ds.samples[i].label == *template_label) {
        idx = i;
        break;
      }
    }
    if (idx == ds.samples.size()) throw DataError("no test-split sample has label " + std::to_string(*template_label));
  }
  const PairSample& tpl = ds.samples[idx];
  const Vector m = infer_mapping(model, tpl.x, tpl.y);

  std::vector<NGram> pool;
  if (!targets_corpus.empty()) {
    RunConfig tc = cfg;
    tc.corpus_jsonl = targets_corpus;
    tc.corpus_midi_dir.clear();
    pool = corpus_ngrams(load_corpus(tc), cfg.stride);
  }
  const size_t count = n_targets.value_or(static_cast<size_t>(cfg.analogy_targets));
  const NGram tpl_src = decode(tpl.x);
  const auto targets = held_out_targets(cfg, tpl_src, tpl.label, count, targets_corpus.empty() ? nullptr : &pool);
  if (targets.size() < count) {
    log(common, "only " + std::to_string(targets.size()) + " usable targets (requested " + std::to_string(count) + ")");
  }
  std::optional<KeyId> key;
  if (ds.type == TransformType::TransD) key = estimate_key(tpl_src);

  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  write_text_file(dir / "template_x.pgm", render_pgm(tpl_src));
  write_text_file(dir / "template_y.pgm", render_pgm(decode(tpl.y)));
  std::ostringstream csv;
  csv << "target,precision,recall,f1,true_cells,generated_cells\n";
  double sp = 0, sr = 0, sf = 0;
  size_t scored = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    const auto res = analogize(model, m, targets[i].source, targets[i].truth, cfg.threshold);
    char name[32];
    std::snprintf(name, sizeof name, "target_%03zu", i);
    write_text_file(dir / (std::string(name) + "_source.pgm"), render_pgm(res.source));
    write_text_file(dir / (std::string(name) + "_generated.pgm"), render_generated(res.probs, key));
    csv << i << ',';
    if (res.scores) {
      csv << format_double(res.scores->precision) << ',' << format_double(res.scores->recall) << ','
          << format_double(res.scores->f1) << ',' << res.truth->count();
      sp += res.scores->precision;
      sr += res.scores->recall;
      sf += res.scores->f1;
      ++scored;
    } else {
      csv << ",,,";
    }
    csv << ',' << res.generated.count() << '\n';
  }
  write_text_file(dir / "scores.csv", csv.str());
  std::cout << "template " << idx << " (" << class_name(ds.type, tpl.label) << "), " << targets.size() << " targets";
  if (scored > 0) {
    const auto n = static_cast<double>(scored);
    std::cout << ": mean precision " << fmt(sp / n) << ", recall " << fmt(sr / n) << ", F1 " << fmt(sf / n);
  }
  std::cout << '\n';
}

// ---- render

void cmd_render(const Common& common, const std::string& data, size_t index, const std::string& out_dir, bool ascii) {
  const PairDataset ds = read_mtp1(fs::path(data));
  if (index >= ds.samples.size()) throw UsageError("--index out of range");
  const PairSample& s = ds.samples[index];
  const NGram x = decode(s.x), y = decode(s.y);
  if (ascii) {
    std::cout << "x (" << class_name(ds.type, s.label) << ")\n" << render_ascii(x) << "y\n" << render_ascii(y);
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    write_text_file(dir / ("pair_" + std::to_string(index) + "_x.pgm"), render_pgm(x));
    write_text_file(dir / ("pair_" + std::to_string(index) + "_y.pgm"), render_pgm(y));
    log(common, "wrote renders of pair " + std::to_string(index) + " to " + out_dir);
  }
}

void configure_threads() {
  int threads = 1;
  if (const char* env = std::getenv("MUSGAE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw UsageError("MUSGAE_THREADS must be a positive integer");
    threads = static_cast<int>(v);
  }
  Eigen::setNbThreads(threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and evaluate transformations of symbolic-music n-grams"};
  app.require_subcommand(1);

  Common common;

  std::string out, data, checkpoint, kind, resume, history, probe, format = "text", out_dir, targets_corpus;
  std::optional<size_t> count, template_index, n_targets;
  std::optional<int> template_label;
  std::vector<std::string> checkpoints;
  size_t index = 0;
  int k = 2;
  bool shuffle = false, ascii = false;

  auto* gen_corpus = app.add_subcommand("gen-corpus", "Write the configured corpus as note JSON lines");
  add_common(gen_corpus, common);
  gen_corpus->add_option("-o,--out", out, "Output .jsonl")->required();

  auto* gen_pairs = app.add_subcommand("gen-pairs", "Build a labeled pair dataset (MTP1 + JSON sidecar)");
  add_common(gen_pairs, common);
  gen_pairs->add_option("-o,--out", out, "Output .mtp1")->required();
  gen_pairs->add_option("-n,--count", count, "Number of pairs (default: train + val + test split sizes)");

  auto* train = app.add_subcommand("train", "Train a GAE or RBM stack on the train split");
  add_common(train, common);
  train->add_option("-k,--kind", kind, "gae or rbm (default: config \"model\")");
  train->add_option("-d,--data", data, "MTP1 dataset")->required();
  train->add_option("-o,--out", out, "Output checkpoint")->required();
  train->add_option("--resume", resume, "Continue from this checkpoint");
  train->add_option("--history", history, "Loss history CSV (default: <out>.history.csv)");

  auto* probe_cmd = app.add_subcommand("probe", "Train the probe classifier on frozen codes");
  add_common(probe_cmd, common);
  probe_cmd->add_option("-m,--checkpoint", checkpoint, "GAE1 or RBM1 checkpoint")->required();
  probe_cmd->add_option("-d,--data", data, "MTP1 dataset")->required();
  probe_cmd->add_option("-o,--out-dir", out_dir, "Output directory")->required();
  probe_cmd->add_flag("--shuffle-labels", shuffle, "Permute the labels (random-baseline control)");

  auto* eval = app.add_subcommand("eval", "Reconstruction cross-entropy and probe error on the test split");
  add_common(eval, common);
  eval->add_option("-m,--checkpoint", checkpoints, "GAE1 / RBM1 checkpoints")->required();
  eval->add_option("-d,--data", data, "MTP1 dataset")->required();
  eval->add_option("-p,--probe", probe, "FFN1 probe trained on the checkpoint's codes");
  eval->add_option("-f,--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
  eval->add_option("-o,--out", out, "Output file (default: stdout)");

  auto* pca_cmd = app.add_subcommand("pca", "Principal components of the test-split codes");
  add_common(pca_cmd, common);
  pca_cmd->add_option("-m,--checkpoint", checkpoint, "GAE1 or RBM1 checkpoint")->required();
  pca_cmd->add_option("-d,--data", data, "MTP1 dataset")->required();
  pca_cmd->add_option("-k,--components", k, "Number of components");
  pca_cmd->add_option("-o,--out-dir", out_dir, "Output directory")->required();

  auto* analog = app.add_subcommand("analogize", "Apply a template pair's mapping to held-out n-grams");
  add_common(analog, common);
  analog->add_option("-m,--checkpoint", checkpoint, "GAE1 checkpoint")->required();
  analog->add_option("-d,--data", data, "MTP1 dataset holding the template pair")->required();
  analog->add_option("--template-index", template_index, "Template = this sample of the dataset");
  analog->add_option("--template-label", template_label, "Template = first test-split sample with this label");
  analog->add_option("-n,--targets", n_targets, "Number of targets (default: config analogy.targets)");
  analog->add_option("--targets-corpus", targets_corpus, "Note JSON lines to draw targets from");
  analog->add_option("-o,--out-dir", out_dir, "Output directory")->required();

  auto* render = app.add_subcommand("render", "Render a dataset pair as PGM and/or ASCII");
  add_common(render, common);
  render->add_option("-d,--data", data, "MTP1 dataset")->required();
  render->add_option("-i,--index", index, "Sample index");
  render->add_option("-o,--out-dir", out_dir, "Output directory for PGM files");
  render->add_flag("--ascii", ascii, "Print ASCII renders");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    configure_threads();
    if (*gen_corpus) cmd_gen_corpus(common, out);
    if (*gen_pairs) cmd_gen_pairs(common, out, count);
    if (*train) cmd_train(common, kind, data, out, resume, history);
    if (*probe_cmd) cmd_probe(common, checkpoint, data, out_dir, shuffle);
    if (*eval) cmd_eval(common, checkpoints, data, probe, format, out);
    if (*pca_cmd) cmd_pca(common, checkpoint, data, k, out_dir);
    if (*analog) cmd_analogize(common, checkpoint, data, template_index, template_label, n_targets, targets_corpus,
                               out_dir);
    if (*render) cmd_render(common, data, index, out_dir, ascii);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
