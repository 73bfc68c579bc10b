#include <algorithm>
#include <set>

#include "doctest.h"
#include "musgae/errors.h"
#include "musgae/pipeline.h"

using namespace musgae;

namespace {

RunConfig tiny() {
  RunConfig c = desk_profile();
  c.synth.n_pieces = 20;
  c.n_train = 200;
  c.n_val = 10;
  c.n_test = 50;
  return c;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("desk profile") {
    const RunConfig c = desk_profile();
    CHECK(c.n_train == 20000);
    CHECK(c.n_val == 1000);
    CHECK(c.n_test == 4000);
    CHECK(c.gae.epochs == 200);
    CHECK(c.rbm.epochs == 100);
    CHECK(size_name(c) == "128/64");
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("config keys round trip") {
    RunConfig c = desk_profile();
    apply_override(c, "gae.lr=0.001");
    apply_override(c, "transform=Retro");
    apply_override(c, "size=256/128");
    apply_override(c, "synth.step_weights=[1,1,1,1,1,1,1]");
    CHECK(c.gae.lr == 0.001);
    CHECK(c.transform == TransformType::Retro);
    CHECK(c.size1 == 256);
    CHECK(c.size2 == 128);
    const auto j = to_json(c);
    CHECK(j.size() == run_config_keys().size());
    RunConfig d;
    apply_json(d, j);
    CHECK(to_json(d) == j);
    CHECK_THROWS_AS(apply_override(c, "gae.nope=1"), UsageError);
    CHECK_THROWS_AS(apply_override(c, "gae.lr"), UsageError);
    CHECK_THROWS_AS(apply_override(c, "gae.epochs=\"many\""), UsageError);
    CHECK_THROWS_AS(set_size(c, "128x64"), UsageError);
  }

  TEST_CASE("validation") {
    RunConfig c = desk_profile();
    c.corpus_jsonl = "a.jsonl";
    c.corpus_midi_dir = "midi";
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = desk_profile();
    c.model = "vae";
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = desk_profile();
    c.threshold = 1.0;
    CHECK_THROWS_AS(c.validate(), UsageError);
  }

  TEST_CASE("stage seeds differ per stage and seed") {
    std::set<uint64_t> seen;
    for (uint64_t s : {1ULL, 2ULL})
      for (const char* stage : {"corpus", "pairs", "gae", "rbm", "probe"}) seen.insert(stage_seed(s, stage));
    CHECK(seen.size() == 10);
    CHECK(stage_seed(1, "gae") == stage_seed(1, "gae"));
  }

  TEST_CASE("pairs, splits and sidecar") {
    RunConfig c = tiny();
    const auto ds = generate_pairs(c);
    CHECK(ds.samples.size() == 260);
    const auto counts = ds.class_counts();
    CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);
    CHECK(generate_pairs(c).samples == ds.samples);
    const auto sp = split_dataset(ds, c);
    CHECK(sp.train.size() == 200);
    CHECK(sp.val.size() == 10);
    CHECK(sp.test.size() == 50);
    CHECK(&sp.val.front() == &ds.samples[200]);
    const auto side = pairs_sidecar(ds);
    CHECK(side["count"] == 260);
    CHECK(side["classes"] == 24);
    CHECK(side["histogram"]["-12"].get<int>() >= 10);
    CHECK(side["rejections"].contains("key_fit"));
    c.n_train = 1000;
    CHECK_THROWS_AS(split_dataset(ds, c), DataError);
    const Matrix rows = concat_rows(sp.test);
    CHECK(rows.rows() == 50);
    CHECK(rows.cols() == kPairBits);
    CHECK(labels_of(sp.test).size() == 50);
  }

  TEST_CASE("TransD sidecar reports key rejections") {
    RunConfig c = tiny();
    c.transform = TransformType::TransD;
    const auto ds = generate_pairs(c);
    const auto side = pairs_sidecar(ds);
    CHECK(side["rejections"]["key_fit"].get<uint64_t>() == ds.stats.key_fit_rejections);
    CHECK(side["rejections"]["key_tie"].get<uint64_t>() == ds.stats.key_tie_rejections);
    CHECK(side["transform"] == "TransD");
  }

  TEST_CASE("representations") {
    RunConfig c = tiny();
    const auto ds = generate_pairs(c);
    const auto sp = split_dataset(ds, c);
    Representation g;
    g.gae = init_gae(kNgramBits, 16, 8, 1);
    CHECK(g.kind() == "GAE");
    CHECK(g.size() == "16/8");
    CHECK(g.encode(sp.test).cols() == 8);
    CHECK(g.reconstruction_ce(sp.test) == doctest::Approx(std::log(2.0)).epsilon(0.05));
    Representation r;
    r.rbm = init_stack(kPairBits, 16, 8, 1);
    CHECK(r.kind() == "RBM");
    CHECK(r.encode(sp.test).cols() == 8);
  }

  TEST_CASE("shuffled labels are a permutation") {
    std::vector<int> labels(100);
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 7);
    auto s = shuffled_labels(labels, 3);
    CHECK(s != labels);
    CHECK(shuffled_labels(labels, 3) == s);
    std::sort(s.begin(), s.end());
    auto sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    CHECK(s == sorted);
  }

  TEST_CASE("held-out analogy targets") {
    RunConfig c = tiny();
    NGram tmpl;
    tmpl.set(24, 0);
    tmpl.set(28, 2);  // C and E: C major
    const auto targets = held_out_targets(c, tmpl, 10, 30);
    CHECK(targets.size() == 30);
    for (const auto& t : targets) {
      REQUIRE(t.truth.has_value());
      CHECK(*t.truth == *transpose_chromatic(t.source, -2));
    }
    c.transform = TransformType::TransD;
    const auto same_key = held_out_targets(c, tmpl, 9, 10);
    for (const auto& t : same_key) CHECK(estimate_key(t.source)->tonic == 0);
    c.transform = TransformType::Tempo;
    const auto dbl = held_out_targets(c, tmpl, kTempoDouble, 5);
    CHECK(dbl.size() == 5);
    for (const auto& t : dbl) CHECK_FALSE(t.truth.has_value());
  }
}
