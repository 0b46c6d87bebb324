// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <map>
#include <vector>

#include "mdlm/error.hpp"
#include "mdlm/importance.hpp"
#include "mdlm/pos_tagger.hpp"
#include "mdlm/strategy.hpp"
#include "support/fixtures.hpp"

using namespace mdlm;
using mdlm::testing::data_path;
using mdlm::testing::make_corpus;

namespace {

struct Toy {
  Vocabulary vocab;
  Corpus corpus;
  PosTagger tagger;
};

Toy load_toy() {
  Toy t;
  t.vocab = Vocabulary::build(read_jsonl_texts(data_path("toy50.jsonl")));
  t.corpus = Corpus::load(data_path("toy50.jsonl"), t.vocab);
  t.tagger = PosTagger::load(data_path("pos_lexicon.tsv"));
  return t;
}

}  // namespace

TEST_CASE("strategy names round trip") {
  for (NoiseStrategy s : kAllNoiseStrategies) {
    CHECK(parse_noise_strategy(to_string(s)) == s);
    CHECK_FALSE(table_label(s).empty());
  }
  CHECK(parse_noise_strategy("mask-entropy-rel") == NoiseStrategy::MaskEntropyRel);
  CHECK(parse_noise_strategy("gaussian") == NoiseStrategy::GaussianUniform);
  CHECK(table_label(NoiseStrategy::MaskEntropyRel) == "Mask w. Entropy+Rel");
  CHECK_THROWS_AS(parse_noise_strategy("bogus"), Error);
}

TEST_CASE("GaussianUniform with one bucket degenerates to uniform corruption") {
  const Toy toy = load_toy();
  ScheduleConfig sc;
  sc.steps = 50;
  sc.buckets = 1;
  const MaskPlanner planner(NoiseStrategy::GaussianUniform, toy.corpus, sc);
  for (std::size_t k = 0; k < toy.corpus.size(); ++k) {
    const TokenSequence& d = toy.corpus.sentence(k);
    const MaskState m = planner.plan(d, k);
    for (int t = 1; t <= sc.steps; t += 7)
      CHECK(masked_sentence(d, t, m).ids == std::vector<int>(d.size(), kMaskId));
  }
}

TEST_CASE("MaskEntropyRel plans follow the importance buckets") {
  const Toy toy = load_toy();
  ScheduleConfig sc;
  sc.steps = 300;
  const MaskPlanner planner(NoiseStrategy::MaskEntropyRel, toy.corpus, sc);
  for (std::size_t k = 0; k < toy.corpus.size(); ++k) {
    const TokenSequence& d = toy.corpus.sentence(k);
    const BucketAssignment expect = bucketize(importance(d, toy.corpus), sc.buckets);
    CHECK(planner.buckets(d, k).bucket == expect.bucket);
    const MaskState m = planner.plan(d, k);
    for (std::size_t i = 0; i < d.size(); ++i)
      CHECK(m.activation[i] == bucket_start_step(expect.bucket[i], sc.steps, sc.buckets) - 1);
  }
}

TEST_CASE("every strategy yields valid staged plans") {
  const Toy toy = load_toy();
  ScheduleConfig sc;
  sc.steps = 90;
  for (NoiseStrategy s : kAllNoiseStrategies) {
    const MaskPlanner planner(s, toy.corpus, sc, &toy.tagger, &toy.vocab, 7);
    for (std::size_t k = 0; k < toy.corpus.size(); k += 5) {
      const TokenSequence& d = toy.corpus.sentence(k);
      const MaskState m = planner.plan(d, k, 0);
      REQUIRE(m.size() == d.size());
      for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(m.activation[i] >= 0);
        CHECK(m.activation[i] < m.deactivation[i]);
        CHECK(m.deactivation[i] <= sc.steps);
      }
      // Every token is masked by the last step.
      CHECK(masked_sentence(d, sc.steps, m).ids == std::vector<int>(d.size(), kMaskId));
    }
  }
}

TEST_CASE("RandomMask is seeded per sentence and epoch") {
  const Toy toy = load_toy();
  ScheduleConfig sc;
  sc.steps = 90;
  const MaskPlanner a(NoiseStrategy::RandomMask, toy.corpus, sc, nullptr, nullptr, 3);
  const MaskPlanner b(NoiseStrategy::RandomMask, toy.corpus, sc, nullptr, nullptr, 3);
  const TokenSequence& d = toy.corpus.sentence(2);
  CHECK(a.scores(d, 2, 0) == b.scores(d, 2, 0));
  bool differs = false;
  for (int epoch = 1; epoch < 10 && !differs; ++epoch) differs = a.scores(d, 2, 0) != a.scores(d, 2, epoch);
  CHECK(differs);
}

TEST_CASE("MaskPOS ranks nouns over verbs over function words") {
  const Toy toy = load_toy();
  ScheduleConfig sc;
  sc.steps = 90;
  CHECK_THROWS_AS(MaskPlanner(NoiseStrategy::MaskPOS, toy.corpus, sc), Error);
  const MaskPlanner planner(NoiseStrategy::MaskPOS, toy.corpus, sc, &toy.tagger, &toy.vocab);
  const TokenSequence d = tokenize("the mill serves food", toy.vocab);
  const auto scores = planner.scores(d);
  const auto tags = toy.tagger.tag_sequence(d, toy.vocab);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (tags[i] == "DET") CHECK(scores[i] == 0.0);
    if (tags[i] == "NOUN") CHECK(scores[i] == 2.0);
    if (tags[i] == "VERB") CHECK(scores[i] == 1.0);
  }
}

TEST_CASE("POS tagger lexicon lookups and fallback") {
  const PosTagger tagger = PosTagger::load(data_path("pos_lexicon.tsv"));
  CHECK(tagger.tag("the") == "DET");
  CHECK(tagger.tag("qwertyuiop") == "NOUN");
  const auto tags = tagger.tagset();
  CHECK(std::find(tags.begin(), tags.end(), "NOUN") != tags.end());
  CHECK(split_tags("NOUN  VERB DET") == std::vector<std::string>{"NOUN", "VERB", "DET"});
  mdlm::testing::ScratchDir dir("tagger");
  mdlm::testing::write_file(dir / "bad.tsv", "word-without-tag\n");
  CHECK_THROWS_AS(PosTagger::load(dir / "bad.tsv"), Error);
}
