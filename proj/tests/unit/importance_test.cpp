// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "mdlm/error.hpp"
#include "mdlm/importance.hpp"
#include "support/fixtures.hpp"

using namespace mdlm;
using mdlm::testing::data_path;
using mdlm::testing::make_corpus;

namespace {

const std::vector<std::string> kTiny = {"the cat sat", "the dog sat", "a cat ran"};

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

// Reference values from tests/oracles/reference_values.py.
TEST_CASE("tf-idf on the three-sentence corpus") {
  const auto tc = make_corpus(kTiny);
  const TokenSequence d1 = tc.corpus.sentence(0), d2 = tc.corpus.sentence(1);
  CHECK(tf_idf(tc.vocab.id("dog"), d2, tc.corpus) == doctest::Approx(0.1351550360).epsilon(1e-9));
  CHECK(tf_idf(tc.vocab.id("cat"), d1, tc.corpus) == 0.0);
  // df(the) = 2: ln(3/3) = 0.
  CHECK(tf_idf(tc.vocab.id("the"), d1, tc.corpus) == 0.0);
}

TEST_CASE("tf-idf clamps the single-sentence corpus to zero and rejects absent words") {
  const auto tc = make_corpus({"red fox"});
  CHECK(tf_idf(tc.vocab.id("fox"), tc.corpus.sentence(0), tc.corpus) == 0.0);
  const auto tiny = make_corpus(kTiny);
  try {
    tf_idf(tiny.vocab.id("dog"), tiny.corpus.sentence(0), tiny.corpus);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "absent");
  }
}

TEST_CASE("entropy on the three-sentence corpus") {
  const auto tc = make_corpus(kTiny);
  CHECK(entropy(tc.vocab.id("dog"), tc.corpus) == doctest::Approx(0.2441360641).epsilon(1e-9));
  CHECK(entropy(tc.vocab.id("the"), tc.corpus) == doctest::Approx(0.3342394215).epsilon(1e-9));
  const auto one = make_corpus({"word word word"});
  CHECK(entropy(one.vocab.id("word"), one.corpus) == 0.0);
}

TEST_CASE("importance of 'the dog sat' peaks at dog") {
  const auto tc = make_corpus(kTiny);
  const ImportanceProfile p = importance(tc.corpus.sentence(1), tc.corpus);
  REQUIRE(p.size() == 3);
  CHECK(p.importance[0] == doctest::Approx(0.3662436575).epsilon(1e-9));
  CHECK(p.importance[1] == doctest::Approx(1.2675126850).epsilon(1e-9));
  CHECK(p.importance[2] == doctest::Approx(0.3662436575).epsilon(1e-9));
  CHECK(p.importance[1] > p.importance[0]);
  CHECK(p.importance[1] > p.importance[2]);
}

TEST_CASE("importance falls back to uniform shares when tf-idf is all zero") {
  const auto tc = make_corpus(kTiny);
  const ImportanceProfile p = importance(tc.corpus.sentence(0), tc.corpus);  // the cat sat: all tf-idf 0
  const double h = sum(p.entropy);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(p.importance[i] == doctest::Approx(1.0 / 3.0 + p.entropy[i] / h).epsilon(1e-12));
}

TEST_CASE("single-token sentence has importance two") {
  const auto tc = make_corpus({"hello", "hello world", "world peace"});
  const ImportanceProfile p = importance(tc.corpus.sentence(0), tc.corpus);
  REQUIRE(p.size() == 1);
  CHECK(p.importance[0] == doctest::Approx(2.0));
}

TEST_CASE("importance shares sum to two and entropy stays below 1/e") {
  const auto texts = read_jsonl_texts(data_path("toy50.jsonl"));
  const Vocabulary v = Vocabulary::build(texts);
  const Corpus c = Corpus::load(data_path("toy50.jsonl"), v);
  for (std::size_t k = 0; k < c.size(); ++k) {
    const ImportanceProfile p = importance(c.sentence(k), c, k);
    CHECK(sum(p.importance) == doctest::Approx(2.0).epsilon(1e-12));
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p.entropy[i] >= 0.0);
      CHECK(p.entropy[i] <= 1.0 / std::exp(1.0) + 1e-12);
      CHECK(p.tf_idf[i] >= 0.0);
    }
  }
}

TEST_CASE("bucketize degenerate and even splits") {
  const std::vector<double> scores = {0.1, 0.6, 0.3, 0.5, 0.2, 0.4};
  const std::vector<std::int64_t> freq(6, 1);
  const BucketAssignment one = bucketize_scores(scores, freq, 1);
  CHECK(std::all_of(one.bucket.begin(), one.bucket.end(), [](int b) { return b == 1; }));
  const BucketAssignment three = bucketize_scores(scores, freq, 3);
  CHECK(three.bucket == std::vector<int>{3, 1, 2, 1, 3, 2});
  CHECK_THROWS_AS(bucketize_scores(scores, freq, 0), Error);
}

TEST_CASE("bucketize breaks ties by lower frequency then position") {
  const std::vector<double> scores = {0.5, 0.5, 0.5, 0.5};
  const std::vector<std::int64_t> freq = {9, 3, 3, 1};
  const BucketAssignment b = bucketize_scores(scores, freq, 2);
  CHECK(b.bucket == std::vector<int>{2, 1, 2, 1});
}

// Reference assignments from tests/oracles/reference_values.py.
TEST_CASE("toy sentences match the brute-force sort oracle") {
  const auto texts = read_jsonl_texts(data_path("toy50.jsonl"));
  const Vocabulary v = Vocabulary::build(texts);
  const Corpus c = Corpus::load(data_path("toy50.jsonl"), v);
  const ImportanceProfile p0 = importance(c.sentence(0), c);
  CHECK(p0.importance[6] == doctest::Approx(0.2746556824).epsilon(1e-9));
  CHECK(bucketize(p0, 3).bucket == std::vector<int>{2, 2, 3, 2, 1, 3, 1, 1});
  const ImportanceProfile p2 = importance(c.sentence(2), c);
  CHECK(p2.importance[3] == doctest::Approx(0.1973313913).epsilon(1e-9));
  CHECK(bucketize(p2, 3).bucket == std::vector<int>{1, 1, 3, 2, 3, 3, 1, 2, 2, 1});
}

TEST_CASE("bucketize is monotone with near-equal sizes") {
  const auto texts = read_jsonl_texts(data_path("e2e_toy500.jsonl"));
  const Vocabulary v = Vocabulary::build(texts);
  const Corpus c = Corpus::load(data_path("e2e_toy500.jsonl"), v);
  for (std::size_t k = 0; k < c.size(); k += 7) {
    const ImportanceProfile p = importance(c.sentence(k), c, k);
    for (int m = 1; m <= std::min<int>(4, static_cast<int>(p.size())); ++m) {
      const BucketAssignment b = bucketize(p, m);
      std::vector<int> sizes(static_cast<std::size_t>(m), 0);
      for (int x : b.bucket) {
        REQUIRE(x >= 1);
        REQUIRE(x <= m);
        ++sizes[static_cast<std::size_t>(x - 1)];
      }
      CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j)
          if (p.importance[i] > p.importance[j]) CHECK(b.bucket[i] <= b.bucket[j]);
    }
  }
}

TEST_CASE("importance csv lists one row per token") {
  const auto tc = make_corpus(kTiny);
  const ImportanceProfile p = importance(tc.corpus.sentence(1), tc.corpus);
  std::ostringstream out;
  write_importance_csv(out, p, bucketize(p, 3), tc.vocab);
  const std::string csv = out.str();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("dog") != std::string::npos);
}
