// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Word importance within a sentence: tf-idf relevancy plus unigram entropy,
// each normalized over the sentence, and the split of a sentence's tokens
// into importance buckets (bucket 1 = most important).

#pragma once

#include "mdlm/abi.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "mdlm/corpus.hpp"

namespace mdlm::inline MDLM_ABI {

struct ImportanceProfile {
  std::vector<int> ids;
  std::vector<double> tf_idf;
  std::vector<double> entropy;     // nats
  std::vector<double> importance;  // normalized tf-idf share + normalized entropy share
  std::vector<std::int64_t> frequency;  // corpus token frequency, used for tie-breaks
  std::size_t sentence_id = 0;

  std::size_t size() const { return ids.size(); }
};

struct BucketAssignment {
  std::vector<int> bucket;  // 1-based, per token position
  int buckets = 1;
};

/// Term frequency within the sentence times ln(N / (1 + df)), clamped at 0.
/// Throws Error("absent") if word does not occur in sentence.
double tf_idf(int word, const TokenSequence& sentence, const Corpus& corpus);

/// -p ln p with p the unigram probability of word in corpus. Words never seen
/// take the UNK frequency. Throws Error("empty_corpus") if the corpus has no tokens.
double entropy(int word, const Corpus& corpus);

/// A normalized share whose denominator is zero becomes a uniform 1/l share.
ImportanceProfile importance(const TokenSequence& sentence, const Corpus& corpus, std::size_t sentence_id = 0);

/// Orders positions by descending score, breaking ties by lower corpus
/// frequency and then lower position, and cuts the order into m near-equal
/// consecutive slices (earlier slices one larger when l % m != 0).
/// Throws Error("range") when m < 1.
BucketAssignment bucketize_scores(std::span<const double> scores, std::span<const std::int64_t> frequency, int m);
BucketAssignment bucketize(const ImportanceProfile& profile, int m);

/// CSV rows "token,tf_idf,entropy,importance,bucket" (with header).
void write_importance_csv(std::ostream& out, const ImportanceProfile& profile, const BucketAssignment& buckets,
                          const Vocabulary& vocab);

}  // namespace mdlm
