// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdlm/error.hpp"

namespace mdlm::inline MDLM_ABI {

namespace {

std::vector<double> normalized_share(const std::vector<double>& raw) {
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  std::vector<double> share(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    share[i] = total > 0.0 ? raw[i] / total : 1.0 / static_cast<double>(raw.size());
  return share;
}

}  // namespace

double tf_idf(int word, const TokenSequence& sentence, const Corpus& corpus) {
  const auto count = std::count(sentence.ids.begin(), sentence.ids.end(), word);
  if (count == 0) throw Error("absent", "word does not occur in sentence");
  const double tf = static_cast<double>(count) / static_cast<double>(sentence.ids.size());
  const double n = static_cast<double>(corpus.size());
  const double idf = std::log(n / (1.0 + static_cast<double>(corpus.document_frequency(word))));
  return std::max(0.0, tf * idf);
}

double entropy(int word, const Corpus& corpus) {
  if (corpus.total_tokens() == 0) throw Error("empty_corpus", "zero total frequency");
  std::int64_t f = corpus.token_frequency(word);
  if (f == 0) f = corpus.token_frequency(kUnkId);
  if (f == 0) return 0.0;
  const double p = static_cast<double>(f) / static_cast<double>(corpus.total_tokens());
  return -p * std::log(p);
}

ImportanceProfile importance(const TokenSequence& sentence, const Corpus& corpus, std::size_t sentence_id) {
  if (sentence.ids.empty()) throw Error("empty_sentence", "empty sentence");
  ImportanceProfile profile;
  profile.ids = sentence.ids;
  profile.sentence_id = sentence_id;
  for (int id : sentence.ids) {
    profile.tf_idf.push_back(tf_idf(id, sentence, corpus));
    profile.entropy.push_back(entropy(id, corpus));
    profile.frequency.push_back(corpus.token_frequency(id));
  }
  const auto rel = normalized_share(profile.tf_idf);
  const auto ent = normalized_share(profile.entropy);
  profile.importance.resize(rel.size());
  for (std::size_t i = 0; i < rel.size(); ++i) profile.importance[i] = rel[i] + ent[i];
  return profile;
}

BucketAssignment bucketize_scores(std::span<const double> scores, std::span<const std::int64_t> frequency, int m) {
  if (m < 1) throw Error("range", "bucket count must be >= 1");
  if (frequency.size() != scores.size()) throw Error("shape", "frequency length must match scores");
  const std::size_t l = scores.size();
  std::vector<std::size_t> order(l);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (frequency[a] != frequency[b]) return frequency[a] < frequency[b];
    return a < b;
  });
  BucketAssignment out;
  out.buckets = m;
  out.bucket.assign(l, 1);
  const std::size_t base = l / static_cast<std::size_t>(m);
  const std::size_t extra = l % static_cast<std::size_t>(m);
  std::size_t pos = 0;
  for (int b = 1; b <= m && pos < l; ++b) {
    const std::size_t take = base + (static_cast<std::size_t>(b) <= extra ? 1 : 0);
    for (std::size_t k = 0; k < take && pos < l; ++k) out.bucket[order[pos++]] = b;
  }
  return out;
}

BucketAssignment bucketize(const ImportanceProfile& profile, int m) {
  return bucketize_scores(profile.importance, profile.frequency, m);
}

void write_importance_csv(std::ostream& out, const ImportanceProfile& profile, const BucketAssignment& buckets,
                          const Vocabulary& vocab) {
  out << "token,tf_idf,entropy,importance,bucket\n";
  for (std::size_t i = 0; i < profile.size(); ++i) {
    std::string token = vocab.token(profile.ids[i]);
    if (token.find_first_of(",\"") != std::string::npos) token = "\"" + (token == "\"" ? "\"\"" : token) + "\"";
    out << token << ',' << profile.tf_idf[i] << ',' << profile.entropy[i] << ',' << profile.importance[i] << ','
        << buckets.bucket[i] << '\n';
  }
}

}  // namespace mdlm
