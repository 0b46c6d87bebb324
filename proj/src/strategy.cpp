// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/strategy.hpp"

#include <algorithm>
#include <numeric>

#include "mdlm/error.hpp"
#include "mdlm/random.hpp"

namespace mdlm::inline MDLM_ABI {

namespace {

struct StrategyName {
  NoiseStrategy strategy;
  const char* name;
  const char* kebab;
  const char* label;
};

constexpr StrategyName kNames[] = {
    {NoiseStrategy::GaussianUniform, "GaussianUniform", "gaussian", "Gaussian"},
    {NoiseStrategy::RandomMask, "RandomMask", "random-mask", "Random Mask"},
    {NoiseStrategy::MaskPOS, "MaskPOS", "mask-pos", "Mask w. POS"},
    {NoiseStrategy::MaskEntropy, "MaskEntropy", "mask-entropy", "Mask w. Entropy"},
    {NoiseStrategy::MaskRelevancy, "MaskRelevancy", "mask-rel", "Mask w. Rel"},
    {NoiseStrategy::MaskEntropyRel, "MaskEntropyRel", "mask-entropy-rel", "Mask w. Entropy+Rel"},
};

const StrategyName& lookup(NoiseStrategy s) {
  for (const auto& n : kNames)
    if (n.strategy == s) return n;
  throw Error("config", "unknown noise strategy");
}

std::vector<double> share(const std::vector<double>& raw) {
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = total > 0.0 ? raw[i] / total : 1.0 / static_cast<double>(raw.size());
  return out;
}

}  // namespace

std::string to_string(NoiseStrategy s) { return lookup(s).name; }
std::string table_label(NoiseStrategy s) { return lookup(s).label; }

NoiseStrategy parse_noise_strategy(const std::string& name) {
  for (const auto& n : kNames)
    if (name == n.name || name == n.kebab) return n.strategy;
  throw Error("config", "unknown noise strategy '" + name + "'");
}

MaskPlanner::MaskPlanner(NoiseStrategy strategy, const Corpus& stats, ScheduleConfig schedule,
                         const PosTagger* tagger, const Vocabulary* vocab, std::uint64_t seed)
    : strategy_(strategy), stats_(&stats), schedule_(schedule), tagger_(tagger), vocab_(vocab), seed_(seed) {
  if (strategy == NoiseStrategy::MaskPOS && (tagger == nullptr || vocab == nullptr))
    throw Error("config", "MaskPOS needs a POS tagger and vocabulary");
}

std::vector<double> MaskPlanner::scores(const TokenSequence& d, std::uint64_t sentence_key, int epoch) const {
  const std::size_t l = d.size();
  switch (strategy_) {
    case NoiseStrategy::GaussianUniform:
      return std::vector<double>(l, 0.0);
    case NoiseStrategy::RandomMask: {
      Rng rng(derive_seed(derive_seed(seed_, sentence_key), static_cast<std::uint64_t>(epoch)));
      std::vector<double> ranks(l);
      std::iota(ranks.begin(), ranks.end(), 0.0);
      std::shuffle(ranks.begin(), ranks.end(), rng);
      return ranks;
    }
    case NoiseStrategy::MaskPOS: {
      std::vector<double> out;
      for (const auto& tag : tagger_->tag_sequence(d, *vocab_))
        out.push_back(tag == "NOUN" || tag == "PROPN" ? 2.0 : (tag == "VERB" || tag == "AUX" ? 1.0 : 0.0));
      return out;
    }
    case NoiseStrategy::MaskEntropy:
      return share(importance(d, *stats_).entropy);
    case NoiseStrategy::MaskRelevancy:
      return share(importance(d, *stats_).tf_idf);
    case NoiseStrategy::MaskEntropyRel:
      return importance(d, *stats_).importance;
  }
  throw Error("config", "unknown noise strategy");
}

BucketAssignment MaskPlanner::buckets(const TokenSequence& d, std::uint64_t sentence_key, int epoch) const {
  if (strategy_ == NoiseStrategy::GaussianUniform) return BucketAssignment{std::vector<int>(d.size(), 1), 1};
  std::vector<std::int64_t> freq;
  freq.reserve(d.size());
  for (int id : d.ids) freq.push_back(stats_->token_frequency(id));
  return bucketize_scores(scores(d, sentence_key, epoch), freq, schedule_.buckets);
}

MaskState MaskPlanner::plan(const TokenSequence& d, std::uint64_t sentence_key, int epoch) const {
  if (strategy_ == NoiseStrategy::GaussianUniform) return uniform_mask_state(d.size(), schedule_.steps);
  return make_mask_state(buckets(d, sentence_key, epoch), schedule_.steps, schedule_.staging);
}

}  // namespace mdlm
