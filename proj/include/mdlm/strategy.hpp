// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Noise strategies: how a sentence's tokens are ordered into masking buckets
// before the staged forward process runs.

#pragma once

#include "mdlm/abi.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mdlm/corpus.hpp"
#include "mdlm/importance.hpp"
#include "mdlm/pos_tagger.hpp"
#include "mdlm/schedule.hpp"

namespace mdlm::inline MDLM_ABI {

enum class NoiseStrategy { GaussianUniform, RandomMask, MaskPOS, MaskEntropy, MaskRelevancy, MaskEntropyRel };

/// Ablation-table row order.
inline constexpr std::array<NoiseStrategy, 6> kAllNoiseStrategies = {
    NoiseStrategy::GaussianUniform, NoiseStrategy::RandomMask,    NoiseStrategy::MaskPOS,
    NoiseStrategy::MaskEntropy,     NoiseStrategy::MaskRelevancy, NoiseStrategy::MaskEntropyRel};

std::string to_string(NoiseStrategy s);
/// Accepts the enum spelling ("MaskEntropyRel") or kebab-case ("mask-entropy-rel").
NoiseStrategy parse_noise_strategy(const std::string& name);
/// Human label as used in the ablation table ("Mask w. Entropy+Rel").
std::string table_label(NoiseStrategy s);

class MaskPlanner {
 public:
  /// stats: train-split corpus the importance statistics come from. The
  /// tagger and vocab are required for MaskPOS only.
  MaskPlanner(NoiseStrategy strategy, const Corpus& stats, ScheduleConfig schedule, const PosTagger* tagger = nullptr,
              const Vocabulary* vocab = nullptr, std::uint64_t seed = 0);

  NoiseStrategy strategy() const { return strategy_; }
  const ScheduleConfig& schedule() const { return schedule_; }

  /// Ordering scores (higher = noised earlier). RandomMask draws a fresh
  /// permutation for each (sentence_key, epoch).
  std::vector<double> scores(const TokenSequence& d, std::uint64_t sentence_key = 0, int epoch = 0) const;
  BucketAssignment buckets(const TokenSequence& d, std::uint64_t sentence_key = 0, int epoch = 0) const;
  MaskState plan(const TokenSequence& d, std::uint64_t sentence_key = 0, int epoch = 0) const;

 private:
  NoiseStrategy strategy_;
  const Corpus* stats_;
  ScheduleConfig schedule_;
  const PosTagger* tagger_;
  const Vocabulary* vocab_;
  std::uint64_t seed_;
};

}  // namespace mdlm
