// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Control-task accuracy oracles, fluency under a teacher language model, and
// the noise-strategy x objective ablation harness.

#pragma once

#include "mdlm/abi.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdlm/corpus.hpp"
#include "mdlm/denoiser.hpp"
#include "mdlm/guidance.hpp"
#include "mdlm/nn.hpp"
#include "mdlm/pos_tagger.hpp"
#include "mdlm/strategy.hpp"
#include "mdlm/training.hpp"

namespace mdlm::inline MDLM_ABI {

/// Fraction of outputs whose token count is within +-2 of its target.
/// Throws Error("shape") if the lists differ in length.
double length_accuracy(std::span<const TokenSequence> outputs, std::span<const int> targets);

/// Fraction of outputs containing the control value's tokens (lowercased,
/// tokenized like the corpus) as a contiguous run.
double content_accuracy(std::span<const TokenSequence> outputs, std::span<const ControlSpec> specs,
                        const Vocabulary& vocab);

/// Fraction of outputs whose tagged sequence equals the control's tags
/// exactly; a length mismatch is a miss.
double pos_accuracy(std::span<const TokenSequence> outputs, std::span<const ControlSpec> specs,
                    const PosTagger& tagger, const Vocabulary& vocab);

/// Anything that assigns next-token log-probabilities to a sentence.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  /// log p(d_i | d_<i) for every position i.
  virtual std::vector<double> token_log_probs(const TokenSequence& d) const = 0;
};

/// exp(mean token negative log-likelihood) over all output tokens.
/// Throws Error("empty") when there are no tokens to score.
double fluency_perplexity(std::span<const TokenSequence> outputs, const TokenScorer& teacher);

struct TeacherConfig {
  int width = 64;
  int layers = 2;
  int heads = 4;
  int max_length = kDefaultMaxLength;
  int steps = 600;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TeacherConfig from_json(const nlohmann::json& j);
};

/// Small causal transformer LM. PAD doubles as the begin-of-sentence token.
class TeacherLM final : public TokenScorer {
 public:
  TeacherLM(int vocab_size, const TeacherConfig& config);

  /// Returns the mean training loss of the last 20 steps.
  double fit(const Corpus& corpus);
  std::vector<double> token_log_probs(const TokenSequence& d) const override;
  std::vector<ag::Parameter*> parameters();

 private:
  ag::Var logits(ag::Graph& g, const std::vector<std::vector<int>>& inputs) const;

  int vocab_size_;
  TeacherConfig config_;
  ag::Parameter embedding_;
  ag::Parameter position_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm norm_;
  nn::Linear head_;
};

struct EvalReport {
  std::string task;  // "length" | "content" | "pos"
  double accuracy = 0;
  double fluency = 0;  // teacher perplexity
  std::size_t samples = 0;
  std::string config_hash;

  nlohmann::json to_json() const;
};

/// Hex FNV-1a of the compact JSON dump.
std::string config_hash(const nlohmann::json& config);

struct EvalTargets {
  std::vector<ControlSpec> controls;
  std::vector<int> lengths;  // free sampling length per control
};

/// Control targets drawn deterministically from a (validation) corpus:
/// content uses `field` attributes, pos the tagger, length the sentence length.
EvalTargets select_targets(const Corpus& corpus, const Vocabulary& vocab, ControlKind kind, const std::string& field,
                           const PosTagger* tagger, int count, std::uint64_t seed);

/// Samples `samples_per_target` outputs per control and scores them.
/// `planner` stages the reverse retention (see reverse_step).
EvalReport evaluate_control(const Denoiser& model, const NoiseSchedule& schedule, const Vocabulary& vocab,
                            const EvalTargets& targets, const LatentClassifier* classifier,
                            const GuidanceConfig& guidance, int samples_per_target, const TokenScorer& teacher,
                            const PosTagger* tagger, std::uint64_t seed,
                            std::vector<TokenSequence>* outputs = nullptr, const MaskPlanner* planner = nullptr);

struct AblationConfig {
  std::vector<NoiseStrategy> strategies{kAllNoiseStrategies.begin(), kAllNoiseStrategies.end()};
  std::vector<Objective> objectives{Objective::CE, Objective::L2};
  DenoiserConfig model;  // vocab_size and steps are filled in from the data
  ScheduleConfig schedule;
  TrainConfig train;
  ClassifierConfig classifier;
  ClassifierTrainConfig classifier_train;
  GuidanceConfig guidance;
  TeacherConfig teacher;
  std::string field = "food";
  int targets = 20;
  int samples_per_target = 5;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct AblationCell {
  NoiseStrategy strategy = NoiseStrategy::MaskEntropyRel;
  Objective objective = Objective::CE;
  bool failed = false;
  std::string error;
  double final_loss = 0;
  double classifier_accuracy = 0;
  EvalReport report;

  nlohmann::json to_json() const;
};

struct AblationReport {
  std::vector<AblationCell> cells;  // strategy-major, in request order
  double teacher_loss = 0;

  nlohmann::json to_json() const;
  /// Aligned text: one row per strategy, accuracy/fluency column per objective.
  std::string to_table() const;
};

using AblationProgress = std::function<void(const AblationCell&)>;

/// Trains one model per (strategy, objective) cell from the same seed and
/// scores semantic-content control on `validation`. A failing cell is marked
/// failed and the sweep continues.
AblationReport run_ablation(const Corpus& train, const Corpus& validation, const Vocabulary& vocab,
                            const PosTagger& tagger, const AblationConfig& config,
                            const AblationProgress& progress = {});

}  // namespace mdlm
