// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-process sampling, plug-and-play classifier guidance on the
// latents, and minimum Bayes risk selection over sampled candidates.
//
// A guided step starts from the model's reverse step and runs K gradient
// updates on the candidate latent x along
//     lambda * grad_x log p(x | x_t) + grad_x log p(c | x),
// with log p(x | x_t) = -||x - mu||^2 / (2 beta_t) + const and
// mu the unguided reverse step's output.

#pragma once

#include "mdlm/abi.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdlm/autograd.hpp"
#include "mdlm/corpus.hpp"
#include "mdlm/denoiser.hpp"
#include "mdlm/nn.hpp"
#include "mdlm/pos_tagger.hpp"
#include "mdlm/schedule.hpp"
#include "mdlm/strategy.hpp"

namespace mdlm::inline MDLM_ABI {

enum class ControlKind { Length, SemanticContent, POS };
std::string to_string(ControlKind k);

struct ControlSpec {
  ControlKind kind = ControlKind::Length;
  int length = 0;                 // Length
  std::string field;              // SemanticContent, e.g. "food"
  std::string value;              // SemanticContent, e.g. "Japanese"
  std::vector<std::string> tags;  // POS

  /// "length=7", "content=food:Japanese", "pos=NOUN VERB DET NOUN".
  /// Throws Error("control") on malformed input.
  static ControlSpec parse(const std::string& text);
  static ControlSpec make_length(int length);
  static ControlSpec make_content(std::string field, std::string value);
  static ControlSpec make_pos(std::vector<std::string> tags);

  void validate() const;
  std::string to_string() const;
};

struct ClassifierConfig {
  ControlKind kind = ControlKind::SemanticContent;
  std::string field;                // SemanticContent only
  std::vector<std::string> labels;  // class names; SemanticContent: "<none>" first
  int latent_dim = 128;
  int width = 64;
  int heads = 4;
  int steps = 500;  // T; the classifier sees t in [0, T]
  int max_length = kDefaultMaxLength;

  nlohmann::json to_json() const;
  static ClassifierConfig from_json(const nlohmann::json& j);
};

/// Small transformer over diffusion latents. SemanticContent pools the
/// sequence into one class distribution; POS predicts one tag per position.
class LatentClassifier {
 public:
  LatentClassifier(const ClassifierConfig& config, std::uint64_t seed);
  LatentClassifier(const LatentClassifier&) = delete;
  LatentClassifier& operator=(const LatentClassifier&) = delete;
  LatentClassifier(LatentClassifier&&) = default;
  LatentClassifier& operator=(LatentClassifier&&) = default;

  const ClassifierConfig& config() const { return config_; }
  /// Class index of a label, or -1.
  int label_index(const std::string& label) const;

  /// Log-probabilities: (segments x C) for SemanticContent, (rows x C) for POS.
  ag::Var log_probs(ag::Graph& g, const ag::Var& x, const ag::Segments& segments, std::span<const int> steps) const;
  /// Per-row (POS) or per-segment (content) target class indices for a control.
  std::vector<int> targets(const ControlSpec& control, int length) const;
  /// log p(c | x) for one sequence at diffusion step t, as a graph scalar.
  ag::Var log_prob(ag::Graph& g, const ag::Var& x, int t, const ControlSpec& control) const;
  double log_prob(const Matrix& x, int t, const ControlSpec& control) const;
  /// grad_x log p(c | x).
  Matrix input_gradient(const Matrix& x, int t, const ControlSpec& control) const;

  std::vector<ag::Parameter*> parameters();
  std::vector<const ag::Parameter*> parameters() const;

  void save(const std::filesystem::path& path) const;
  static LatentClassifier load(const std::filesystem::path& path);

 private:
  ClassifierConfig config_;
  nn::Linear in_proj_;
  ag::Parameter position_;
  ag::Parameter timestep_;
  nn::TransformerBlock block_;
  nn::LayerNorm norm_;
  nn::Linear head_;
};

struct LabeledLatent {
  Matrix x;
  int t = 0;
  std::vector<int> labels;  // one entry (content) or one per row (POS)
};

struct ClassifierTrainConfig {
  int steps = 400;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct ClassifierReport {
  double heldout_accuracy = 0;
  std::size_t train_examples = 0;
  std::size_t heldout_examples = 0;
};

/// Draws example `index` (fresh noise per call when the source is stochastic).
using LatentSource = std::function<LabeledLatent(std::size_t index, Rng& rng)>;

/// Trains on the first (1 - holdout) share of the indices and reports
/// accuracy (per sequence for content, per token for POS) on the rest, each
/// held-out example drawn once with a fixed seed.
ClassifierReport fit_classifier(LatentClassifier& classifier, std::size_t example_count, const LatentSource& source,
                                const ClassifierTrainConfig& config);

/// Classifier over q_sample latents of the model's own embeddings at random
/// t. SemanticContent labels come from corpus attributes for `field`; POS
/// labels from the tagger. Throws Error("no_labels") if nothing is labeled.
LatentClassifier train_latent_classifier(const Corpus& corpus, const Vocabulary& vocab, const Denoiser& model,
                                         const MaskPlanner& planner, ControlKind kind, const std::string& field,
                                         const PosTagger* tagger, const ClassifierConfig& shape,
                                         const ClassifierTrainConfig& config, ClassifierReport* report = nullptr);

enum class GuidanceOptimizer { Adam, Sgd };

/// How a reverse step turns the transition output into X_{t-1}.
enum class ReverseMode {
  /// X_{t-1} is the transition output itself.
  Direct,
  /// The transition output is read out as a clean token estimate d0 (argmax
  /// over ordinary tokens), and X_{t-1} re-noises e(d0) to step t-1 with the
  /// staged per-token retention, reusing the noise implied by X_t.
  Renoise,
};

struct GuidanceConfig {
  double lambda = 0.01;  // fluency weight
  int updates = 3;       // K gradient updates per diffusion step
  double step_size = 0.1;
  int candidates = 50;   // S, for MBR
  bool stochastic = false;
  /// Renoise only: the clean estimate is the probability-weighted mean of the
  /// ordinary-token embeddings instead of the argmax token's embedding.
  bool soft_estimate = false;
  GuidanceOptimizer optimizer = GuidanceOptimizer::Adam;
  ReverseMode reverse = ReverseMode::Renoise;

  void validate() const;
  nlohmann::json to_json() const;
  static GuidanceConfig from_json(const nlohmann::json& j);
};

/// Argmax per row over ordinary tokens only (PAD, MASK and UNK excluded).
std::vector<int> content_argmax(const Matrix& logits);
/// Nearest ordinary-token embedding per row (squared Euclidean distance).
TokenSequence nearest_tokens(const Denoiser& model, const Matrix& x);

/// Direct: mu = transition(x_t, t). Renoise: mu re-noises the clean estimate
/// to step t-1; `planner` (optional) stages the retention by the estimate's
/// importance, otherwise every token follows the plain schedule. Stochastic
/// mode adds sqrt(beta_t) z (Direct) or draws fresh noise (Renoise).
LatentSequence reverse_step(const LatentSequence& x_t, int t, const Denoiser& model, const NoiseSchedule& schedule,
                            const GuidanceConfig& config, Rng& rng, const MaskPlanner* planner = nullptr);

/// grad_x log p(x | x_t) at lambda = 1: (mu - x) / beta.
Matrix fluency_gradient(const Matrix& x, const Matrix& mu, double beta);
/// lambda * fluency_gradient + classifier.input_gradient at step t - 1.
Matrix guidance_gradient(const Matrix& x, const Matrix& mu, int t, const NoiseSchedule& schedule, double lambda,
                         const LatentClassifier& classifier, const ControlSpec& control);

/// K == 0 or a null classifier reduces to reverse_step. Throws
/// Error("control") if the classifier does not match the control kind.
LatentSequence guided_step(const LatentSequence& x_t, int t, const Denoiser& model, const NoiseSchedule& schedule,
                           const LatentClassifier* classifier, const ControlSpec* control,
                           const GuidanceConfig& config, Rng& rng, const MaskPlanner* planner = nullptr);

/// decoded[k] is the argmax readout of the transition output at reverse
/// step t = T - k (MASK included).
struct SampleTrace {
  std::vector<std::vector<int>> decoded;
};

/// Starts from X_T ~ N(0, I) of shape (length x h) and runs t = T..1, then
/// reads X_0 out (Direct: argmax of f; Renoise: nearest embedding). Length and
/// POS controls fix the length structurally.
TokenSequence sample(const Denoiser& model, const NoiseSchedule& schedule, int length, const ControlSpec* control,
                     const LatentClassifier* classifier, const GuidanceConfig& config, Rng& rng,
                     const MaskPlanner* planner = nullptr, SampleTrace* trace = nullptr);

/// S candidates with independent streams derive_seed(seed, i); `threads` > 1
/// generates them concurrently. Output is independent of thread count.
std::vector<TokenSequence> sample_candidates(const Denoiser& model, const NoiseSchedule& schedule, int length,
                                             const ControlSpec* control, const LatentClassifier* classifier,
                                             const GuidanceConfig& config, std::uint64_t seed, int count,
                                             int threads = 1, const MaskPlanner* planner = nullptr);

/// Length a control implies, or fallback when it leaves length free.
int control_length(const ControlSpec* control, int fallback);

using PairLoss = std::function<double(const TokenSequence& hypothesis, const TokenSequence& reference)>;

std::size_t edit_distance(std::span<const int> a, std::span<const int> b);
/// Sentence BLEU-2 (add-one smoothed bigram precision, brevity penalty).
double sentence_bleu2(const TokenSequence& hypothesis, const TokenSequence& reference);
/// 1 - BLEU-2; falls back to length-normalized edit distance when either
/// side has fewer than 2 tokens.
double bleu2_loss(const TokenSequence& hypothesis, const TokenSequence& reference);

struct MbrResult {
  std::size_t index = 0;
  std::vector<double> risk;  // expected loss per candidate
};

/// argmin_s mean_{s' != s} loss(s, s'); ties go to the lowest index.
/// Throws Error("empty") on an empty list.
MbrResult mbr_select(std::span<const TokenSequence> candidates, const PairLoss& loss = bleu2_loss);

}  // namespace mdlm
