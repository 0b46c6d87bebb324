// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Diffusion objectives and the optimization loop.
//
// For a sentence d diffused to step t the CE objective is
//     L_t = gamma_t * CE(f(X_hat_{t-1}), d) + CE(f(X_hat_{t-1}), d_hat_{t-1}),
//     gamma_t = (T - t) / T,
// where d_hat_{t-1} is d with every token already soft-masked at t-1
// replaced by MASK. The L2 ablation regresses X_hat_{t-1} onto X_0.

#pragma once

#include "mdlm/abi.hpp"

#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdlm/autograd.hpp"
#include "mdlm/corpus.hpp"
#include "mdlm/denoiser.hpp"
#include "mdlm/schedule.hpp"
#include "mdlm/strategy.hpp"

namespace mdlm::inline MDLM_ABI {

enum class Objective { CE, L2 };
std::string to_string(Objective o);
Objective parse_objective(const std::string& name);

/// Which positions the CE-vs-masked-sentence term covers.
enum class MaskedTarget {
  FullSequence,  // every position, MASK where soft-masked
  MaskedOnly,    // only positions that are MASK in d_hat_{t-1}
};

struct TrainConfig {
  int steps = 20000;
  double learning_rate = 3e-4;
  int batch_size = 32;
  int warmup_steps = 1000;
  bool linear_decay = true;  // decay to 0 after warmup
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int log_every = 1;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  Objective objective = Objective::CE;
  MaskedTarget masked_target = MaskedTarget::FullSequence;

  /// Throws Error("config") unless every field is in range and warmup <= steps.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossBreakdown {
  double total = 0;
  double ce_clean = 0;   // token-mean CE against d
  double ce_masked = 0;  // token-mean CE against d_hat_{t-1}
  double gamma = 0;
  int t = 0;
};

/// (T - t) / T for 1 <= t <= T.
double gamma_weight(int t, int steps);

/// One sentence of a packed training batch.
struct BatchItem {
  const TokenSequence* tokens = nullptr;
  MaskState mask;
  int t = 1;
};

struct BatchLoss {
  ag::Var total;
  std::vector<LossBreakdown> parts;     // CE objective, per item
  std::vector<double> l2_parts;         // L2 objective, per item
  std::vector<double> rounding_parts;   // L2 objective decoder CE, per item
};

/// Batch objective on a graph. The batch value is the mean over items.
/// Noise draws come from noise_rng in item order; dropout_rng == nullptr
/// disables dropout. The L2 objective adds the decoder CE on X_0 so f(.) is
/// trained and the embedding cannot collapse.
BatchLoss batch_objective(ag::Graph& g, const Denoiser& model, const NoiseSchedule& schedule,
                          std::span<const BatchItem> items, Objective objective, Rng& noise_rng, Rng* dropout_rng,
                          MaskedTarget masked_target = MaskedTarget::FullSequence);

/// Throws Error("non_finite") if the loss is not finite.
LossBreakdown diffusion_ce_loss(const TokenSequence& d, int t, const Denoiser& model, const NoiseSchedule& schedule,
                                const MaskState& mask, Rng& rng,
                                MaskedTarget masked_target = MaskedTarget::FullSequence);
double l2_loss(const TokenSequence& d, int t, const Denoiser& model, const NoiseSchedule& schedule,
               const MaskState& mask, Rng& rng);

/// Token-mean cross-entropy of logits rows against target ids; negative
/// targets are skipped.
double mean_cross_entropy(const Matrix& logits, std::span<const int> targets);

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(std::vector<ag::Parameter*> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
        double weight_decay = 0.0);
  void step(double lr);
  void zero_grad();
  const std::vector<ag::Parameter*>& params() const { return params_; }

 private:
  std::vector<ag::Parameter*> params_;
  std::vector<Matrix> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  long long t_ = 0;
};

/// Rescales all gradients so their global L2 norm is at most max_norm;
/// returns the norm before clipping.
double clip_grad_norm(const std::vector<ag::Parameter*>& params, double max_norm);

/// Linear warmup to the peak rate, then linear decay to zero if enabled.
double learning_rate_at(int step, const TrainConfig& config);

struct MetricRow {
  int step = 0;
  double loss = 0;
  double lr = 0;
  double grad_norm = 0;
  std::map<std::string, double> terms;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<MetricRow> metrics;
  double initial_loss = 0;
  double final_loss = 0;
};

struct TrainHooks {
  std::ostream* metrics_jsonl = nullptr;  // one MetricRow per logged step
  std::function<void(int step)> checkpoint;
};

/// Minibatch training with per-sequence t ~ U{1..T}. Throws Error("diverged")
/// with diagnostics on a non-finite loss or gradient.
TrainResult train(Denoiser& model, const Corpus& corpus, const MaskPlanner& planner, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Mean of the last `window` logged losses (smooths minibatch noise).
double tail_mean_loss(const TrainResult& result, std::size_t window);

}  // namespace mdlm
