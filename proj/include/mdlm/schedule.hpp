// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Square-root noise schedule and the bucket-staged forward corruption.
//
// The schedule defines the cumulative retention
//     alpha_bar(t) = clamp(1 - sqrt(t/T + s), eps, 1),   t = 0..T
// and per-step noise beta(t) = 1 - alpha_bar(t)/alpha_bar(t-1). Token i stays
// clean through its activation step a_i and is diffused afterwards, so its
// retention at step t is alpha_bar(t)/alpha_bar(a_i).

#pragma once

#include "mdlm/abi.hpp"

#include <vector>

#include <json.hpp>

#include "mdlm/corpus.hpp"
#include "mdlm/importance.hpp"
#include "mdlm/random.hpp"
#include "mdlm/real.hpp"

namespace mdlm::inline MDLM_ABI {

class NoiseSchedule {
 public:
  /// Requires T >= 1, 0 < s < 1, 0 < eps < 1 - sqrt(s); throws Error("config").
  static NoiseSchedule make(int steps, double s = 1e-4, double eps = 1e-5);

  int steps() const { return steps_; }
  double s() const { return s_; }
  double eps() const { return eps_; }
  /// t in [0, T].
  double alpha_bar(int t) const;
  /// t in [1, T].
  double beta(int t) const;

  nlohmann::json to_json() const;

 private:
  int steps_ = 0;
  double s_ = 0;
  double eps_ = 0;
  std::vector<double> alpha_bar_;
  std::vector<double> beta_;  // beta_[0] unused
};

/// Cumulative: an activated token keeps diffusing until T. Windowed: it is
/// diffused only during its own bucket's step window (ablation).
enum class StagingMode { Cumulative, Windowed };

/// Everything a checkpoint needs to rebuild the forward process.
struct ScheduleConfig {
  int steps = 500;
  double s = 1e-4;
  double eps = 1e-5;
  int buckets = 3;
  StagingMode staging = StagingMode::Cumulative;

  NoiseSchedule build() const { return NoiseSchedule::make(steps, s, eps); }
  nlohmann::json to_json() const;
  static ScheduleConfig from_json(const nlohmann::json& j);
};

/// Per-token step window: the token is clean through `activation` and
/// receives noise at steps activation+1 .. deactivation.
struct MaskState {
  std::vector<int> activation;
  std::vector<int> deactivation;

  std::size_t size() const { return activation.size(); }
};

/// First diffusion step of bucket b (1-based): floor((b-1) T / m) + 1.
int bucket_start_step(int bucket, int steps, int buckets);

MaskState make_mask_state(const BucketAssignment& buckets, int steps, StagingMode mode = StagingMode::Cumulative);
/// Every token active from step 1 (plain Gaussian diffusion, no staging).
MaskState uniform_mask_state(std::size_t length, int steps);

struct LatentSequence {
  Matrix values;  // l x h
  int step = 0;
};

/// Retention r_i(t) = alpha_bar(min(t, end_i)) / alpha_bar(a_i) for tokens with
/// a_i < t, else 1.
std::vector<double> retention(const MaskState& mask, int t, const NoiseSchedule& schedule);

/// Noise for X_t = signal_i * x0_i + noise_i, drawn row by row for the
/// tokens with r_i < 1 (signal = sqrt(r), noise ~ sqrt(1 - r) N(0, I)).
struct NoiseDraw {
  std::vector<Real> signal;
  Matrix noise;
};
NoiseDraw draw_q_noise(Eigen::Index rows, Eigen::Index cols, const MaskState& mask, int t,
                       const NoiseSchedule& schedule, Rng& rng);

/// One forward transition t -> t+1. Requires 0 <= t < T (Error("range")).
LatentSequence forward_step(const LatentSequence& x, int t, const MaskState& mask, const NoiseSchedule& schedule,
                            Rng& rng);

/// Samples X_t directly from X_0. Requires 0 <= t <= T.
LatentSequence q_sample(const LatentSequence& x0, int t, const MaskState& mask, const NoiseSchedule& schedule,
                        Rng& rng);

/// d with every token whose noising has begun by step t (a_i < t) replaced by MASK.
TokenSequence masked_sentence(const TokenSequence& d, int t, const MaskState& mask);

}  // namespace mdlm
