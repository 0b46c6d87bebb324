// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mdlm/error.hpp"

namespace mdlm::inline MDLM_ABI {

NoiseSchedule NoiseSchedule::make(int steps, double s, double eps) {
  if (steps < 1) throw Error("config", "schedule needs T >= 1");
  if (!(s > 0.0 && s < 1.0)) throw Error("config", "schedule needs 0 < s < 1");
  if (!(eps > 0.0 && eps < 1.0 - std::sqrt(s))) throw Error("config", "schedule needs 0 < eps < 1 - sqrt(s)");
  NoiseSchedule sched;
  sched.steps_ = steps;
  sched.s_ = s;
  sched.eps_ = eps;
  sched.alpha_bar_.resize(static_cast<std::size_t>(steps) + 1);
  for (int t = 0; t <= steps; ++t) {
    const double raw = 1.0 - std::sqrt(static_cast<double>(t) / steps + s);
    sched.alpha_bar_[t] = std::clamp(raw, eps, 1.0);
  }
  sched.beta_.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int t = 1; t <= steps; ++t) {
    const double b = 1.0 - sched.alpha_bar_[t] / sched.alpha_bar_[t - 1];
    if (!(b > 0.0 && b < 1.0))
      throw Error("config", "schedule yields beta outside (0,1) at t=" + std::to_string(t) + "; lower eps or T");
    sched.beta_[t] = b;
  }
  return sched;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps_) throw Error("range", "alpha_bar step out of range");
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps_) throw Error("range", "beta step out of range");
  return beta_[static_cast<std::size_t>(t)];
}

nlohmann::json NoiseSchedule::to_json() const { return {{"T", steps_}, {"s", s_}, {"eps", eps_}}; }

nlohmann::json ScheduleConfig::to_json() const {
  return {{"T", steps}, {"s", s}, {"eps", eps}, {"m", buckets},
          {"staging", staging == StagingMode::Cumulative ? "cumulative" : "windowed"}};
}

ScheduleConfig ScheduleConfig::from_json(const nlohmann::json& j) {
  ScheduleConfig c;
  c.steps = j.value("T", c.steps);
  c.s = j.value("s", c.s);
  c.eps = j.value("eps", c.eps);
  c.buckets = j.value("m", c.buckets);
  const std::string staging = j.value("staging", std::string("cumulative"));
  if (staging == "cumulative") {
    c.staging = StagingMode::Cumulative;
  } else if (staging == "windowed") {
    c.staging = StagingMode::Windowed;
  } else {
    throw Error("config", "unknown staging mode '" + staging + "'");
  }
  if (c.buckets < 1) throw Error("config", "bucket count m must be >= 1");
  return c;
}

int bucket_start_step(int bucket, int steps, int buckets) {
  return static_cast<int>((static_cast<long long>(bucket - 1) * steps) / buckets) + 1;
}

MaskState make_mask_state(const BucketAssignment& buckets, int steps, StagingMode mode) {
  MaskState state;
  for (int b : buckets.bucket) {
    state.activation.push_back(bucket_start_step(b, steps, buckets.buckets) - 1);
    const int end = (mode == StagingMode::Cumulative || b >= buckets.buckets)
                        ? steps
                        : bucket_start_step(b + 1, steps, buckets.buckets) - 1;
    state.deactivation.push_back(std::max(end, state.activation.back() + 1));
  }
  return state;
}

MaskState uniform_mask_state(std::size_t length, int steps) {
  return MaskState{std::vector<int>(length, 0), std::vector<int>(length, steps)};
}

std::vector<double> retention(const MaskState& mask, int t, const NoiseSchedule& schedule) {
  std::vector<double> r(mask.size(), 1.0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const int a = mask.activation[i];
    if (a < t) r[i] = schedule.alpha_bar(std::min(t, mask.deactivation[i])) / schedule.alpha_bar(a);
  }
  return r;
}

LatentSequence forward_step(const LatentSequence& x, int t, const MaskState& mask, const NoiseSchedule& schedule,
                            Rng& rng) {
  if (t < 0 || t >= schedule.steps()) throw Error("range", "forward_step needs 0 <= t < T");
  if (static_cast<std::size_t>(x.values.rows()) != mask.size()) throw Error("shape", "mask/latent length mismatch");
  LatentSequence out{x.values, t + 1};
  const double beta = schedule.beta(t + 1);
  const Real keep = static_cast<Real>(std::sqrt(1.0 - beta));
  const Real noise = static_cast<Real>(std::sqrt(beta));
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (mask.activation[k] <= t && t < mask.deactivation[k])
      out.values.row(i) = keep * x.values.row(i) + noise * normal_matrix(1, x.values.cols(), rng);
  }
  return out;
}

NoiseDraw draw_q_noise(Eigen::Index rows, Eigen::Index cols, const MaskState& mask, int t,
                       const NoiseSchedule& schedule, Rng& rng) {
  if (t < 0 || t > schedule.steps()) throw Error("range", "q_sample needs 0 <= t <= T");
  if (static_cast<std::size_t>(rows) != mask.size()) throw Error("shape", "mask/latent length mismatch");
  const auto r = retention(mask, t, schedule);
  NoiseDraw draw{std::vector<Real>(r.size(), Real(1)), Matrix::Zero(rows, cols)};
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double ri = r[static_cast<std::size_t>(i)];
    if (ri < 1.0) {
      draw.signal[static_cast<std::size_t>(i)] = static_cast<Real>(std::sqrt(ri));
      draw.noise.row(i) = static_cast<Real>(std::sqrt(1.0 - ri)) * normal_matrix(1, cols, rng);
    }
  }
  return draw;
}

LatentSequence q_sample(const LatentSequence& x0, int t, const MaskState& mask, const NoiseSchedule& schedule,
                        Rng& rng) {
  const NoiseDraw draw = draw_q_noise(x0.values.rows(), x0.values.cols(), mask, t, schedule, rng);
  LatentSequence out{x0.values, t};
  for (Eigen::Index i = 0; i < out.values.rows(); ++i)
    out.values.row(i) = draw.signal[static_cast<std::size_t>(i)] * x0.values.row(i) + draw.noise.row(i);
  return out;
}

TokenSequence masked_sentence(const TokenSequence& d, int t, const MaskState& mask) {
  if (d.size() != mask.size()) throw Error("shape", "mask/sentence length mismatch");
  TokenSequence out = d;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (mask.activation[i] < t) out.ids[i] = kMaskId;
  return out;
}

}  // namespace mdlm
