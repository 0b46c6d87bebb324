// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mdlm/error.hpp"

namespace mdlm::inline MDLM_ABI {

std::string to_string(Objective o) { return o == Objective::CE ? "CE" : "L2"; }

Objective parse_objective(const std::string& name) {
  if (name == "CE" || name == "ce") return Objective::CE;
  if (name == "L2" || name == "l2") return Objective::L2;
  throw Error("config", "unknown objective '" + name + "'");
}

void TrainConfig::validate() const {
  if (steps < 1) throw Error("config", "steps must be positive");
  if (learning_rate < 0) throw Error("config", "learning rate must be non-negative");
  if (batch_size < 1) throw Error("config", "batch size must be positive");
  if (warmup_steps < 0 || warmup_steps > steps) throw Error("config", "warmup must be within [0, steps]");
  if (clip_norm <= 0) throw Error("config", "clip norm must be positive");
  if (weight_decay < 0) throw Error("config", "weight decay must be non-negative");
  if (log_every < 1) throw Error("config", "log_every must be positive");
  if (checkpoint_every < 0) throw Error("config", "checkpoint_every must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"steps", steps},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"warmup_steps", warmup_steps},
          {"linear_decay", linear_decay},
          {"weight_decay", weight_decay},
          {"clip_norm", clip_norm},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_eps", adam_eps},
          {"seed", seed},
          {"log_every", log_every},
          {"checkpoint_every", checkpoint_every},
          {"objective", to_string(objective)},
          {"masked_target", masked_target == MaskedTarget::FullSequence ? "full" : "masked_only"}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.linear_decay = j.value("linear_decay", c.linear_decay);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.seed = j.value("seed", c.seed);
  c.log_every = j.value("log_every", c.log_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.objective = parse_objective(j.value("objective", std::string("CE")));
  const std::string target = j.value("masked_target", std::string("full"));
  if (target == "full") {
    c.masked_target = MaskedTarget::FullSequence;
  } else if (target == "masked_only") {
    c.masked_target = MaskedTarget::MaskedOnly;
  } else {
    throw Error("config", "masked_target must be 'full' or 'masked_only'");
  }
  return c;
}

double gamma_weight(int t, int steps) {
  if (t < 1 || t > steps) throw Error("range", "gamma needs 1 <= t <= T");
  return static_cast<double>(steps - t) / static_cast<double>(steps);
}

double mean_cross_entropy(const Matrix& logits, std::span<const int> targets) {
  const Matrix lsm = ag::log_softmax_rows(logits);
  double total = 0;
  int count = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0) continue;
    total -= static_cast<double>(lsm(static_cast<Eigen::Index>(r), targets[r]));
    ++count;
  }
  return count ? total / count : 0.0;
}

BatchLoss batch_objective(ag::Graph& g, const Denoiser& model, const NoiseSchedule& schedule,
                          std::span<const BatchItem> items, Objective objective, Rng& noise_rng, Rng* dropout_rng,
                          MaskedTarget masked_target) {
  if (items.empty()) throw Error("shape", "empty batch");
  const int h = model.config().latent_dim;
  std::vector<int> ids, lengths, steps;
  for (const auto& item : items) {
    if (item.tokens == nullptr || item.tokens->ids.empty()) throw Error("shape", "batch item without tokens");
    if (item.mask.size() != item.tokens->size()) throw Error("shape", "mask/sentence length mismatch");
    if (item.t < 1 || item.t > schedule.steps()) throw Error("range", "objective needs t in [1, T]");
    ids.insert(ids.end(), item.tokens->ids.begin(), item.tokens->ids.end());
    lengths.push_back(static_cast<int>(item.tokens->size()));
    steps.push_back(item.t);
  }
  const ag::Segments segments(lengths);
  const auto rows = static_cast<Eigen::Index>(ids.size());

  std::vector<Real> signal;
  signal.reserve(ids.size());
  Matrix noise(rows, h);
  for (std::size_t s = 0; s < items.size(); ++s) {
    const NoiseDraw draw = draw_q_noise(lengths[s], h, items[s].mask, items[s].t, schedule, noise_rng);
    signal.insert(signal.end(), draw.signal.begin(), draw.signal.end());
    noise.middleRows(segments.offset(s), lengths[s]) = draw.noise;
  }

  ag::Var x0 = model.embed(g, ids);
  ag::Var xt = g.add_constant(g.scale_rows(x0, signal), noise);
  ag::Var xhat = model.transition(g, xt, segments, steps, dropout_rng);

  const Real inv_batch = Real(1) / static_cast<Real>(items.size());
  BatchLoss out;
  if (objective == Objective::CE) {
    ag::Var logits = model.project_logits(g, xhat);
    std::vector<int> masked_ids(ids.size());
    std::vector<Real> w_clean(ids.size()), w_masked(ids.size());
    for (std::size_t s = 0; s < items.size(); ++s) {
      const TokenSequence dhat = masked_sentence(*items[s].tokens, items[s].t - 1, items[s].mask);
      const double gamma = gamma_weight(items[s].t, schedule.steps());
      int masked_count = 0;
      for (int id : dhat.ids) masked_count += id == kMaskId;
      const int off = segments.offset(s), n = lengths[s];
      for (int i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(off + i);
        w_clean[r] = static_cast<Real>(gamma) * inv_batch / static_cast<Real>(n);
        if (masked_target == MaskedTarget::FullSequence) {
          masked_ids[r] = dhat.ids[static_cast<std::size_t>(i)];
          w_masked[r] = inv_batch / static_cast<Real>(n);
        } else {
          const bool is_masked = dhat.ids[static_cast<std::size_t>(i)] == kMaskId;
          masked_ids[r] = is_masked ? kMaskId : -1;
          w_masked[r] = is_masked ? inv_batch / static_cast<Real>(masked_count) : Real(0);
        }
      }
    }
    out.total = g.add(g.weighted_cross_entropy(logits, ids, w_clean),
                      g.weighted_cross_entropy(logits, masked_ids, w_masked));
    for (std::size_t s = 0; s < items.size(); ++s) {
      const int off = segments.offset(s), n = lengths[s];
      const Matrix block = logits.value().middleRows(off, n);
      LossBreakdown part;
      part.t = items[s].t;
      part.gamma = gamma_weight(items[s].t, schedule.steps());
      part.ce_clean = mean_cross_entropy(block, std::span<const int>(ids).subspan(off, n));
      part.ce_masked = mean_cross_entropy(block, std::span<const int>(masked_ids).subspan(off, n));
      part.total = part.gamma * part.ce_clean + part.ce_masked;
      out.parts.push_back(part);
    }
  } else {
    std::vector<Real> w(ids.size());
    for (std::size_t s = 0; s < items.size(); ++s)
      for (int i = 0; i < lengths[s]; ++i)
        w[static_cast<std::size_t>(segments.offset(s) + i)] = inv_batch / static_cast<Real>(lengths[s]);
    ag::Var rounding_logits = model.project_logits(g, x0);
    out.total = g.add(g.weighted_squared_error(xhat, x0, w), g.weighted_cross_entropy(rounding_logits, ids, w));
    for (std::size_t s = 0; s < items.size(); ++s) {
      const int off = segments.offset(s), n = lengths[s];
      const Matrix diff = xhat.value().middleRows(off, n) - x0.value().middleRows(off, n);
      out.l2_parts.push_back(static_cast<double>(diff.squaredNorm()) / static_cast<double>(diff.size()));
      out.rounding_parts.push_back(
          mean_cross_entropy(rounding_logits.value().middleRows(off, n), std::span<const int>(ids).subspan(off, n)));
    }
  }
  return out;
}

LossBreakdown diffusion_ce_loss(const TokenSequence& d, int t, const Denoiser& model, const NoiseSchedule& schedule,
                                const MaskState& mask, Rng& rng, MaskedTarget masked_target) {
  ag::Graph g(false);
  const BatchItem item{&d, mask, t};
  const BatchLoss loss =
      batch_objective(g, model, schedule, std::span<const BatchItem>(&item, 1), Objective::CE, rng, nullptr,
                      masked_target);
  const LossBreakdown& part = loss.parts.front();
  if (!std::isfinite(part.total)) throw Error("non_finite", "diffusion loss is not finite");
  return part;
}

double l2_loss(const TokenSequence& d, int t, const Denoiser& model, const NoiseSchedule& schedule,
               const MaskState& mask, Rng& rng) {
  ag::Graph g(false);
  const BatchItem item{&d, mask, t};
  const BatchLoss loss =
      batch_objective(g, model, schedule, std::span<const BatchItem>(&item, 1), Objective::L2, rng, nullptr);
  const double value = loss.l2_parts.front();
  if (!std::isfinite(value)) throw Error("non_finite", "l2 loss is not finite");
  return value;
}

AdamW::AdamW(std::vector<ag::Parameter*> params, double beta1, double beta2, double eps, double weight_decay)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
  for (const auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
    v_.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
  }
}

void AdamW::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto b1 = static_cast<Real>(beta1_), b2 = static_cast<Real>(beta2_);
  const auto step_size = static_cast<Real>(lr / c1);
  const auto inv_c2 = static_cast<Real>(1.0 / c2);
  const auto eps = static_cast<Real>(eps_);
  const auto decay = static_cast<Real>(lr * weight_decay_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Matrix& w = params_[i]->value();
    const Matrix& g = params_[i]->grad();
    m_[i] = b1 * m_[i] + (Real(1) - b1) * g;
    v_[i] = b2 * v_[i] + (Real(1) - b2) * g.cwiseAbs2();
    if (decay != Real(0)) w -= decay * w;
    w.array() -= step_size * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
  }
}

double clip_grad_norm(const std::vector<ag::Parameter*>& params, double max_norm) {
  double sq = 0;
  for (auto* p : params) sq += static_cast<double>(p->grad().squaredNorm());
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const auto factor = static_cast<Real>(max_norm / norm);
    for (auto* p : params) p->grad() *= factor;
  }
  return norm;
}

double learning_rate_at(int step, const TrainConfig& config) {
  const double peak = config.learning_rate;
  if (config.warmup_steps > 0 && step <= config.warmup_steps)
    return peak * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
  if (!config.linear_decay) return peak;
  const double remaining = static_cast<double>(config.steps - step + 1);
  const double span = static_cast<double>(config.steps - config.warmup_steps + 1);
  return peak * std::max(0.0, remaining / span);
}

nlohmann::json MetricRow::to_json() const {
  nlohmann::json j{{"step", step}, {"loss", loss}, {"lr", lr}, {"grad_norm", grad_norm}};
  for (const auto& [k, v] : terms) j[k] = v;
  return j;
}

TrainResult train(Denoiser& model, const Corpus& corpus, const MaskPlanner& planner, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  if (corpus.empty()) throw Error("empty_corpus", "cannot train on an empty corpus");
  const NoiseSchedule schedule = planner.schedule().build();
  if (schedule.steps() != model.config().steps)
    throw Error("config", "schedule T differs from the model's timestep table");

  Rng batch_rng(derive_seed(config.seed, 0));
  Rng noise_rng(derive_seed(config.seed, 1));
  Rng dropout_rng(derive_seed(config.seed, 2));
  Rng* dropout = model.config().dropout > 0 ? &dropout_rng : nullptr;

  const bool fixed_plans = planner.strategy() != NoiseStrategy::RandomMask;
  std::vector<MaskState> plans;
  if (fixed_plans)
    for (std::size_t i = 0; i < corpus.size(); ++i) plans.push_back(planner.plan(corpus.sentence(i), i, 0));

  auto params = model.parameters();
  AdamW optimizer(params, config.adam_beta1, config.adam_beta2, config.adam_eps, config.weight_decay);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), batch_rng);
  std::size_t cursor = 0;
  int epoch = 0;
  std::uniform_int_distribution<int> step_dist(1, schedule.steps());

  TrainResult result;
  for (int step = 1; step <= config.steps; ++step) {
    std::vector<BatchItem> items;
    items.reserve(static_cast<std::size_t>(config.batch_size));
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), batch_rng);
        cursor = 0;
        ++epoch;
      }
      const std::size_t idx = order[cursor++];
      const TokenSequence& d = corpus.sentence(idx);
      items.push_back({&d, fixed_plans ? plans[idx] : planner.plan(d, idx, epoch), step_dist(batch_rng)});
    }

    ag::Graph g;
    const BatchLoss loss = batch_objective(g, model, schedule, items, config.objective, noise_rng, dropout,
                                           config.masked_target);
    const double value = loss.total.scalar();
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << " (lr " << learning_rate_at(step, config) << ")";
      throw Error("diverged", msg.str());
    }
    optimizer.zero_grad();
    g.backward(loss.total);
    const double norm = clip_grad_norm(params, config.clip_norm);
    if (!std::isfinite(norm)) throw Error("diverged", "non-finite gradient at step " + std::to_string(step));
    const double lr = learning_rate_at(step, config);
    optimizer.step(lr);

    if (step == 1 || step == config.steps || step % config.log_every == 0) {
      MetricRow row{step, value, lr, norm, {}};
      const double inv = 1.0 / static_cast<double>(items.size());
      if (config.objective == Objective::CE) {
        double clean = 0, masked = 0;
        for (const auto& p : loss.parts) {
          clean += p.gamma * p.ce_clean * inv;
          masked += p.ce_masked * inv;
        }
        row.terms = {{"weighted_clean", clean}, {"ce_masked", masked}};
        // Logged in double from the per-sequence terms, so the decomposition
        // holds exactly in the log whatever the training precision.
        row.loss = clean + masked;
      } else {
        row.terms = {{"l2", std::accumulate(loss.l2_parts.begin(), loss.l2_parts.end(), 0.0) * inv},
                     {"rounding", std::accumulate(loss.rounding_parts.begin(), loss.rounding_parts.end(), 0.0) * inv}};
      }
      if (hooks.metrics_jsonl) *hooks.metrics_jsonl << row.to_json().dump() << '\n';
      result.metrics.push_back(std::move(row));
    }
    if (hooks.checkpoint && config.checkpoint_every > 0 && step % config.checkpoint_every == 0 &&
        step != config.steps)
      hooks.checkpoint(step);
  }
  if (hooks.checkpoint) hooks.checkpoint(config.steps);

  const std::size_t n = result.metrics.size();
  const std::size_t head = std::min<std::size_t>(n, 10);
  double first = 0;
  for (std::size_t i = 0; i < head; ++i) first += result.metrics[i].loss;
  result.initial_loss = head ? first / static_cast<double>(head) : 0.0;
  result.final_loss = tail_mean_loss(result, 50);
  return result;
}

double tail_mean_loss(const TrainResult& result, std::size_t window) {
  const std::size_t n = result.metrics.size();
  const std::size_t k = std::min(n, window);
  double total = 0;
  for (std::size_t i = n - k; i < n; ++i) total += result.metrics[i].loss;
  return k ? total / static_cast<double>(k) : 0.0;
}

}  // namespace mdlm
