// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mdlm/error.hpp"
#include "mdlm/schedule.hpp"
#include "mdlm/strategy.hpp"
#include "mdlm/training.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/models.hpp"

using namespace mdlm;
using mdlm::testing::find_parameter;
using mdlm::testing::make_corpus;
using mdlm::testing::micro_config;

namespace {

constexpr bool kWide = sizeof(Real) == 8;

const std::vector<std::string> kSentences = {"the cat sat on the mat .", "a dog ran far .", "the bird sang ."};

/// Token-mean CE of one logits row block, computed in double with a plain
/// log-sum-exp. Negative targets are skipped.
double scalar_ce(const Matrix& logits, const std::vector<int>& targets) {
  double total = 0;
  int n = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = targets[static_cast<std::size_t>(r)];
    if (y < 0) continue;
    double mx = -1e300;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) mx = std::max(mx, static_cast<double>(logits(r, c)));
    double z = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<double>(logits(r, c)) - mx);
    total += mx + std::log(z) - static_cast<double>(logits(r, y));
    ++n;
  }
  return n ? total / n : 0.0;
}

struct Setup {
  mdlm::testing::TextCorpus text = make_corpus(kSentences);
  ScheduleConfig sc = [] {
    ScheduleConfig c;
    c.steps = 30;
    return c;
  }();
  NoiseSchedule schedule = sc.build();
  MaskPlanner planner{NoiseStrategy::MaskEntropyRel, text.corpus, sc};
  Denoiser model{micro_config(text.vocab.size(), 30), 4};
};

}  // namespace

TEST_CASE("gamma weights") {
  CHECK(gamma_weight(500, 500) == 0.0);
  CHECK(gamma_weight(250, 500) == 0.5);
  CHECK(gamma_weight(1, 500) == doctest::Approx(0.998));
  for (int t = 2; t <= 500; ++t) CHECK(gamma_weight(t, 500) < gamma_weight(t - 1, 500));
  CHECK_THROWS_AS(gamma_weight(0, 500), Error);
  CHECK_THROWS_AS(gamma_weight(501, 500), Error);
}

TEST_CASE("loss breakdown decomposes and matches an independent scalar recomputation") {
  Setup s;
  for (std::size_t k = 0; k < s.text.corpus.size(); ++k) {
    const TokenSequence& d = s.text.corpus.sentence(k);
    const MaskState mask = s.planner.plan(d, k);
    for (int t : {1, 9, 17, 30}) {
      Rng rng(77);
      const LossBreakdown b = diffusion_ce_loss(d, t, s.model, s.schedule, mask, rng);
      CHECK(b.t == t);
      CHECK(b.gamma == gamma_weight(t, 30));
      CHECK(b.total == doctest::Approx(b.gamma * b.ce_clean + b.ce_masked).epsilon(1e-12));
      CHECK(b.ce_clean >= 0);
      CHECK(b.ce_masked >= 0);

      // Same noise stream, value path, scalar CE.
      Rng replay(77);
      const NoiseDraw draw = draw_q_noise(static_cast<Eigen::Index>(d.size()), 6, mask, t, s.schedule, replay);
      LatentSequence xt = s.model.embed(d);
      for (Eigen::Index i = 0; i < xt.values.rows(); ++i)
        xt.values.row(i) = draw.signal[static_cast<std::size_t>(i)] * xt.values.row(i) + draw.noise.row(i);
      const Matrix logits = s.model.project_logits(s.model.transition(xt, t));
      const double tol = kWide ? 1e-10 : 1e-4;
      CHECK(std::abs(b.ce_clean - scalar_ce(logits, d.ids)) <= tol);
      CHECK(std::abs(b.ce_masked - scalar_ce(logits, masked_sentence(d, t - 1, mask).ids)) <= tol);
    }
  }
}

TEST_CASE("uniform logits give ln V for both terms") {
  Setup s;
  find_parameter(s.model, "logits.weight")->value().setZero();
  find_parameter(s.model, "logits.bias")->value().setZero();
  const double ln_v = std::log(static_cast<double>(s.text.vocab.size()));
  const TokenSequence& d = s.text.corpus.sentence(0);
  for (int t : {1, 15, 30}) {
    Rng rng(1);
    const LossBreakdown b = diffusion_ce_loss(d, t, s.model, s.schedule, s.planner.plan(d), rng);
    CHECK(std::abs(b.ce_clean - ln_v) <= 1e-6);
    CHECK(std::abs(b.ce_masked - ln_v) <= 1e-6);
  }
}

TEST_CASE("at t = T the objective is CE against the all-MASK target") {
  Setup s;
  const TokenSequence& d = s.text.corpus.sentence(1);
  const MaskState mask = s.planner.plan(d, 1);
  Rng rng(3);
  const LossBreakdown b = diffusion_ce_loss(d, 30, s.model, s.schedule, mask, rng);
  CHECK(b.gamma == 0.0);
  CHECK(b.total == doctest::Approx(b.ce_masked).epsilon(1e-12));
}

TEST_CASE("masked-only target weighting differs from the full-sequence target") {
  Setup s;
  const TokenSequence& d = s.text.corpus.sentence(0);
  const MaskState mask = s.planner.plan(d, 0);
  Rng a(5), b(5);
  const LossBreakdown full = diffusion_ce_loss(d, 12, s.model, s.schedule, mask, a, MaskedTarget::FullSequence);
  const LossBreakdown only = diffusion_ce_loss(d, 12, s.model, s.schedule, mask, b, MaskedTarget::MaskedOnly);
  CHECK(full.ce_clean == only.ce_clean);
  CHECK(full.ce_masked != only.ce_masked);
}

TEST_CASE("l2 loss matches an independent mean squared error") {
  Setup s;
  const TokenSequence& d = s.text.corpus.sentence(2);
  const MaskState mask = s.planner.plan(d, 2);
  Rng rng(8);
  const double l2 = l2_loss(d, 11, s.model, s.schedule, mask, rng);
  Rng replay(8);
  const NoiseDraw draw = draw_q_noise(static_cast<Eigen::Index>(d.size()), 6, mask, 11, s.schedule, replay);
  const LatentSequence x0 = s.model.embed(d);
  LatentSequence xt = x0;
  for (Eigen::Index i = 0; i < xt.values.rows(); ++i)
    xt.values.row(i) = draw.signal[static_cast<std::size_t>(i)] * x0.values.row(i) + draw.noise.row(i);
  const Matrix diff = s.model.transition(xt, 11).values - x0.values;
  double mse = 0;
  for (Eigen::Index i = 0; i < diff.size(); ++i) mse += std::pow(static_cast<double>(diff.data()[i]), 2);
  mse /= static_cast<double>(diff.size());
  CHECK(l2 == doctest::Approx(mse).epsilon(kWide ? 1e-10 : 1e-4));
  CHECK(l2 >= 0);
}

TEST_CASE("objective gradients match finite differences on the micro-model") {
  Setup s;
  const TokenSequence& d = s.text.corpus.sentence(0);
  const MaskState mask = s.planner.plan(d, 0);
  const double tol = kWide ? 1e-6 : 2e-2;
  for (Objective objective : {Objective::CE, Objective::L2}) {
    CAPTURE(to_string(objective));
    auto params = s.model.parameters();
    for (Parameter* p : params) p->zero_grad();
    {
      Graph g;
      Rng rng(21);
      const BatchItem item{&d, mask, 13};
      const BatchLoss loss = batch_objective(g, s.model, s.schedule, std::span<const BatchItem>(&item, 1), objective,
                                             rng, nullptr);
      g.backward(loss.total);
    }
    const auto f = [&] {
      Graph g(false);
      Rng rng(21);
      const BatchItem item{&d, mask, 13};
      return static_cast<double>(
          batch_objective(g, s.model, s.schedule, std::span<const BatchItem>(&item, 1), objective, rng, nullptr)
              .total.scalar());
    };
    Rng pick(2);
    for (const char* name : {"embedding.table", "in_proj.weight", "block1.qkv.weight", "timestep", "logits.weight"}) {
      Parameter* p = find_parameter(s.model, name);
      REQUIRE(p != nullptr);
      CAPTURE(name);
      const Matrix grad = p->grad();
      const auto coords = mdlm::testing::pick_coordinates(grad, 6, pick);
      const auto r = mdlm::testing::check_gradient(p->value(), grad, f, coords);
      CHECK(r.max_rel_error <= tol);
    }
  }
}

TEST_CASE("learning-rate schedule: linear warmup then linear decay") {
  TrainConfig c;
  c.steps = 100;
  c.warmup_steps = 10;
  c.learning_rate = 1.0;
  CHECK(learning_rate_at(5, c) == doctest::Approx(0.5));
  CHECK(learning_rate_at(10, c) == doctest::Approx(1.0));
  CHECK(learning_rate_at(11, c) == doctest::Approx(90.0 / 91.0));
  CHECK(learning_rate_at(100, c) == doctest::Approx(1.0 / 91.0));
  c.linear_decay = false;
  CHECK(learning_rate_at(80, c) == 1.0);
}

TEST_CASE("train config validation and json round trip") {
  TrainConfig c;
  c.steps = 10;
  c.warmup_steps = 11;
  CHECK_THROWS_AS(c.validate(), Error);
  c.warmup_steps = 2;
  c.objective = Objective::L2;
  c.masked_target = MaskedTarget::MaskedOnly;
  const TrainConfig d = TrainConfig::from_json(c.to_json());
  CHECK(d.to_json() == c.to_json());
  CHECK(parse_objective("ce") == Objective::CE);
  CHECK(parse_objective("l2") == Objective::L2);
  CHECK_THROWS_AS(parse_objective("hinge"), Error);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Setup s;
  std::vector<Matrix> before;
  for (const Parameter* p : s.model.parameters()) before.push_back(p->value());
  TrainConfig c;
  c.steps = 5;
  c.warmup_steps = 0;
  c.batch_size = 2;
  c.learning_rate = 0.0;
  train(s.model, s.text.corpus, s.planner, c);
  const auto after = s.model.parameters();
  for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i]->value() == before[i]);
}

TEST_CASE("training is deterministic, logs the loss identity and lowers the loss") {
  TrainConfig c;
  c.steps = 60;
  c.warmup_steps = 5;
  c.batch_size = 3;
  c.learning_rate = 3e-3;
  c.seed = 9;
  std::ostringstream log_a, log_b;
  Setup a, b;
  const TrainResult ra = train(a.model, a.text.corpus, a.planner, c, {&log_a, {}});
  const TrainResult rb = train(b.model, b.text.corpus, b.planner, c, {&log_b, {}});
  CHECK(log_a.str() == log_b.str());
  REQUIRE(ra.metrics.size() == 60);
  for (const MetricRow& row : ra.metrics) {
    CHECK(row.loss == doctest::Approx(row.terms.at("weighted_clean") + row.terms.at("ce_masked")).epsilon(1e-9));
    CHECK(row.lr >= 0);
  }
  CHECK(ra.final_loss < ra.initial_loss);
  CHECK(ra.metrics.front().to_json().contains("lr"));
}

TEST_CASE("training rejects a schedule that disagrees with the model") {
  Setup s;
  ScheduleConfig other = s.sc;
  other.steps = 31;
  const MaskPlanner planner(NoiseStrategy::MaskEntropyRel, s.text.corpus, other);
  TrainConfig c;
  c.steps = 1;
  c.warmup_steps = 0;
  CHECK_THROWS_AS(train(s.model, s.text.corpus, planner, c), Error);
}

TEST_CASE("AdamW minimizes a quadratic and gradient clipping bounds the norm") {
  Parameter w("w", Matrix::Constant(1, 3, Real(2)));
  AdamW opt({&w});
  for (int k = 0; k < 500; ++k) {
    opt.zero_grad();
    Graph g;
    g.backward(g.sum_squares(g.param(w)));
    opt.step(0.05);
  }
  CHECK(w.value().cwiseAbs().maxCoeff() < Real(0.05));

  Parameter v("v", Matrix::Zero(1, 2));
  v.grad() = Matrix::Constant(1, 2, Real(3));
  const double norm = clip_grad_norm({&v}, 1.0);
  CHECK(norm == doctest::Approx(std::sqrt(18.0)));
  CHECK(static_cast<double>(v.grad().norm()) == doctest::Approx(1.0).epsilon(1e-5));
}
