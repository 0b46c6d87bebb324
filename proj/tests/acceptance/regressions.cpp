// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Desk-scale regressions on the 50-sentence toy corpus: overfitting and
// reconstruction by sampling, the easy-first decoding order, structural
// length control and the ablation sweep's reproducibility.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "harness.hpp"
#include "mdlm/checkpoint.hpp"
#include "mdlm/eval.hpp"
#include "mdlm/guidance.hpp"
#include "mdlm/hash.hpp"
#include "mdlm/importance.hpp"
#include "mdlm/strategy.hpp"
#include "mdlm/training.hpp"

namespace mdlm_acceptance {
namespace {

using namespace mdlm;

// ---------------------------------------------------------------------------
// The overfit model shared by criteria 7-9.

constexpr int kOverfitSteps = 2000;
constexpr int kCandidates = 5;

struct OverfitModel {
  Vocabulary vocab;
  Corpus corpus;
  ScheduleConfig schedule;
  std::optional<MaskPlanner> planner;
  std::optional<Denoiser> model;
  double initial_loss = 0;
  double final_loss = 0;
  std::string origin;  // "trained in N s" or "cached"
};

ScheduleConfig overfit_schedule() {
  ScheduleConfig sc;
  sc.steps = 100;
  return sc;
}

DenoiserConfig overfit_denoiser(int vocab_size, int steps) {
  DenoiserConfig c;
  c.vocab_size = vocab_size;
  c.latent_dim = 8;  // small latents sample markedly better on the toy corpus
  c.width = 64;
  c.layers = 4;
  c.heads = 4;
  c.dropout = 0.0;
  c.steps = steps;
  return c;
}

TrainConfig overfit_training() {
  TrainConfig tc;
  tc.steps = kOverfitSteps;
  tc.batch_size = 32;
  tc.learning_rate = 2e-3;
  tc.warmup_steps = 100;
  tc.log_every = 1;
  tc.seed = 1;
  tc.objective = Objective::CE;
  return tc;
}

const OverfitModel& overfit_model(const Context& ctx) {
  static std::unique_ptr<OverfitModel> cached;
  if (cached) return *cached;
  auto m = std::make_unique<OverfitModel>();
  m->vocab = Vocabulary::build(read_jsonl_texts(ctx.data_dir / "toy50.jsonl"));
  m->corpus = Corpus::load(ctx.data_dir / "toy50.jsonl", m->vocab);
  m->schedule = overfit_schedule();
  m->planner.emplace(NoiseStrategy::MaskEntropyRel, m->corpus, m->schedule);
  const DenoiserConfig mc = overfit_denoiser(m->vocab.size(), m->schedule.steps);
  const TrainConfig tc = overfit_training();

  const nlohmann::json key = {{"model", mc.to_json()},         {"schedule", m->schedule.to_json()},
                              {"train", tc.to_json()},         {"vocab", m->vocab.hash()},
                              {"strategy", "MaskEntropyRel"},  {"real", kRealName}};
  const std::filesystem::path path = ctx.cache_dir / ("overfit_" + config_hash(key) + ".ckpt");
  if (std::filesystem::exists(path)) {
    ModelBundle bundle = load_model(path);
    m->model.emplace(std::move(bundle.model));
    m->initial_loss = bundle.header.at("initial_loss").get<double>();
    m->final_loss = bundle.header.at("final_loss").get<double>();
    m->origin = "cached";
  } else {
    const auto start = std::chrono::steady_clock::now();
    m->model.emplace(mc, 1);
    const TrainResult result = train(*m->model, m->corpus, *m->planner, tc);
    m->initial_loss = result.initial_loss;
    m->final_loss = result.final_loss;
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m->origin = "trained in " + fmt(seconds, 3) + " s";
    // Write then rename so concurrent runs never read a partial file.
    const std::filesystem::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
    save_model(tmp, *m->model, m->vocab, m->schedule,
               {{"initial_loss", m->initial_loss}, {"final_loss", m->final_loss}});
    std::filesystem::rename(tmp, path);
  }
  cached = std::move(m);
  return *cached;
}

/// Unconditional deterministic samples, one MBR pick per requested length.
std::vector<TokenSequence> mbr_samples(const OverfitModel& m, const std::vector<int>& lengths, std::uint64_t seed) {
  const NoiseSchedule sched = m.schedule.build();
  GuidanceConfig gc;  // deterministic renoising reverse steps
  std::vector<TokenSequence> out;
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    const auto cands = sample_candidates(*m.model, sched, lengths[k], nullptr, nullptr, gc,
                                         derive_seed(seed, k), kCandidates, 1, &*m.planner);
    out.push_back(cands[mbr_select(cands).index]);
  }
  return out;
}

/// Position-wise match rate against the closest training sentence, over the
/// longer of the two lengths.
double nearest_sentence_accuracy(const TokenSequence& s, const Corpus& corpus) {
  double best = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& d = corpus.sentence(i).ids;
    const std::size_t shared = std::min(d.size(), s.ids.size());
    std::size_t hits = 0;
    for (std::size_t j = 0; j < shared; ++j) hits += d[j] == s.ids[j];
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(std::max(d.size(), s.ids.size())));
  }
  return best;
}

// ---------------------------------------------------------------------------
// 1. Scope.

Outcome scope_statement(const Context&) {
  Outcome out;
  out.detail =
      "full-scale benchmark accuracies (e.g. content 81.9, length 99.9) are not re-measured at desk scale; "
      "acceptance rests on the property checks and scaled regressions 2-10";
  return out;
}

// ---------------------------------------------------------------------------
// 7. Overfit regression.

Outcome overfit_regression(const Context& ctx) {
  Checks c;
  const OverfitModel& m = overfit_model(ctx);
  const double ratio = m.final_loss / m.initial_loss;
  c.expect(ratio < 0.2, "training loss below 20% of its initial value (ratio " + fmt(ratio) + ")");

  std::vector<int> lengths;
  for (std::size_t i = 0; i < 20; ++i) lengths.push_back(static_cast<int>(m.corpus.sentence(i).size()));
  const auto samples = mbr_samples(m, lengths, 700);
  double acc = 0;
  for (const auto& s : samples) acc += nearest_sentence_accuracy(s, m.corpus);
  acc /= static_cast<double>(samples.size());
  c.expect(acc >= 0.90, "MBR-over-5 token accuracy vs nearest training sentence >= 0.90 (got " + fmt(acc) + ")");
  c.note("loss " + fmt(m.initial_loss) + " -> " + fmt(m.final_loss) + " over " + std::to_string(kOverfitSteps) +
         " steps (" + m.origin + "); token accuracy " + fmt(acc) + " over " + std::to_string(samples.size()) +
         " samples; e.g. \"" + detokenize(samples.front(), m.vocab) + "\"");
  return c.outcome();
}

// ---------------------------------------------------------------------------
// 8. Easy-first decoding order.

Outcome easy_first(const Context& ctx) {
  Checks c;
  const OverfitModel& m = overfit_model(ctx);
  const NoiseSchedule sched = m.schedule.build();
  const GuidanceConfig gc;
  const int buckets = m.schedule.buckets;
  double top_sum = 0, low_sum = 0;
  std::size_t top_n = 0, low_n = 0;
  const std::size_t sentences = 30;
  for (std::size_t k = 0; k < sentences; ++k) {
    Rng rng(derive_seed(800, k));
    SampleTrace trace;
    const TokenSequence s = sample(*m.model, sched, static_cast<int>(m.corpus.sentence(k).size()), nullptr, nullptr,
                                   gc, rng, &*m.planner, &trace);
    const BucketAssignment b = bucketize(importance(s, m.corpus), buckets);
    for (std::size_t i = 0; i < s.size(); ++i) {
      // Reverse-step index (0 = t=T) at which the readout first shows the final token.
      std::size_t first = trace.decoded.size();
      for (std::size_t step = 0; step < trace.decoded.size(); ++step)
        if (trace.decoded[step][i] == s.ids[i]) {
          first = step;
          break;
        }
      if (b.bucket[i] == 1) {
        top_sum += static_cast<double>(first);
        ++top_n;
      } else if (b.bucket[i] == buckets) {
        low_sum += static_cast<double>(first);
        ++low_n;
      }
    }
  }
  const double top = top_n ? top_sum / static_cast<double>(top_n) : 0.0;
  const double low = low_n ? low_sum / static_cast<double>(low_n) : 0.0;
  c.expect(low_n > 0 && top_n > 0 && low < top,
           "low-importance tokens decode earlier than the top-importance bucket");
  c.note("mean first-decode reverse step: low-importance " + fmt(low) + " (" + std::to_string(low_n) +
         " tokens), top-importance " + fmt(top) + " (" + std::to_string(top_n) + " tokens), over " +
         std::to_string(sentences) + " samples");
  return c.outcome(Status::Warn);
}

// ---------------------------------------------------------------------------
// 9. Structural length control.

class FlatScorer final : public TokenScorer {
 public:
  std::vector<double> token_log_probs(const TokenSequence& d) const override {
    return std::vector<double>(d.size(), 0.0);
  }
};

Outcome length_control(const Context& ctx) {
  Checks c;
  const OverfitModel& m = overfit_model(ctx);
  const NoiseSchedule sched = m.schedule.build();
  EvalTargets targets;
  for (int len = 1; len <= m.model->config().max_length; len += 3) {
    targets.controls.push_back(ControlSpec::make_length(len));
    targets.lengths.push_back(len);
  }
  const EvalTargets drawn = select_targets(m.corpus, m.vocab, ControlKind::Length, "", nullptr, 10, 9);
  targets.controls.insert(targets.controls.end(), drawn.controls.begin(), drawn.controls.end());
  targets.lengths.insert(targets.lengths.end(), drawn.lengths.begin(), drawn.lengths.end());
  // Free lengths deliberately differ from the targets: only the control may set the length.
  for (int& len : targets.lengths) len = 1;

  std::vector<TokenSequence> outputs;
  const int per_target = 2;
  const EvalReport report = evaluate_control(*m.model, sched, m.vocab, targets, nullptr, GuidanceConfig{}, per_target,
                                             FlatScorer{}, nullptr, 11, &outputs, &*m.planner);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const int want = targets.controls[i / per_target].length;
    const auto non_pad = std::count_if(outputs[i].ids.begin(), outputs[i].ids.end(),
                                       [](int id) { return id != kPadId; });
    exact += non_pad == want;
  }
  c.expect(exact == outputs.size(), "every sample has exactly the target non-PAD length (" + std::to_string(exact) +
                                        "/" + std::to_string(outputs.size()) + ")");
  c.expect(report.accuracy == 1.0, "length_accuracy == 1.0 (got " + fmt(report.accuracy) + ")");
  c.note(std::to_string(outputs.size()) + " samples over " + std::to_string(targets.controls.size()) + " targets");
  return c.outcome();
}

// ---------------------------------------------------------------------------
// 10. Ablation harness integrity.

AblationConfig tiny_ablation() {
  AblationConfig a;
  a.model.latent_dim = 8;
  a.model.width = 16;
  a.model.layers = 1;
  a.model.heads = 2;
  a.model.ffn_mult = 2;
  a.model.dropout = 0.0;
  a.schedule.steps = 20;
  a.train.steps = 30;
  a.train.warmup_steps = 3;
  a.train.batch_size = 8;
  a.train.learning_rate = 3e-3;
  a.train.log_every = 1;
  a.classifier.width = 8;
  a.classifier.heads = 2;
  a.classifier_train.steps = 20;
  a.classifier_train.batch_size = 8;
  a.guidance.updates = 2;
  a.teacher.width = 16;
  a.teacher.layers = 1;
  a.teacher.heads = 2;
  a.teacher.steps = 20;
  a.teacher.batch_size = 8;
  a.field = "food";
  a.targets = 4;
  a.samples_per_target = 2;
  a.seed = 7;
  return a;
}

Outcome ablation_integrity(const Context& ctx) {
  Checks c;
  const Vocabulary vocab = Vocabulary::build(read_jsonl_texts(ctx.data_dir / "toy50.jsonl"));
  const Corpus train = Corpus::load(ctx.data_dir / "toy50.jsonl", vocab);
  const Corpus validation = Corpus::load(ctx.data_dir / "toy_val.jsonl", vocab, Split::Validation);
  const PosTagger tagger = PosTagger::load(ctx.data_dir / "pos_lexicon.tsv");
  const AblationConfig config = tiny_ablation();

  const AblationReport first = run_ablation(train, validation, vocab, tagger, config);
  const AblationReport second = run_ablation(train, validation, vocab, tagger, config);

  c.expect(first.cells.size() == 12, "6 strategies x 2 objectives = 12 cells (got " +
                                         std::to_string(first.cells.size()) + ")");
  std::size_t failed = 0;
  for (const auto& cell : first.cells) failed += cell.failed;
  c.expect(failed == 0, "every cell completes (" + std::to_string(failed) + " failed)");
  const std::string table = first.to_table();
  for (NoiseStrategy s : kAllNoiseStrategies)
    c.expect(table.find(table_label(s)) != std::string::npos, "table row for " + table_label(s));
  c.expect(table.find("CE Acc") != std::string::npos && table.find("L2 PPL") != std::string::npos,
           "table has accuracy and perplexity columns per objective");
  c.expect(std::count(table.begin(), table.end(), '\n') == 2 + 6, "header, rule and one line per strategy");
  c.expect(first.to_json().dump() == second.to_json().dump(), "identical seeds give bit-identical JSON reports");
  c.expect(table == second.to_table(), "identical seeds give identical tables");

  // Directional expectation: reported, not asserted.
  auto ce_accuracy = [&](NoiseStrategy s) {
    for (const auto& cell : first.cells)
      if (cell.strategy == s && cell.objective == Objective::CE) return cell.report.accuracy;
    return 0.0;
  };
  const double rel = ce_accuracy(NoiseStrategy::MaskEntropyRel), gauss = ce_accuracy(NoiseStrategy::GaussianUniform);
  c.note(std::string("direction (not asserted): Entropy+Rel CE accuracy ") + fmt(100 * rel, 3) +
         (rel >= gauss ? " >= " : " < ") + "Gaussian " + fmt(100 * gauss, 3));
  if (ctx.verbose) c.note("\n" + table);
  return c.outcome();
}

}  // namespace

std::vector<Criterion> regression_criteria() {
  return {
      {1, "desk-scale scope: property checks and scaled regressions stand in for full-scale benchmarks", 0.0, scope_statement},
      {7, "overfit regression: loss < 20% of initial, MBR token accuracy >= 90%", 1800.0, overfit_regression},
      {8, "easy-first decoding order (soft check)", 0.0, easy_first},
      {9, "structural length control", 0.0, length_control},
      {10, "ablation sweep completes and reproduces bit-for-bit", 0.0, ablation_integrity},
  };
}

}  // namespace mdlm_acceptance
