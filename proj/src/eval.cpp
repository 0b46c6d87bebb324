// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mdlm/error.hpp"
#include "mdlm/hash.hpp"

namespace mdlm::inline MDLM_ABI {

double length_accuracy(std::span<const TokenSequence> outputs, std::span<const int> targets) {
  if (outputs.size() != targets.size()) throw Error("shape", "outputs and targets differ in count");
  if (outputs.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    std::size_t n = 0;
    for (int id : outputs[i].ids) n += id != kPadId;
    hits += std::abs(static_cast<long long>(n) - targets[i]) <= 2;
  }
  return static_cast<double>(hits) / static_cast<double>(outputs.size());
}

double content_accuracy(std::span<const TokenSequence> outputs, std::span<const ControlSpec> specs,
                        const Vocabulary& vocab) {
  if (outputs.size() != specs.size()) throw Error("shape", "outputs and specs differ in count");
  if (outputs.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    std::vector<int> needle;
    for (const auto& w : split_words(specs[i].value)) needle.push_back(vocab.id(w));
    const auto& hay = outputs[i].ids;
    hits += !needle.empty() && std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
  }
  return static_cast<double>(hits) / static_cast<double>(outputs.size());
}

double pos_accuracy(std::span<const TokenSequence> outputs, std::span<const ControlSpec> specs,
                    const PosTagger& tagger, const Vocabulary& vocab) {
  if (outputs.size() != specs.size()) throw Error("shape", "outputs and specs differ in count");
  if (outputs.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) hits += tagger.tag_sequence(outputs[i], vocab) == specs[i].tags;
  return static_cast<double>(hits) / static_cast<double>(outputs.size());
}

double fluency_perplexity(std::span<const TokenSequence> outputs, const TokenScorer& teacher) {
  double nll = 0;
  std::size_t tokens = 0;
  for (const auto& seq : outputs) {
    if (seq.ids.empty()) continue;
    for (double lp : teacher.token_log_probs(seq)) nll -= lp;
    tokens += seq.ids.size();
  }
  if (tokens == 0) throw Error("empty", "no tokens to score for fluency");
  return std::exp(nll / static_cast<double>(tokens));
}

nlohmann::json TeacherConfig::to_json() const {
  return {{"width", width}, {"layers", layers},         {"heads", heads},
          {"max_length", max_length}, {"steps", steps}, {"batch_size", batch_size},
          {"learning_rate", learning_rate}, {"seed", seed}};
}

TeacherConfig TeacherConfig::from_json(const nlohmann::json& j) {
  TeacherConfig c;
  c.width = j.value("width", c.width);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.max_length = j.value("max_length", c.max_length);
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  return c;
}

TeacherLM::TeacherLM(int vocab_size, const TeacherConfig& config) : vocab_size_(vocab_size), config_(config) {
  if (vocab_size < 3 || config.width % config.heads != 0 || config.layers < 1 || config.max_length < 1)
    throw Error("config", "invalid teacher configuration");
  Rng rng(derive_seed(config.seed, 11));
  embedding_ = ag::Parameter("teacher_embedding", normal_matrix(vocab_size, config.width, rng, 0.1));
  position_ = ag::Parameter("teacher_position", normal_matrix(config.max_length, config.width, rng, 0.02));
  for (int i = 0; i < config.layers; ++i)
    blocks_.emplace_back("teacher_block" + std::to_string(i), config.width, config.heads, 4 * config.width,
                         /*causal=*/true, rng);
  norm_ = nn::LayerNorm("teacher_norm", config.width);
  head_ = nn::Linear("teacher_head", config.width, vocab_size, rng);
}

std::vector<ag::Parameter*> TeacherLM::parameters() {
  std::vector<ag::Parameter*> out{&embedding_, &position_};
  for (auto& b : blocks_) b.collect(out);
  norm_.collect(out);
  head_.collect(out);
  return out;
}

ag::Var TeacherLM::logits(ag::Graph& g, const std::vector<std::vector<int>>& inputs) const {
  std::vector<int> ids, positions, lengths;
  for (const auto& in : inputs) {
    if (static_cast<int>(in.size()) > config_.max_length) throw Error("range", "sequence longer than max_length");
    lengths.push_back(static_cast<int>(in.size()));
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] < 0 || in[i] >= vocab_size_) throw Error("range", "token id outside the teacher vocabulary");
      ids.push_back(in[i]);
      positions.push_back(static_cast<int>(i));
    }
  }
  const ag::Segments seg(lengths);
  ag::Var h = g.add(g.gather_rows(g.param(embedding_), ids), g.gather_rows(g.param(position_), positions));
  for (const auto& b : blocks_) h = b(g, h, seg, 0, nullptr);
  return head_(g, norm_(g, h));
}

namespace {

/// Shifted input: PAD as begin-of-sentence, then all but the last token.
std::vector<int> shifted(const std::vector<int>& ids) {
  std::vector<int> in{kPadId};
  in.insert(in.end(), ids.begin(), ids.end() - 1);
  return in;
}

}  // namespace

double TeacherLM::fit(const Corpus& corpus) {
  if (corpus.empty()) throw Error("empty_corpus", "teacher needs text to train on");
  AdamW opt(parameters());
  Rng rng(derive_seed(config_.seed, 12));
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  std::vector<double> recent;
  for (int step = 1; step <= config_.steps; ++step) {
    std::vector<std::vector<int>> inputs;
    std::vector<int> targets;
    std::vector<Real> weights;
    for (int b = 0; b < config_.batch_size; ++b) {
      const auto& ids = corpus.sentence(pick(rng)).ids;
      inputs.push_back(shifted(ids));
      targets.insert(targets.end(), ids.begin(), ids.end());
      weights.insert(weights.end(), ids.size(), static_cast<Real>(1.0 / (ids.size() * config_.batch_size)));
    }
    ag::Graph g;
    ag::Var loss = g.weighted_cross_entropy(logits(g, inputs), targets, weights);
    opt.zero_grad();
    g.backward(loss);
    clip_grad_norm(opt.params(), 1.0);
    // Linear warmup over the first 10% of steps, then constant.
    const double warm = std::min(1.0, step / std::max(1.0, 0.1 * config_.steps));
    opt.step(config_.learning_rate * warm);
    recent.push_back(loss.scalar());
    if (recent.size() > 20) recent.erase(recent.begin());
  }
  return recent.empty() ? 0.0 : std::accumulate(recent.begin(), recent.end(), 0.0) / recent.size();
}

std::vector<double> TeacherLM::token_log_probs(const TokenSequence& d) const {
  if (d.ids.empty()) return {};
  ag::Graph g(false);
  const Matrix lp = ag::log_softmax_rows(logits(g, {shifted(d.ids)}).value());
  std::vector<double> out(d.ids.size());
  for (std::size_t i = 0; i < d.ids.size(); ++i) out[i] = lp(static_cast<Eigen::Index>(i), d.ids[i]);
  return out;
}

nlohmann::json EvalReport::to_json() const {
  return {{"task", task}, {"accuracy", accuracy}, {"fluency", fluency}, {"samples", samples},
          {"config_hash", config_hash}};
}

std::string config_hash(const nlohmann::json& config) {
  Fnv1a h;
  h.update(config.dump());
  return hex_digest(h.digest());
}

EvalTargets select_targets(const Corpus& corpus, const Vocabulary& vocab, ControlKind kind, const std::string& field,
                           const PosTagger* tagger, int count, std::uint64_t seed) {
  if (count < 1) throw Error("config", "target count must be positive");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (kind != ControlKind::SemanticContent || corpus.example(i).attributes.count(field)) pool.push_back(i);
  if (pool.empty()) throw Error("no_labels", "no validation sentence can serve as a control target");
  if (kind == ControlKind::POS && !tagger) throw Error("config", "pos targets need a tagger");
  Rng rng(derive_seed(seed, 21));
  std::shuffle(pool.begin(), pool.end(), rng);
  EvalTargets out;
  for (int k = 0; k < count; ++k) {
    const std::size_t i = pool[static_cast<std::size_t>(k) % pool.size()];
    const TokenSequence& d = corpus.sentence(i);
    const int len = static_cast<int>(d.size());
    switch (kind) {
      case ControlKind::Length: out.controls.push_back(ControlSpec::make_length(len)); break;
      case ControlKind::SemanticContent:
        out.controls.push_back(ControlSpec::make_content(field, corpus.example(i).attributes.at(field)));
        break;
      case ControlKind::POS: out.controls.push_back(ControlSpec::make_pos(tagger->tag_sequence(d, vocab))); break;
    }
    out.lengths.push_back(len);
  }
  return out;
}

EvalReport evaluate_control(const Denoiser& model, const NoiseSchedule& schedule, const Vocabulary& vocab,
                            const EvalTargets& targets, const LatentClassifier* classifier,
                            const GuidanceConfig& guidance, int samples_per_target, const TokenScorer& teacher,
                            const PosTagger* tagger, std::uint64_t seed, std::vector<TokenSequence>* outputs,
                            const MaskPlanner* planner) {
  if (targets.controls.empty()) throw Error("config", "no control targets");
  if (samples_per_target < 1) throw Error("config", "samples per target must be positive");
  const ControlKind kind = targets.controls.front().kind;
  std::vector<TokenSequence> samples;
  std::vector<ControlSpec> specs;
  std::vector<int> lengths;
  for (std::size_t i = 0; i < targets.controls.size(); ++i) {
    const ControlSpec& c = targets.controls[i];
    if (c.kind != kind) throw Error("control", "mixed control kinds in one evaluation");
    auto batch = sample_candidates(model, schedule, targets.lengths[i], &c, classifier, guidance,
                                   derive_seed(seed, 100 + i), samples_per_target, 1, planner);
    for (auto& s : batch) {
      samples.push_back(std::move(s));
      specs.push_back(c);
      lengths.push_back(c.kind == ControlKind::Length ? c.length : targets.lengths[i]);
    }
  }
  EvalReport report;
  report.task = to_string(kind);
  report.samples = samples.size();
  switch (kind) {
    case ControlKind::Length: report.accuracy = length_accuracy(samples, lengths); break;
    case ControlKind::SemanticContent: report.accuracy = content_accuracy(samples, specs, vocab); break;
    case ControlKind::POS:
      if (!tagger) throw Error("config", "pos evaluation needs a tagger");
      report.accuracy = pos_accuracy(samples, specs, *tagger, vocab);
      break;
  }
  report.fluency = fluency_perplexity(samples, teacher);
  if (outputs) *outputs = std::move(samples);
  return report;
}

nlohmann::json AblationConfig::to_json() const {
  nlohmann::json s = nlohmann::json::array(), o = nlohmann::json::array();
  for (auto x : strategies) s.push_back(to_string(x));
  for (auto x : objectives) o.push_back(to_string(x));
  return {{"strategies", s},
          {"objectives", o},
          {"model", model.to_json()},
          {"schedule", schedule.to_json()},
          {"train", train.to_json()},
          {"classifier", {{"width", classifier.width}, {"heads", classifier.heads}}},
          {"classifier_train",
           {{"steps", classifier_train.steps},
            {"batch_size", classifier_train.batch_size},
            {"learning_rate", classifier_train.learning_rate},
            {"holdout_fraction", classifier_train.holdout_fraction}}},
          {"guidance", guidance.to_json()},
          {"teacher", teacher.to_json()},
          {"field", field},
          {"targets", targets},
          {"samples_per_target", samples_per_target},
          {"seed", seed}};
}

nlohmann::json AblationCell::to_json() const {
  nlohmann::json j = {{"strategy", to_string(strategy)},
                      {"label", table_label(strategy)},
                      {"objective", to_string(objective)},
                      {"failed", failed}};
  if (failed) {
    j["error"] = error;
  } else {
    j["final_loss"] = final_loss;
    j["classifier_accuracy"] = classifier_accuracy;
    j["report"] = report.to_json();
  }
  return j;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells) cells_json.push_back(c.to_json());
  return {{"teacher_loss", teacher_loss}, {"cells", cells_json}};
}

std::string AblationReport::to_table() const {
  std::vector<NoiseStrategy> rows;
  std::vector<Objective> cols;
  for (const auto& c : cells) {
    if (std::find(rows.begin(), rows.end(), c.strategy) == rows.end()) rows.push_back(c.strategy);
    if (std::find(cols.begin(), cols.end(), c.objective) == cols.end()) cols.push_back(c.objective);
  }
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-22s", "Noise");
  out << buf;
  for (auto o : cols) {
    const std::string acc = to_string(o) + " Acc", ppl = to_string(o) + " PPL";
    std::snprintf(buf, sizeof(buf), " | %9s %10s", acc.c_str(), ppl.c_str());
    out << buf;
  }
  out << '\n' << std::string(22 + cols.size() * 23, '-') << '\n';
  for (auto s : rows) {
    std::snprintf(buf, sizeof(buf), "%-22s", table_label(s).c_str());
    out << buf;
    for (auto o : cols) {
      const auto it = std::find_if(cells.begin(), cells.end(),
                                   [&](const AblationCell& c) { return c.strategy == s && c.objective == o; });
      if (it == cells.end()) std::snprintf(buf, sizeof(buf), " | %9s %10s", "-", "-");
      else if (it->failed) std::snprintf(buf, sizeof(buf), " | %9s %10s", "failed", "failed");
      else std::snprintf(buf, sizeof(buf), " | %9.1f %10.2f", 100.0 * it->report.accuracy, it->report.fluency);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

AblationReport run_ablation(const Corpus& train, const Corpus& validation, const Vocabulary& vocab,
                            const PosTagger& tagger, const AblationConfig& config, const AblationProgress& progress) {
  if (config.strategies.empty() || config.objectives.empty()) throw Error("config", "empty ablation grid");
  config.train.validate();
  config.guidance.validate();
  AblationReport out;

  TeacherConfig tc = config.teacher;
  tc.seed = derive_seed(config.seed, 31);
  TeacherLM teacher(vocab.size(), tc);
  out.teacher_loss = teacher.fit(validation);

  const NoiseSchedule schedule = config.schedule.build();
  const EvalTargets targets = select_targets(validation, vocab, ControlKind::SemanticContent, config.field, &tagger,
                                             config.targets, config.seed);
  DenoiserConfig mc = config.model;
  mc.vocab_size = vocab.size();
  mc.steps = config.schedule.steps;
  const nlohmann::json base = config.to_json();

  for (NoiseStrategy strategy : config.strategies) {
    for (Objective objective : config.objectives) {
      AblationCell cell;
      cell.strategy = strategy;
      cell.objective = objective;
      try {
        MaskPlanner planner(strategy, train, config.schedule, &tagger, &vocab, config.seed);
        Denoiser model(mc, config.seed);
        TrainConfig tcfg = config.train;
        tcfg.objective = objective;
        const TrainResult tr = mdlm::train(model, train, planner, tcfg);
        cell.final_loss = tr.final_loss;
        ClassifierReport cr;
        ClassifierTrainConfig ct = config.classifier_train;
        ct.seed = derive_seed(config.seed, 41);
        const LatentClassifier clf = train_latent_classifier(train, vocab, model, planner, ControlKind::SemanticContent,
                                                             config.field, &tagger, config.classifier, ct, &cr);
        cell.classifier_accuracy = cr.heldout_accuracy;
        cell.report = evaluate_control(model, schedule, vocab, targets, &clf, config.guidance,
                                       config.samples_per_target, teacher, &tagger, config.seed, nullptr, &planner);
        nlohmann::json cell_config = base;
        cell_config["cell"] = {{"strategy", to_string(strategy)}, {"objective", to_string(objective)}};
        cell.report.config_hash = config_hash(cell_config);
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
      if (progress) progress(cell);
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

}  // namespace mdlm
