// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// mdlm: prepare corpora, train denoisers and latent classifiers, sample with
// control, evaluate control tasks, and run the noise-strategy ablation.
//
// Every command exits 0 on success and 1 with a single line
// "error: <code>: <message>" on failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdlm/checkpoint.hpp"
#include "mdlm/config.hpp"
#include "mdlm/corpus.hpp"
#include "mdlm/error.hpp"
#include "mdlm/eval.hpp"
#include "mdlm/guidance.hpp"
#include "mdlm/hash.hpp"
#include "mdlm/importance.hpp"
#include "mdlm/pos_tagger.hpp"
#include "mdlm/strategy.hpp"
#include "mdlm/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mdlm::Error("io", "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Flag values that were actually given, as a merge patch over the config.
class Overrides {
 public:
  template <typename T>
  void set(const CLI::Option* opt, const json::json_pointer& where, const T& value) {
    if (opt && opt->count() > 0) patch_[where] = value;
  }
  const json& patch() const { return patch_; }

 private:
  json patch_ = json::object();
};

mdlm::RunConfig load_config(const std::string& config_path, const Overrides& overrides) {
  json base = json::object();
  if (!config_path.empty()) base = mdlm::read_config_file(config_path);
  base.merge_patch(overrides.patch());
  return mdlm::RunConfig::from_json(base);
}

mdlm::PosTagger load_tagger(const mdlm::RunConfig& cfg, bool required) {
  if (cfg.pos_lexicon.empty()) {
    if (required) throw mdlm::Error("config", "a POS lexicon is required (data.pos_lexicon or --lexicon)");
    return {};
  }
  return mdlm::PosTagger::load(cfg.pos_lexicon);
}

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw mdlm::Error("config", std::string(what) + " is required");
}

// Stages reverse-process retention the way the checkpoint was trained. Needs
// the training corpus for the importance statistics; without data.train every
// token follows the plain schedule.
struct ReversePlanner {
  std::optional<mdlm::Corpus> corpus;
  mdlm::PosTagger tagger;
  std::optional<mdlm::MaskPlanner> planner;

  const mdlm::MaskPlanner* get() const { return planner ? &*planner : nullptr; }
};

std::unique_ptr<ReversePlanner> make_reverse_planner(const mdlm::RunConfig& cfg, const mdlm::ModelBundle& bundle) {
  auto rp = std::make_unique<ReversePlanner>();
  if (cfg.train_corpus.empty()) return rp;
  const auto strategy = mdlm::parse_noise_strategy(bundle.header.value("strategy", mdlm::to_string(cfg.strategy)));
  rp->corpus.emplace(
      mdlm::Corpus::load(cfg.train_corpus, bundle.vocab, mdlm::Split::Train, bundle.model.config().max_length));
  rp->tagger = load_tagger(cfg, strategy == mdlm::NoiseStrategy::MaskPOS);
  rp->planner.emplace(strategy, *rp->corpus, bundle.schedule, &rp->tagger, &bundle.vocab, cfg.seed);
  return rp;
}

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
  std::string corpus, out;
  int min_count = 1, max_length = mdlm::kDefaultMaxLength, buckets = 3;
};

void cmd_prepare(const PrepareArgs& a) {
  const fs::path out = mdlm::resolve_output_dir(a.out);
  const auto texts = mdlm::read_jsonl_texts(a.corpus);
  const mdlm::Vocabulary vocab = mdlm::Vocabulary::build(texts, a.min_count);
  const mdlm::Corpus corpus = mdlm::Corpus::load(a.corpus, vocab, mdlm::Split::Train, a.max_length);

  write_json(out / "vocab.json", vocab.to_json());
  json tokens = json::array();
  for (int id = 0; id < vocab.size(); ++id)
    tokens.push_back({{"id", id},
                      {"token", vocab.token(id)},
                      {"count", corpus.token_frequency(id)},
                      {"df", corpus.document_frequency(id)}});
  write_json(out / "stats.json", {{"sentences", corpus.size()},
                                  {"tokens", corpus.total_tokens()},
                                  {"vocab_size", vocab.size()},
                                  {"min_count", a.min_count},
                                  {"vocab", tokens}});
  std::ostringstream csv;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto profile = mdlm::importance(corpus.sentence(i), corpus, i);
    csv << "# sentence " << i << '\n';
    mdlm::write_importance_csv(csv, profile, mdlm::bucketize(profile, a.buckets), vocab);
  }
  write_text(out / "importance.csv", csv.str());
  std::cout << "prepared " << corpus.size() << " sentences, " << vocab.size() << " vocabulary entries -> "
            << out.string() << '\n';
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config, checkpoint, classifier;
};

void cmd_train_denoiser(const mdlm::RunConfig& cfg) {
  require_path(cfg.train_corpus, "data.train");
  const fs::path out = mdlm::resolve_output_dir(cfg.output_dir);
  fs::create_directories(out);
  write_json(out / "config.json", cfg.to_json());

  const mdlm::Vocabulary vocab = mdlm::Vocabulary::build(mdlm::read_jsonl_texts(cfg.train_corpus), cfg.min_count);
  const mdlm::Corpus corpus = mdlm::Corpus::load(cfg.train_corpus, vocab, mdlm::Split::Train, cfg.max_length);
  const mdlm::PosTagger tagger = load_tagger(cfg, cfg.strategy == mdlm::NoiseStrategy::MaskPOS);
  const mdlm::MaskPlanner planner(cfg.strategy, corpus, cfg.schedule, &tagger, &vocab, cfg.seed);
  mdlm::DenoiserConfig mc = cfg.model;
  mc.vocab_size = vocab.size();
  mdlm::Denoiser model(mc, cfg.seed);

  const json extra = {{"strategy", mdlm::to_string(cfg.strategy)}, {"train", cfg.train.to_json()}};
  std::ofstream metrics(out / "metrics.jsonl", std::ios::binary);
  mdlm::TrainHooks hooks;
  hooks.metrics_jsonl = &metrics;
  hooks.checkpoint = [&](int step) {
    mdlm::save_model(out / ("model_step" + std::to_string(step) + ".ckpt"), model, vocab, cfg.schedule, extra);
  };
  const auto result = mdlm::train(model, corpus, planner, cfg.train, hooks);
  mdlm::save_model(out / "model.ckpt", model, vocab, cfg.schedule, extra);
  std::cout << "trained " << cfg.train.steps << " steps: loss " << result.initial_loss << " -> "
            << result.final_loss << "; checkpoint " << (out / "model.ckpt").string() << '\n';
}

void cmd_train_classifier(const mdlm::RunConfig& cfg, const TrainArgs& a) {
  require_path(cfg.train_corpus, "data.train");
  if (a.checkpoint.empty()) throw mdlm::Error("config", "--classifier needs --checkpoint");
  mdlm::ControlKind kind;
  std::string field;
  if (a.classifier == "pos") {
    kind = mdlm::ControlKind::POS;
  } else if (a.classifier.rfind("content:", 0) == 0 && a.classifier.size() > 8) {
    kind = mdlm::ControlKind::SemanticContent;
    field = a.classifier.substr(8);
  } else {
    throw mdlm::Error("config", "--classifier must be content:<field> or pos");
  }
  const fs::path out = mdlm::resolve_output_dir(cfg.output_dir);
  fs::create_directories(out);
  write_json(out / "config.json", cfg.to_json());

  mdlm::ModelBundle bundle = mdlm::load_model(a.checkpoint);
  const mdlm::Corpus corpus =
      mdlm::Corpus::load(cfg.train_corpus, bundle.vocab, mdlm::Split::Train, bundle.model.config().max_length);
  const auto strategy = mdlm::parse_noise_strategy(bundle.header.value("strategy", mdlm::to_string(cfg.strategy)));
  const mdlm::PosTagger tagger =
      load_tagger(cfg, kind == mdlm::ControlKind::POS || strategy == mdlm::NoiseStrategy::MaskPOS);
  const mdlm::MaskPlanner planner(strategy, corpus, bundle.schedule, &tagger, &bundle.vocab, cfg.seed);
  mdlm::ClassifierReport report;
  const auto clf = mdlm::train_latent_classifier(corpus, bundle.vocab, bundle.model, planner, kind, field, &tagger,
                                                 cfg.classifier, cfg.classifier_train, &report);
  const fs::path path = out / ("classifier_" + mdlm::to_string(kind) + ".ckpt");
  clf.save(path);
  const json summary = {{"kind", mdlm::to_string(kind)},
                        {"field", field},
                        {"heldout_accuracy", report.heldout_accuracy},
                        {"train_examples", report.train_examples},
                        {"heldout_examples", report.heldout_examples},
                        {"checkpoint", path.string()}};
  write_json(out / ("classifier_" + mdlm::to_string(kind) + ".json"), summary);
  std::cout << summary.dump() << '\n';
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string config, checkpoint, classifier, control, out;
  int samples = 1, length = 10, threads = 1;
  bool mbr = false;
};

void cmd_sample(const SampleArgs& a, const mdlm::RunConfig& cfg) {
  if (a.checkpoint.empty()) throw mdlm::Error("config", "--checkpoint is required");
  if (a.samples < 1) throw mdlm::Error("config", "--samples must be positive");
  const mdlm::ModelBundle bundle = mdlm::load_model(a.checkpoint);
  const mdlm::NoiseSchedule schedule = bundle.schedule.build();
  std::optional<mdlm::ControlSpec> control;
  if (!a.control.empty()) control = mdlm::ControlSpec::parse(a.control);
  std::optional<mdlm::LatentClassifier> clf;
  if (!a.classifier.empty()) clf.emplace(mdlm::LatentClassifier::load(a.classifier));
  if (control && control->kind != mdlm::ControlKind::Length && !clf)
    throw mdlm::Error("config", "content and pos controls need --classifier");

  const auto planner = make_reverse_planner(cfg, bundle);
  const auto candidates =
      mdlm::sample_candidates(bundle.model, schedule, a.length, control ? &*control : nullptr, clf ? &*clf : nullptr,
                              cfg.guidance, cfg.seed, a.samples, a.threads, planner->get());
  std::vector<std::string> lines;
  json meta = {{"checkpoint", a.checkpoint},
               {"control", control ? control->to_string() : ""},
               {"samples", a.samples},
               {"seed", cfg.seed},
               {"guidance", cfg.guidance.to_json()}};
  if (a.mbr) {
    const auto res = mdlm::mbr_select(candidates);
    lines.push_back(mdlm::detokenize(candidates[res.index], bundle.vocab));
    meta["mbr_index"] = res.index;
    meta["mbr_risk"] = res.risk;
    json all = json::array();
    for (const auto& c : candidates) all.push_back(mdlm::detokenize(c, bundle.vocab));
    meta["candidates"] = all;
  } else {
    for (const auto& c : candidates) lines.push_back(mdlm::detokenize(c, bundle.vocab));
  }
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  std::cout << text;
  if (!a.out.empty()) {
    const fs::path out = mdlm::resolve_output_dir(a.out);
    write_text(out / "samples.txt", text);
    meta["outputs"] = lines;
    write_json(out / "samples.json", meta);
  }
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string config, checkpoint, classifier, task = "length", targets, out;
};

void cmd_eval(const EvalArgs& a, const mdlm::RunConfig& cfg) {
  if (a.checkpoint.empty()) throw mdlm::Error("config", "--checkpoint is required");
  const fs::path targets_path = a.targets.empty() ? cfg.validation_corpus : fs::path(a.targets);
  require_path(targets_path, "--targets (or data.validation)");
  mdlm::ControlKind kind;
  if (a.task == "length") kind = mdlm::ControlKind::Length;
  else if (a.task == "content") kind = mdlm::ControlKind::SemanticContent;
  else if (a.task == "pos") kind = mdlm::ControlKind::POS;
  else throw mdlm::Error("config", "--task must be length, content or pos");

  const mdlm::ModelBundle bundle = mdlm::load_model(a.checkpoint);
  const mdlm::NoiseSchedule schedule = bundle.schedule.build();
  const mdlm::Corpus targets_corpus =
      mdlm::Corpus::load(targets_path, bundle.vocab, mdlm::Split::Validation, bundle.model.config().max_length);
  const mdlm::PosTagger tagger = load_tagger(cfg, kind == mdlm::ControlKind::POS);
  std::optional<mdlm::LatentClassifier> clf;
  if (!a.classifier.empty()) clf.emplace(mdlm::LatentClassifier::load(a.classifier));
  if (kind != mdlm::ControlKind::Length && !clf) throw mdlm::Error("config", "this task needs --classifier");
  std::string field = cfg.field;
  if (clf && kind == mdlm::ControlKind::SemanticContent) field = clf->config().field;

  const auto targets = mdlm::select_targets(targets_corpus, bundle.vocab, kind, field, &tagger, cfg.targets, cfg.seed);
  mdlm::TeacherLM teacher(bundle.vocab.size(), cfg.teacher);
  teacher.fit(targets_corpus);
  const auto planner = make_reverse_planner(cfg, bundle);
  std::vector<mdlm::TokenSequence> outputs;
  mdlm::EvalReport report = mdlm::evaluate_control(bundle.model, schedule, bundle.vocab, targets,
                                                   clf ? &*clf : nullptr, cfg.guidance, cfg.samples_per_target,
                                                   teacher, &tagger, cfg.seed, &outputs, planner->get());
  json hashed = cfg.to_json();
  hashed["task"] = a.task;
  hashed["checkpoint_vocab"] = mdlm::hex_digest(bundle.vocab.hash());
  report.config_hash = mdlm::config_hash(hashed);
  const json j = report.to_json();
  std::cout << j.dump() << '\n';
  if (!a.out.empty()) {
    const fs::path out = mdlm::resolve_output_dir(a.out);
    write_json(out / ("eval_" + a.task + ".json"), j);
    write_json(out / "config.json", cfg.to_json());
    std::string text;
    for (const auto& o : outputs) text += mdlm::detokenize(o, bundle.vocab) + "\n";
    write_text(out / ("eval_" + a.task + "_outputs.txt"), text);
  }
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string config;
  std::vector<std::string> strategies, objectives;
};

void cmd_ablate(const AblateArgs& a, const mdlm::RunConfig& cfg) {
  require_path(cfg.train_corpus, "data.train");
  require_path(cfg.validation_corpus, "data.validation");
  const fs::path out = mdlm::resolve_output_dir(cfg.output_dir);
  fs::create_directories(out);
  write_json(out / "config.json", cfg.to_json());

  const mdlm::Vocabulary vocab = mdlm::Vocabulary::build(mdlm::read_jsonl_texts(cfg.train_corpus), cfg.min_count);
  const mdlm::Corpus train = mdlm::Corpus::load(cfg.train_corpus, vocab, mdlm::Split::Train, cfg.max_length);
  const mdlm::Corpus validation =
      mdlm::Corpus::load(cfg.validation_corpus, vocab, mdlm::Split::Validation, cfg.max_length);
  const mdlm::PosTagger tagger = load_tagger(cfg, true);

  mdlm::AblationConfig ac;
  if (!a.strategies.empty()) {
    ac.strategies.clear();
    for (const auto& s : a.strategies) ac.strategies.push_back(mdlm::parse_noise_strategy(s));
  }
  if (!a.objectives.empty()) {
    ac.objectives.clear();
    for (const auto& o : a.objectives) ac.objectives.push_back(mdlm::parse_objective(o));
  }
  ac.model = cfg.model;
  ac.schedule = cfg.schedule;
  ac.train = cfg.train;
  ac.classifier = cfg.classifier;
  ac.classifier_train = cfg.classifier_train;
  ac.guidance = cfg.guidance;
  ac.teacher = cfg.teacher;
  ac.field = cfg.field;
  ac.targets = cfg.targets;
  ac.samples_per_target = cfg.samples_per_target;
  ac.seed = cfg.seed;

  const auto report = mdlm::run_ablation(train, validation, vocab, tagger, ac, [](const mdlm::AblationCell& c) {
    std::cerr << mdlm::table_label(c.strategy) << " / " << mdlm::to_string(c.objective) << ": "
              << (c.failed ? "failed (" + c.error + ")" : "acc " + std::to_string(c.report.accuracy)) << '\n';
  });
  write_json(out / "report.json", report.to_json());
  write_text(out / "report.txt", report.to_table());
  std::cout << report.to_table();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked-diffusion language model toolkit"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Build vocabulary, corpus statistics and importance dump");
  prepare->add_option("--corpus", prep.corpus, "JSONL corpus")->required();
  prepare->add_option("--out", prep.out, "Output directory")->required();
  prepare->add_option("--min-count", prep.min_count, "Minimum token count for the vocabulary");
  prepare->add_option("--max-length", prep.max_length, "Truncation length");
  prepare->add_option("--buckets", prep.buckets, "Buckets for the importance dump");

  // Options shared by the config-driven commands.
  struct Common {
    std::string config, train, validation, lexicon, out, strategy, objective;
    std::uint64_t seed = 0;
    int steps = 0, batch = 0, T = 0, updates = 0, warmup = 0;
    double lr = 0, lambda = 0, step_size = 0;
    bool stochastic = false;
    Overrides ov;
    std::vector<std::pair<CLI::Option*, std::function<void()>>> binds;
  } common;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config, "TOML or JSON run configuration");
    auto* o_train = cmd->add_option("--train", common.train, "Training corpus (JSONL)");
    auto* o_val = cmd->add_option("--validation", common.validation, "Validation corpus (JSONL)");
    auto* o_lex = cmd->add_option("--lexicon", common.lexicon, "POS lexicon (TSV)");
    auto* o_out = cmd->add_option("--out", common.out, "Output directory");
    auto* o_strategy = cmd->add_option("--strategy", common.strategy, "Noise strategy");
    auto* o_objective = cmd->add_option("--objective", common.objective, "Training objective (ce|l2)");
    auto* o_seed = cmd->add_option("--seed", common.seed, "Seed for all randomness");
    auto* o_steps = cmd->add_option("--steps", common.steps, "Training steps");
    auto* o_batch = cmd->add_option("--batch-size", common.batch, "Batch size");
    auto* o_warmup = cmd->add_option("--warmup", common.warmup, "Warmup steps");
    auto* o_T = cmd->add_option("--diffusion-steps", common.T, "Diffusion steps T");
    auto* o_lr = cmd->add_option("--lr", common.lr, "Peak learning rate");
    auto* o_lambda = cmd->add_option("--lambda", common.lambda, "Fluency weight");
    auto* o_updates = cmd->add_option("--updates", common.updates, "Guidance updates per step");
    auto* o_eta = cmd->add_option("--step-size", common.step_size, "Guidance step size");
    auto* o_stoch = cmd->add_flag("--stochastic", common.stochastic, "Stochastic reverse steps");
    common.binds.emplace_back(o_train, [&, o_train] { common.ov.set(o_train, "/data/train"_json_pointer, common.train); });
    common.binds.emplace_back(o_val, [&, o_val] {
      common.ov.set(o_val, "/data/validation"_json_pointer, common.validation);
    });
    common.binds.emplace_back(o_lex, [&, o_lex] { common.ov.set(o_lex, "/data/pos_lexicon"_json_pointer, common.lexicon); });
    common.binds.emplace_back(o_out, [&, o_out] { common.ov.set(o_out, "/output_dir"_json_pointer, common.out); });
    common.binds.emplace_back(o_strategy, [&, o_strategy] {
      common.ov.set(o_strategy, "/strategy"_json_pointer, common.strategy);
    });
    common.binds.emplace_back(o_objective, [&, o_objective] {
      common.ov.set(o_objective, "/train/objective"_json_pointer, common.objective);
    });
    common.binds.emplace_back(o_seed, [&, o_seed] { common.ov.set(o_seed, "/seed"_json_pointer, common.seed); });
    common.binds.emplace_back(o_steps, [&, o_steps] { common.ov.set(o_steps, "/train/steps"_json_pointer, common.steps); });
    common.binds.emplace_back(o_batch, [&, o_batch] {
      common.ov.set(o_batch, "/train/batch_size"_json_pointer, common.batch);
    });
    common.binds.emplace_back(o_warmup, [&, o_warmup] {
      common.ov.set(o_warmup, "/train/warmup_steps"_json_pointer, common.warmup);
    });
    common.binds.emplace_back(o_T, [&, o_T] { common.ov.set(o_T, "/schedule/T"_json_pointer, common.T); });
    common.binds.emplace_back(o_lr, [&, o_lr] { common.ov.set(o_lr, "/train/learning_rate"_json_pointer, common.lr); });
    common.binds.emplace_back(o_lambda, [&, o_lambda] {
      common.ov.set(o_lambda, "/guidance/lambda"_json_pointer, common.lambda);
    });
    common.binds.emplace_back(o_updates, [&, o_updates] {
      common.ov.set(o_updates, "/guidance/updates"_json_pointer, common.updates);
    });
    common.binds.emplace_back(o_eta, [&, o_eta] {
      common.ov.set(o_eta, "/guidance/step_size"_json_pointer, common.step_size);
    });
    common.binds.emplace_back(o_stoch, [&, o_stoch] {
      common.ov.set(o_stoch, "/guidance/stochastic"_json_pointer, common.stochastic);
    });
  };

  TrainArgs targs;
  auto* train = app.add_subcommand("train", "Train a denoiser, or a latent classifier with --classifier");
  add_common(train);
  train->add_option("--classifier", targs.classifier, "Train a classifier instead: content:<field> or pos");
  train->add_option("--checkpoint", targs.checkpoint, "Denoiser checkpoint (classifier training)");

  SampleArgs sargs;
  auto* sample = app.add_subcommand("sample", "Generate sentences, optionally controlled and MBR-selected");
  add_common(sample);
  sample->add_option("--checkpoint", sargs.checkpoint, "Denoiser checkpoint")->required();
  sample->add_option("--classifier", sargs.classifier, "Latent classifier checkpoint");
  sample->add_option("--control", sargs.control, "length=N | content=field:value | pos=\"TAG ...\"");
  sample->add_option("--samples", sargs.samples, "Number of samples S");
  sample->add_option("--length", sargs.length, "Sequence length when the control leaves it free");
  sample->add_option("--threads", sargs.threads, "Sampling threads");
  sample->add_flag("--mbr", sargs.mbr, "Print only the minimum-Bayes-risk sample");

  EvalArgs eargs;
  auto* eval = app.add_subcommand("eval", "Score a control task");
  add_common(eval);
  eval->add_option("--checkpoint", eargs.checkpoint, "Denoiser checkpoint")->required();
  eval->add_option("--classifier", eargs.classifier, "Latent classifier checkpoint");
  eval->add_option("--task", eargs.task, "length | content | pos");
  eval->add_option("--targets", eargs.targets, "JSONL file the control targets come from");

  AblateArgs aargs;
  auto* ablate = app.add_subcommand("ablate", "Noise strategy x objective sweep");
  add_common(ablate);
  ablate->add_option("--strategies", aargs.strategies, "Subset of strategies");
  ablate->add_option("--objectives", aargs.objectives, "Subset of objectives (ce, l2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return 1;
  }

  try {
    for (auto& [opt, bind] : common.binds) bind();
    if (prepare->parsed()) {
      cmd_prepare(prep);
      return 0;
    }
    const mdlm::RunConfig cfg = load_config(common.config, common.ov);
    if (train->parsed()) {
      if (targs.classifier.empty()) cmd_train_denoiser(cfg);
      else cmd_train_classifier(cfg, targs);
    } else if (sample->parsed()) {
      sargs.out = common.out;
      cmd_sample(sargs, cfg);
    } else if (eval->parsed()) {
      eargs.out = common.out;
      cmd_eval(eargs, cfg);
    } else if (ablate->parsed()) {
      cmd_ablate(aargs, cfg);
    }
    if (!sample->parsed() && !prepare->parsed()) std::cerr << "resolved config: " << cfg.to_json().dump() << '\n';
  } catch (const mdlm::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
