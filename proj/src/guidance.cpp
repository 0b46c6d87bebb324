// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/guidance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "mdlm/checkpoint.hpp"
#include "mdlm/error.hpp"
#include "mdlm/training.hpp"

namespace mdlm::inline MDLM_ABI {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string to_string(ControlKind k) {
  switch (k) {
    case ControlKind::Length: return "length";
    case ControlKind::SemanticContent: return "content";
    case ControlKind::POS: return "pos";
  }
  return "?";
}

ControlSpec ControlSpec::make_length(int length) {
  ControlSpec c;
  c.kind = ControlKind::Length;
  c.length = length;
  c.validate();
  return c;
}

ControlSpec ControlSpec::make_content(std::string field, std::string value) {
  ControlSpec c;
  c.kind = ControlKind::SemanticContent;
  c.field = std::move(field);
  c.value = std::move(value);
  c.validate();
  return c;
}

ControlSpec ControlSpec::make_pos(std::vector<std::string> tags) {
  ControlSpec c;
  c.kind = ControlKind::POS;
  c.tags = std::move(tags);
  c.validate();
  return c;
}

ControlSpec ControlSpec::parse(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw Error("control", "control must look like kind=value: '" + text + "'");
  const std::string kind = lower(trim(text.substr(0, eq)));
  const std::string rest = trim(text.substr(eq + 1));
  if (kind == "length") {
    std::size_t used = 0;
    int n = 0;
    try {
      n = std::stoi(rest, &used);
    } catch (const std::exception&) {
      throw Error("control", "length control needs an integer: '" + rest + "'");
    }
    if (used != rest.size()) throw Error("control", "length control needs an integer: '" + rest + "'");
    return make_length(n);
  }
  if (kind == "content") {
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw Error("control", "content control must look like field:value");
    return make_content(trim(rest.substr(0, colon)), trim(rest.substr(colon + 1)));
  }
  if (kind == "pos") return make_pos(split_tags(rest));
  throw Error("control", "unknown control kind '" + kind + "'");
}

void ControlSpec::validate() const {
  switch (kind) {
    case ControlKind::Length:
      if (length < 1) throw Error("control", "length control must be positive");
      break;
    case ControlKind::SemanticContent:
      if (field.empty() || value.empty()) throw Error("control", "content control needs a field and a value");
      break;
    case ControlKind::POS:
      if (tags.empty()) throw Error("control", "pos control needs at least one tag");
      break;
  }
}

std::string ControlSpec::to_string() const {
  switch (kind) {
    case ControlKind::Length: return "length=" + std::to_string(length);
    case ControlKind::SemanticContent: return "content=" + field + ":" + value;
    case ControlKind::POS: {
      std::string out = "pos=";
      for (std::size_t i = 0; i < tags.size(); ++i) out += (i ? " " : "") + tags[i];
      return out;
    }
  }
  return "";
}

nlohmann::json ClassifierConfig::to_json() const {
  return {{"kind", mdlm::to_string(kind)}, {"field", field},     {"labels", labels},
          {"latent_dim", latent_dim},      {"width", width},     {"heads", heads},
          {"steps", steps},                {"max_length", max_length}};
}

ClassifierConfig ClassifierConfig::from_json(const nlohmann::json& j) {
  ClassifierConfig c;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "content") c.kind = ControlKind::SemanticContent;
  else if (kind == "pos") c.kind = ControlKind::POS;
  else throw Error("checkpoint", "unsupported classifier kind '" + kind + "'");
  c.field = j.value("field", "");
  c.labels = j.at("labels").get<std::vector<std::string>>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.width = j.at("width").get<int>();
  c.heads = j.at("heads").get<int>();
  c.steps = j.at("steps").get<int>();
  c.max_length = j.at("max_length").get<int>();
  return c;
}

LatentClassifier::LatentClassifier(const ClassifierConfig& config, std::uint64_t seed) : config_(config) {
  if (config.kind == ControlKind::Length) throw Error("config", "length control needs no classifier");
  if (config.labels.size() < 2) throw Error("config", "classifier needs at least two labels");
  if (config.width % config.heads != 0) throw Error("config", "heads must divide width");
  if (config.latent_dim < 1 || config.steps < 1 || config.max_length < 1)
    throw Error("config", "classifier dimensions must be positive");
  Rng rng(seed);
  in_proj_ = nn::Linear("clf_in_proj", config.latent_dim, config.width, rng);
  position_ = ag::Parameter("clf_position", normal_matrix(config.max_length, config.width, rng, 0.02));
  timestep_ = ag::Parameter("clf_timestep", normal_matrix(config.steps + 1, config.width, rng, 0.02));
  block_ = nn::TransformerBlock("clf_block", config.width, config.heads, 2 * config.width, false, rng);
  norm_ = nn::LayerNorm("clf_norm", config.width);
  head_ = nn::Linear("clf_head", config.width, static_cast<int>(config.labels.size()), rng);
}

int LatentClassifier::label_index(const std::string& label) const {
  const std::string key = lower(label);
  for (std::size_t i = 0; i < config_.labels.size(); ++i)
    if (lower(config_.labels[i]) == key) return static_cast<int>(i);
  return -1;
}

ag::Var LatentClassifier::log_probs(ag::Graph& g, const ag::Var& x, const ag::Segments& segments,
                                    std::span<const int> steps) const {
  if (steps.size() != segments.count()) throw Error("shape", "one diffusion step per segment required");
  if (x.cols() != config_.latent_dim) throw Error("shape", "latent width mismatch");
  std::vector<int> positions, times;
  for (std::size_t s = 0; s < segments.count(); ++s) {
    if (steps[s] < 0 || steps[s] > config_.steps) throw Error("range", "classifier step outside [0, T]");
    if (segments.length(s) > config_.max_length) throw Error("range", "sequence longer than max_length");
    for (int i = 0; i < segments.length(s); ++i) {
      positions.push_back(i);
      times.push_back(steps[s]);
    }
  }
  ag::Var h = in_proj_(g, x);
  h = g.add(h, g.gather_rows(g.param(position_), positions));
  h = g.add(h, g.gather_rows(g.param(timestep_), times));
  h = norm_(g, block_(g, h, segments, 0, nullptr));
  if (config_.kind == ControlKind::SemanticContent) h = g.segment_mean(h, segments);
  return g.log_softmax(head_(g, h));
}

std::vector<int> LatentClassifier::targets(const ControlSpec& control, int length) const {
  if (control.kind != config_.kind) throw Error("control", "classifier does not match the control kind");
  if (control.kind == ControlKind::SemanticContent) {
    if (lower(control.field) != lower(config_.field))
      throw Error("control", "classifier was trained for field '" + config_.field + "'");
    const int idx = label_index(control.value);
    if (idx < 0) throw Error("control", "unknown value '" + control.value + "' for field '" + config_.field + "'");
    return {idx};
  }
  if (static_cast<int>(control.tags.size()) != length)
    throw Error("control", "pos control length does not match the sequence");
  std::vector<int> out;
  for (const auto& tag : control.tags) {
    const int idx = label_index(tag);
    if (idx < 0) throw Error("control", "unknown tag '" + tag + "'");
    out.push_back(idx);
  }
  return out;
}

ag::Var LatentClassifier::log_prob(ag::Graph& g, const ag::Var& x, int t, const ControlSpec& control) const {
  const auto tgt = targets(control, static_cast<int>(x.rows()));
  const ag::Segments seg({static_cast<int>(x.rows())});
  const int steps[] = {t};
  return g.select_sum(log_probs(g, x, seg, steps), tgt);
}

double LatentClassifier::log_prob(const Matrix& x, int t, const ControlSpec& control) const {
  ag::Graph g(false);
  return static_cast<double>(log_prob(g, g.constant(x), t, control).scalar());
}

Matrix LatentClassifier::input_gradient(const Matrix& x, int t, const ControlSpec& control) const {
  ag::Graph g(true, /*train_params=*/false);
  ag::Var in = g.input(x);
  g.backward(log_prob(g, in, t, control));
  return in.grad();
}

std::vector<ag::Parameter*> LatentClassifier::parameters() {
  std::vector<ag::Parameter*> out;
  in_proj_.collect(out);
  out.push_back(&position_);
  out.push_back(&timestep_);
  block_.collect(out);
  norm_.collect(out);
  head_.collect(out);
  return out;
}

std::vector<const ag::Parameter*> LatentClassifier::parameters() const {
  auto mut = const_cast<LatentClassifier*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

void LatentClassifier::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["kind"] = "classifier";
  header["classifier"] = config_.to_json();
  write_checkpoint(path, std::move(header), parameters());
}

LatentClassifier LatentClassifier::load(const std::filesystem::path& path) {
  CheckpointFile file = read_checkpoint(path);
  if (file.header.value("kind", "") != "classifier") throw Error("checkpoint", path.string() + " is not a classifier");
  LatentClassifier clf(ClassifierConfig::from_json(file.header.at("classifier")), 0);
  assign_parameters(file, clf.parameters());
  return clf;
}

namespace {

/// Correct and total label counts of one example under the classifier.
std::pair<std::size_t, std::size_t> score_example(const LatentClassifier& clf, const LabeledLatent& ex) {
  ag::Graph g(false);
  const ag::Segments seg({static_cast<int>(ex.x.rows())});
  const int steps[] = {ex.t};
  const auto pred = argmax_rows(clf.log_probs(g, g.constant(ex.x), seg, steps).value());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ex.labels.size(); ++i) correct += pred[i] == ex.labels[i];
  return {correct, ex.labels.size()};
}

}  // namespace

ClassifierReport fit_classifier(LatentClassifier& classifier, std::size_t example_count, const LatentSource& source,
                                const ClassifierTrainConfig& config) {
  if (config.steps < 0 || config.batch_size < 1 || !(config.learning_rate > 0) || config.holdout_fraction < 0 ||
      config.holdout_fraction >= 1)
    throw Error("config", "invalid classifier training configuration");
  if (example_count == 0) throw Error("no_labels", "no labeled examples for the classifier");

  // Deterministic shuffled split so a label-sorted corpus still splits fairly.
  std::vector<std::size_t> order(example_count);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(config.seed, 1));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t heldout = static_cast<std::size_t>(std::floor(config.holdout_fraction * example_count));
  if (config.holdout_fraction > 0 && heldout == 0 && example_count > 1) heldout = 1;
  const std::size_t train_n = example_count - heldout;
  if (train_n == 0) throw Error("no_labels", "no training examples left after the held-out split");

  const bool pooled = classifier.config().kind == ControlKind::SemanticContent;
  AdamW opt(classifier.parameters());
  Rng rng(derive_seed(config.seed, 2));
  std::uniform_int_distribution<std::size_t> pick(0, train_n - 1);
  for (int step = 0; step < config.steps; ++step) {
    std::vector<LabeledLatent> batch;
    for (int b = 0; b < config.batch_size; ++b) batch.push_back(source(order[pick(rng)], rng));
    std::vector<int> lengths, steps, targets;
    std::vector<Real> weights;
    Eigen::Index rows = 0;
    for (const auto& ex : batch) rows += ex.x.rows();
    Matrix x(rows, classifier.config().latent_dim);
    Eigen::Index r = 0;
    for (const auto& ex : batch) {
      x.middleRows(r, ex.x.rows()) = ex.x;
      r += ex.x.rows();
      lengths.push_back(static_cast<int>(ex.x.rows()));
      steps.push_back(ex.t);
      if (!pooled && ex.labels.size() != static_cast<std::size_t>(ex.x.rows()))
        throw Error("shape", "per-token labels must match the sequence length");
      for (int label : ex.labels) {
        targets.push_back(label);
        weights.push_back(static_cast<Real>(1.0 / (ex.labels.size() * batch.size())));
      }
    }
    ag::Graph g;
    const ag::Segments seg(lengths);
    ag::Var lp = classifier.log_probs(g, g.constant(x), seg, steps);
    // log_probs are already normalized, so CE over them equals CE over logits.
    ag::Var loss = g.weighted_cross_entropy(lp, targets, weights);
    opt.zero_grad();
    g.backward(loss);
    clip_grad_norm(opt.params(), 1.0);
    opt.step(config.learning_rate);
  }

  ClassifierReport report;
  report.train_examples = train_n;
  report.heldout_examples = heldout;
  std::size_t correct = 0, total = 0;
  for (std::size_t i = train_n; i < example_count; ++i) {
    Rng eval_rng(derive_seed(config.seed, 1000 + order[i]));
    const auto [c, n] = score_example(classifier, source(order[i], eval_rng));
    correct += c;
    total += n;
  }
  report.heldout_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return report;
}

LatentClassifier train_latent_classifier(const Corpus& corpus, const Vocabulary& vocab, const Denoiser& model,
                                         const MaskPlanner& planner, ControlKind kind, const std::string& field,
                                         const PosTagger* tagger, const ClassifierConfig& shape,
                                         const ClassifierTrainConfig& config, ClassifierReport* report) {
  ClassifierConfig cc = shape;
  cc.kind = kind;
  cc.field = field;
  cc.latent_dim = model.config().latent_dim;
  cc.steps = model.config().steps;
  cc.max_length = model.config().max_length;

  std::vector<std::vector<int>> labels(corpus.size());
  if (kind == ControlKind::SemanticContent) {
    std::set<std::string> values;
    for (const auto& ex : corpus.examples()) {
      auto it = ex.attributes.find(field);
      if (it != ex.attributes.end()) values.insert(it->second);
    }
    if (values.empty()) throw Error("no_labels", "no sentence carries attribute '" + field + "'");
    cc.labels = {"<none>"};
    cc.labels.insert(cc.labels.end(), values.begin(), values.end());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      auto it = corpus.example(i).attributes.find(field);
      const auto pos = it == corpus.example(i).attributes.end()
                           ? cc.labels.begin()
                           : std::find(cc.labels.begin(), cc.labels.end(), it->second);
      labels[i] = {static_cast<int>(pos - cc.labels.begin())};
    }
  } else if (kind == ControlKind::POS) {
    if (!tagger) throw Error("config", "pos classifier needs a tagger");
    cc.labels = tagger->tagset();
    for (std::size_t i = 0; i < corpus.size(); ++i)
      for (const auto& tag : tagger->tag_sequence(corpus.sentence(i), vocab))
        labels[i].push_back(static_cast<int>(std::find(cc.labels.begin(), cc.labels.end(), tag) - cc.labels.begin()));
  } else {
    throw Error("config", "length control needs no classifier");
  }
  if (corpus.empty()) throw Error("no_labels", "empty corpus");

  std::vector<LatentSequence> x0;
  std::vector<MaskState> masks;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    x0.push_back(model.embed(corpus.sentence(i)));
    masks.push_back(planner.plan(corpus.sentence(i), i, 0));
  }
  const NoiseSchedule schedule = planner.schedule().build();
  const int steps = schedule.steps();
  LatentSource source = [&](std::size_t i, Rng& rng) {
    // The guided sampler queries at t - 1 in [0, T - 1].
    std::uniform_int_distribution<int> pick_t(0, steps - 1);
    const int t = pick_t(rng);
    return LabeledLatent{q_sample(x0[i], t, masks[i], schedule, rng).values, t, labels[i]};
  };
  LatentClassifier clf(cc, derive_seed(config.seed, 3));
  const ClassifierReport r = fit_classifier(clf, corpus.size(), source, config);
  if (report) *report = r;
  return clf;
}

void GuidanceConfig::validate() const {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw Error("config", "lambda must be finite and non-negative");
  if (updates < 0) throw Error("config", "guidance updates must be non-negative");
  if (!(step_size > 0) || !std::isfinite(step_size)) throw Error("config", "guidance step size must be positive");
  if (candidates < 1) throw Error("config", "candidate count must be positive");
}

nlohmann::json GuidanceConfig::to_json() const {
  return {{"lambda", lambda},
          {"updates", updates},
          {"step_size", step_size},
          {"candidates", candidates},
          {"stochastic", stochastic},
          {"soft_estimate", soft_estimate},
          {"optimizer", optimizer == GuidanceOptimizer::Adam ? "adam" : "sgd"},
          {"reverse", reverse == ReverseMode::Renoise ? "renoise" : "direct"}};
}

GuidanceConfig GuidanceConfig::from_json(const nlohmann::json& j) {
  GuidanceConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.updates = j.value("updates", c.updates);
  c.step_size = j.value("step_size", c.step_size);
  c.candidates = j.value("candidates", c.candidates);
  c.stochastic = j.value("stochastic", c.stochastic);
  c.soft_estimate = j.value("soft_estimate", c.soft_estimate);
  const std::string opt = j.value("optimizer", std::string("adam"));
  if (opt == "adam") c.optimizer = GuidanceOptimizer::Adam;
  else if (opt == "sgd") c.optimizer = GuidanceOptimizer::Sgd;
  else throw Error("config", "guidance optimizer must be adam or sgd");
  const std::string rev = j.value("reverse", std::string("renoise"));
  if (rev == "renoise") c.reverse = ReverseMode::Renoise;
  else if (rev == "direct") c.reverse = ReverseMode::Direct;
  else throw Error("config", "reverse mode must be renoise or direct");
  c.validate();
  return c;
}

std::vector<int> content_argmax(const Matrix& logits) {
  if (logits.cols() <= kUnkId + 1) throw Error("shape", "no ordinary tokens in the vocabulary");
  std::vector<int> out = argmax_rows(logits.rightCols(logits.cols() - (kUnkId + 1)));
  for (int& id : out) id += kUnkId + 1;
  return out;
}

TokenSequence nearest_tokens(const Denoiser& model, const Matrix& x) {
  const Matrix& table = model.embedding().table.value();
  if (x.cols() != table.cols()) throw Error("shape", "latent width mismatch");
  // argmin ||x - e||^2 == argmax (x.e - |e|^2 / 2)
  Matrix scores = x * table.transpose();
  const Matrix half_norms = Real(0.5) * table.rowwise().squaredNorm().transpose();
  scores.rowwise() -= half_norms.row(0);
  TokenSequence out;
  out.ids = content_argmax(scores);
  return out;
}

namespace {

struct ReverseOutput {
  LatentSequence latent;
  std::vector<int> readout;  // argmax of f over the transition output, MASK included
};

ReverseOutput reverse_core(const LatentSequence& x_t, int t, const Denoiser& model, const NoiseSchedule& schedule,
                           const GuidanceConfig& config, Rng& rng, const MaskPlanner* planner) {
  if (t < 1 || t > schedule.steps()) throw Error("range", "reverse step outside [1, T]");
  ReverseOutput out{model.transition(x_t, t), {}};
  const Matrix logits = model.project_logits(out.latent);
  out.readout = argmax_rows(logits);
  if (config.reverse == ReverseMode::Direct) {
    if (config.stochastic && t > 1)
      out.latent.values += normal_matrix(out.latent.values.rows(), out.latent.values.cols(), rng,
                                         std::sqrt(schedule.beta(t)));
    check_finite(out.latent.values, "reverse step");
    return out;
  }

  TokenSequence estimate;
  estimate.ids = content_argmax(logits);
  Matrix e0 = model.embed(estimate).values;
  if (config.soft_estimate) {
    const Matrix& table = model.embedding().table.value();
    const int c0 = kUnkId + 1;
    Matrix lp = ag::log_softmax_rows(logits.rightCols(logits.cols() - c0));
    Matrix p = lp.array().exp().matrix();
    e0 = p * table.bottomRows(table.rows() - c0);
  }
  const std::size_t l = estimate.ids.size();
  const MaskState mask = planner ? planner->plan(estimate) : uniform_mask_state(l, schedule.steps());
  const auto r_now = retention(mask, t, schedule);
  const auto r_prev = retention(mask, t - 1, schedule);
  Matrix& x = out.latent.values;
  x = e0;
  for (std::size_t i = 0; i < l; ++i) {
    if (r_prev[i] >= 1.0) continue;
    const auto row = static_cast<Eigen::Index>(i);
    if (config.stochastic) {
      // Posterior q(x_{t-1} | x_t, x0 = e0) of the per-token forward chain.
      const double a = r_now[i] / r_prev[i];
      const double b = 1.0 - a;
      if (b <= 0) {
        x.row(row) = x_t.values.row(row);
        continue;
      }
      const double c0 = std::sqrt(r_prev[i]) * b / (1.0 - r_now[i]);
      const double ct = std::sqrt(a) * (1.0 - r_prev[i]) / (1.0 - r_now[i]);
      const double var = (1.0 - r_prev[i]) / (1.0 - r_now[i]) * b;
      x.row(row) = static_cast<Real>(c0) * e0.row(row) + static_cast<Real>(ct) * x_t.values.row(row) +
                   static_cast<Real>(std::sqrt(var)) * normal_matrix(1, x.cols(), rng);
      continue;
    }
    Matrix eps = r_now[i] >= 1.0 ? Matrix::Zero(1, x.cols())
                                 : Matrix((x_t.values.row(row) - static_cast<Real>(std::sqrt(r_now[i])) * e0.row(row)) /
                                          static_cast<Real>(std::sqrt(1.0 - r_now[i])));
    x.row(row) = static_cast<Real>(std::sqrt(r_prev[i])) * e0.row(row) +
                 static_cast<Real>(std::sqrt(1.0 - r_prev[i])) * eps;
  }
  check_finite(x, "reverse step");
  return out;
}

ReverseOutput guided_core(const LatentSequence& x_t, int t, const Denoiser& model, const NoiseSchedule& schedule,
                          const LatentClassifier* classifier, const ControlSpec* control,
                          const GuidanceConfig& config, Rng& rng, const MaskPlanner* planner) {
  ReverseOutput out = reverse_core(x_t, t, model, schedule, config, rng, planner);
  if (!classifier || !control || control->kind == ControlKind::Length || config.updates == 0) return out;
  if (classifier->config().kind != control->kind)
    throw Error("control", "classifier does not match the control kind");
  const Matrix mu = out.latent.values;
  Matrix& x = out.latent.values;
  Matrix m = Matrix::Zero(x.rows(), x.cols()), v = Matrix::Zero(x.rows(), x.cols());
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int k = 1; k <= config.updates; ++k) {
    const Matrix grad = guidance_gradient(x, mu, t, schedule, config.lambda, *classifier, *control);
    if (config.optimizer == GuidanceOptimizer::Sgd) {
      x += static_cast<Real>(config.step_size) * grad;
    } else {
      m = static_cast<Real>(b1) * m + static_cast<Real>(1 - b1) * grad;
      v = static_cast<Real>(b2) * v + static_cast<Real>(1 - b2) * grad.cwiseProduct(grad);
      const Real mc = static_cast<Real>(1 - std::pow(b1, k));
      const Real vc = static_cast<Real>(1 - std::pow(b2, k));
      x.array() += static_cast<Real>(config.step_size) * (m.array() / mc) /
                   ((v.array() / vc).sqrt() + static_cast<Real>(eps));
    }
  }
  check_finite(x, "guided latent");
  return out;
}

}  // namespace

LatentSequence reverse_step(const LatentSequence& x_t, int t, const Denoiser& model, const NoiseSchedule& schedule,
                            const GuidanceConfig& config, Rng& rng, const MaskPlanner* planner) {
  return reverse_core(x_t, t, model, schedule, config, rng, planner).latent;
}

Matrix fluency_gradient(const Matrix& x, const Matrix& mu, double beta) {
  if (!(beta > 0)) throw Error("range", "beta must be positive");
  return (mu - x) / static_cast<Real>(beta);
}

Matrix guidance_gradient(const Matrix& x, const Matrix& mu, int t, const NoiseSchedule& schedule, double lambda,
                         const LatentClassifier& classifier, const ControlSpec& control) {
  return static_cast<Real>(lambda) * fluency_gradient(x, mu, schedule.beta(t)) +
         classifier.input_gradient(x, t - 1, control);
}

LatentSequence guided_step(const LatentSequence& x_t, int t, const Denoiser& model, const NoiseSchedule& schedule,
                           const LatentClassifier* classifier, const ControlSpec* control,
                           const GuidanceConfig& config, Rng& rng, const MaskPlanner* planner) {
  return guided_core(x_t, t, model, schedule, classifier, control, config, rng, planner).latent;
}

int control_length(const ControlSpec* control, int fallback) {
  if (control && control->kind == ControlKind::Length) return control->length;
  if (control && control->kind == ControlKind::POS) return static_cast<int>(control->tags.size());
  return fallback;
}

TokenSequence sample(const Denoiser& model, const NoiseSchedule& schedule, int length, const ControlSpec* control,
                     const LatentClassifier* classifier, const GuidanceConfig& config, Rng& rng,
                     const MaskPlanner* planner, SampleTrace* trace) {
  config.validate();
  if (control) control->validate();
  length = control_length(control, length);
  if (length < 1 || length > model.config().max_length) throw Error("range", "sample length outside [1, max_length]");
  if (schedule.steps() != model.config().steps) throw Error("config", "schedule and model disagree on T");
  LatentSequence x{normal_matrix(length, model.config().latent_dim, rng), schedule.steps()};
  if (trace) trace->decoded.clear();
  for (int t = schedule.steps(); t >= 1; --t) {
    ReverseOutput step = guided_core(x, t, model, schedule, classifier, control, config, rng, planner);
    if (trace) trace->decoded.push_back(std::move(step.readout));
    x = std::move(step.latent);
  }
  return config.reverse == ReverseMode::Direct ? model.decode(x) : nearest_tokens(model, x.values);
}

std::vector<TokenSequence> sample_candidates(const Denoiser& model, const NoiseSchedule& schedule, int length,
                                             const ControlSpec* control, const LatentClassifier* classifier,
                                             const GuidanceConfig& config, std::uint64_t seed, int count,
                                             int threads, const MaskPlanner* planner) {
  if (count < 1) throw Error("config", "candidate count must be positive");
  std::vector<TokenSequence> out(static_cast<std::size_t>(count));
  auto run = [&](int i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out[static_cast<std::size_t>(i)] = sample(model, schedule, length, control, classifier, config, rng, planner);
  };
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    for (int i = 0; i < count; ++i) run(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += threads) run(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::size_t edit_distance(std::span<const int> a, std::span<const int> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double sentence_bleu2(const TokenSequence& hypothesis, const TokenSequence& reference) {
  const auto& h = hypothesis.ids;
  const auto& r = reference.ids;
  if (h.empty()) return 0.0;
  auto ngram_precision = [&](std::size_t n) {
    std::map<std::vector<int>, int> ref_counts, hyp_counts;
    for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[{r.begin() + i, r.begin() + i + n}];
    for (std::size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[{h.begin() + i, h.begin() + i + n}];
    int matched = 0, total = 0;
    for (const auto& [gram, c] : hyp_counts) {
      total += c;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(c, it->second);
    }
    // Unigrams are unsmoothed; higher orders get add-one smoothing.
    if (n == 1) return total ? static_cast<double>(matched) / total : 0.0;
    return (matched + 1.0) / (total + 1.0);
  };
  const double p1 = ngram_precision(1);
  const double p2 = ngram_precision(2);
  if (p1 <= 0) return 0.0;
  const double bp = h.size() >= r.size() ? 1.0 : std::exp(1.0 - static_cast<double>(r.size()) / h.size());
  return bp * std::exp(0.5 * (std::log(p1) + std::log(p2)));
}

double bleu2_loss(const TokenSequence& hypothesis, const TokenSequence& reference) {
  if (hypothesis.size() < 2 || reference.size() < 2) {
    const std::size_t denom = std::max<std::size_t>({hypothesis.size(), reference.size(), 1});
    return static_cast<double>(edit_distance(hypothesis.ids, reference.ids)) / static_cast<double>(denom);
  }
  return 1.0 - sentence_bleu2(hypothesis, reference);
}

MbrResult mbr_select(std::span<const TokenSequence> candidates, const PairLoss& loss) {
  if (candidates.empty()) throw Error("empty", "mbr needs at least one candidate");
  MbrResult res;
  res.risk.assign(candidates.size(), 0.0);
  if (candidates.size() == 1) return res;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    double total = 0;
    for (std::size_t o = 0; o < candidates.size(); ++o)
      if (o != s) total += loss(candidates[s], candidates[o]);
    res.risk[s] = total / static_cast<double>(candidates.size() - 1);
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < candidates.size(); ++s)
    if (res.risk[s] < best) {
      best = res.risk[s];
      res.index = s;
    }
  return res;
}

}  // namespace mdlm
