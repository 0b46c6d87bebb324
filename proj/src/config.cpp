// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "mdlm/error.hpp"

namespace mdlm::inline MDLM_ABI {

nlohmann::json RunConfig::to_json() const {
  return {
      {"output_dir", output_dir.string()},
      {"strategy", to_string(strategy)},
      {"seed", seed},
      {"data",
       {{"train", train_corpus.string()},
        {"validation", validation_corpus.string()},
        {"pos_lexicon", pos_lexicon.string()},
        {"min_count", min_count},
        {"max_length", max_length}}},
      {"model", model.to_json()},
      {"schedule", schedule.to_json()},
      {"train", train.to_json()},
      {"guidance", guidance.to_json()},
      {"classifier",
       {{"width", classifier.width},
        {"heads", classifier.heads},
        {"steps", classifier_train.steps},
        {"batch_size", classifier_train.batch_size},
        {"learning_rate", classifier_train.learning_rate},
        {"holdout_fraction", classifier_train.holdout_fraction}}},
      {"teacher", teacher.to_json()},
      {"eval", {{"field", field}, {"targets", targets}, {"samples_per_target", samples_per_target}}},
  };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("config", "configuration must be an object");
  RunConfig c;
  try {
    c.output_dir = j.value("output_dir", c.output_dir.string());
    if (j.contains("strategy")) c.strategy = parse_noise_strategy(j.at("strategy").get<std::string>());
    c.seed = j.value("seed", c.seed);
    const nlohmann::json empty = nlohmann::json::object();
    const auto section = [&](const char* name) -> const nlohmann::json& {
      if (!j.contains(name)) return empty;
      if (!j.at(name).is_object()) throw Error("config", std::string("[") + name + "] must be a table");
      return j.at(name);
    };
    const auto& data = section("data");
    c.train_corpus = data.value("train", std::string());
    c.validation_corpus = data.value("validation", std::string());
    c.pos_lexicon = data.value("pos_lexicon", std::string());
    c.min_count = data.value("min_count", c.min_count);
    c.max_length = data.value("max_length", c.max_length);
    c.model = DenoiserConfig::from_json(section("model"));
    c.schedule = ScheduleConfig::from_json(section("schedule"));
    c.train = TrainConfig::from_json(section("train"));
    c.guidance = GuidanceConfig::from_json(section("guidance"));
    const auto& clf = section("classifier");
    c.classifier.width = clf.value("width", c.classifier.width);
    c.classifier.heads = clf.value("heads", c.classifier.heads);
    c.classifier_train.steps = clf.value("steps", c.classifier_train.steps);
    c.classifier_train.batch_size = clf.value("batch_size", c.classifier_train.batch_size);
    c.classifier_train.learning_rate = clf.value("learning_rate", c.classifier_train.learning_rate);
    c.classifier_train.holdout_fraction = clf.value("holdout_fraction", c.classifier_train.holdout_fraction);
    c.teacher = TeacherConfig::from_json(section("teacher"));
    const auto& ev = section("eval");
    c.field = ev.value("field", c.field);
    c.targets = ev.value("targets", c.targets);
    c.samples_per_target = ev.value("samples_per_target", c.samples_per_target);
  } catch (const nlohmann::json::exception& e) {
    throw Error("config", std::string("bad configuration value: ") + e.what());
  }
  c.resolve();
  return c;
}

RunConfig RunConfig::merged(const nlohmann::json& patch) const {
  nlohmann::json j = to_json();
  j.merge_patch(patch);
  return from_json(j);
}

void RunConfig::resolve() {
  model.steps = schedule.steps;
  model.max_length = max_length;
  teacher.max_length = max_length;
  classifier.max_length = max_length;
  train.seed = seed;
  classifier_train.seed = derive_seed(seed, 41);
  teacher.seed = derive_seed(seed, 31);
  if (min_count < 1) throw Error("config", "min_count must be at least 1");
  if (max_length < 1) throw Error("config", "max_length must be positive");
  if (targets < 1 || samples_per_target < 1) throw Error("config", "eval targets and samples must be positive");
  train.validate();
  guidance.validate();
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("config", path.string() + ": " + e.what());
    }
  }
  try {
    const toml::table table = toml::parse(buf.str(), path.string());
    std::ostringstream js;
    js << toml::json_formatter{table};
    return nlohmann::json::parse(js.str());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
        << e.description();
    throw Error("config", msg.str());
  }
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir) {
  const char* root = std::getenv("MDLM_OUTPUT_ROOT");
  if (!root || !*root || dir.is_absolute()) return dir;
  return std::filesystem::path(root) / dir;
}

}  // namespace mdlm
