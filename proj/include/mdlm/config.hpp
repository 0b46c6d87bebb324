// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration shared by every command. A config file (TOML or JSON)
// is merged over the defaults, command-line overrides are merged over that,
// and the resolved result is echoed as JSON next to each run's outputs.

#pragma once

#include "mdlm/abi.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "mdlm/denoiser.hpp"
#include "mdlm/eval.hpp"
#include "mdlm/guidance.hpp"
#include "mdlm/schedule.hpp"
#include "mdlm/strategy.hpp"
#include "mdlm/training.hpp"

namespace mdlm::inline MDLM_ABI {

struct RunConfig {
  // [data]
  std::filesystem::path train_corpus;
  std::filesystem::path validation_corpus;
  std::filesystem::path pos_lexicon;
  int min_count = 1;
  int max_length = kDefaultMaxLength;
  // top level
  std::filesystem::path output_dir = "runs/default";
  NoiseStrategy strategy = NoiseStrategy::MaskEntropyRel;
  std::uint64_t seed = 0;
  // sections
  DenoiserConfig model;
  ScheduleConfig schedule;
  TrainConfig train;
  GuidanceConfig guidance;
  ClassifierConfig classifier;  // width and heads only; the rest comes from data
  ClassifierTrainConfig classifier_train;
  TeacherConfig teacher;
  // [eval]
  std::string field = "food";
  int targets = 20;
  int samples_per_target = 5;

  nlohmann::json to_json() const;
  /// Reads the sectioned layout produced by to_json; absent keys keep defaults.
  static RunConfig from_json(const nlohmann::json& j);
  /// Applies a JSON merge patch over the current values.
  RunConfig merged(const nlohmann::json& patch) const;
  /// Model and schedule share T and max_length; the seed feeds every stream.
  void resolve();
};

/// Parses a .toml or .json file into JSON. Throws Error("config") with the
/// parser's location on malformed input.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// MDLM_OUTPUT_ROOT, when set, prefixes relative output directories.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

}  // namespace mdlm
