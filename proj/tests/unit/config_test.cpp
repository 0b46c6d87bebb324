// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <string>

#include "mdlm/config.hpp"
#include "mdlm/error.hpp"
#include "support/fixtures.hpp"

using namespace mdlm;
using mdlm::testing::ScratchDir;
using mdlm::testing::write_file;

TEST_CASE("run config json round trip") {
  RunConfig c;
  c.seed = 17;
  c.strategy = NoiseStrategy::MaskPOS;
  c.schedule.steps = 40;
  c.train.steps = 33;
  c.train.warmup_steps = 3;
  c.guidance.lambda = 0.2;
  c.field = "area";
  c.resolve();
  const RunConfig d = RunConfig::from_json(c.to_json());
  CHECK(d.to_json() == c.to_json());
}

TEST_CASE("resolve ties the model to the schedule and the seed to every stream") {
  RunConfig c = RunConfig::from_json({{"seed", 5}, {"schedule", {{"T", 64}}}, {"data", {{"max_length", 20}}}});
  CHECK(c.model.steps == 64);
  CHECK(c.model.max_length == 20);
  CHECK(c.teacher.max_length == 20);
  CHECK(c.train.seed == 5);
  CHECK(c.classifier_train.seed == derive_seed(5, 41));
  CHECK(c.teacher.seed == derive_seed(5, 31));
}

TEST_CASE("merge patches override only what they name") {
  const RunConfig base = RunConfig::from_json({{"train", {{"steps", 10}, {"warmup_steps", 2}, {"batch_size", 4}}}});
  const RunConfig m = base.merged({{"train", {{"steps", 99}}}, {"seed", 3}});
  CHECK(m.train.steps == 99);
  CHECK(m.train.batch_size == 4);
  CHECK(m.seed == 3);
  CHECK(base.train.steps == 10);
}

TEST_CASE("TOML and JSON files parse to the same configuration") {
  ScratchDir dir("cfg");
  write_file(dir / "run.toml",
             "seed = 4\nstrategy = \"MaskRelevancy\"\n\n[train]\nsteps = 12\nwarmup_steps = 2\n\n[guidance]\nlambda = 0.5\n");
  write_file(dir / "run.json",
             R"({"seed": 4, "strategy": "MaskRelevancy", "train": {"steps": 12, "warmup_steps": 2}, "guidance": {"lambda": 0.5}})");
  const RunConfig a = RunConfig::from_json(read_config_file(dir / "run.toml"));
  const RunConfig b = RunConfig::from_json(read_config_file(dir / "run.json"));
  CHECK(a.to_json() == b.to_json());
  CHECK(a.strategy == NoiseStrategy::MaskRelevancy);
  CHECK(a.train.steps == 12);
}

TEST_CASE("malformed configs are reported with their location") {
  ScratchDir dir("cfg_bad");
  write_file(dir / "bad.toml", "seed = 4\n[train\nsteps = 1\n");
  try {
    read_config_file(dir / "bad.toml");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "config");
    CHECK(std::string(e.what()).find("bad.toml:2:") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::from_json({{"train", {{"steps", 10}}}}), Error);  // default warmup exceeds steps
  write_file(dir / "bad.json", "{\"seed\": }");
  CHECK_THROWS_AS(read_config_file(dir / "bad.json"), Error);
  CHECK_THROWS_AS(read_config_file(dir / "missing.toml"), Error);
  CHECK_THROWS_AS(RunConfig::from_json({{"train", 3}}), Error);
  CHECK_THROWS_AS(RunConfig::from_json({{"seed", "four"}}), Error);
  CHECK_THROWS_AS(RunConfig::from_json({{"strategy", "nope"}}), Error);
  CHECK_THROWS_AS(RunConfig::from_json({{"data", {{"min_count", 0}}}}), Error);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::array()), Error);
}

TEST_CASE("output root prefixes relative output directories") {
  ::setenv("MDLM_OUTPUT_ROOT", "/tmp/mdlm_root", 1);
  CHECK(resolve_output_dir("runs/a") == std::filesystem::path("/tmp/mdlm_root/runs/a"));
  CHECK(resolve_output_dir("/abs/b") == std::filesystem::path("/abs/b"));
  ::unsetenv("MDLM_OUTPUT_ROOT");
  CHECK(resolve_output_dir("runs/a") == std::filesystem::path("runs/a"));
}
