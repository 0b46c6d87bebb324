// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <limits>
#include <set>
#include <string>

#include "mdlm/checkpoint.hpp"
#include "mdlm/denoiser.hpp"
#include "mdlm/error.hpp"
#include "support/fixtures.hpp"
#include "support/models.hpp"

using namespace mdlm;
using mdlm::testing::micro_config;
using mdlm::testing::ScratchDir;

TEST_CASE("denoiser shapes and value-path agreement with the graph path") {
  const Denoiser model(micro_config(12, 20), 1);
  TokenSequence d;
  d.ids = {3, 4, 5, 11};
  const LatentSequence x0 = model.embed(d);
  CHECK(x0.values.rows() == 4);
  CHECK(x0.values.cols() == 6);
  const LatentSequence x1 = model.transition(x0, 7);
  CHECK(x1.step == 6);
  CHECK(x1.values.rows() == 4);
  CHECK(x1.values.cols() == 6);
  CHECK(model.project_logits(x1).cols() == 12);
  CHECK(model.decode(x1).size() == 4);

  // Packed batches: the same sequence twice gives the same rows.
  Graph g(false);
  Matrix packed(8, 6);
  packed << x0.values, x0.values;
  const std::vector<int> steps = {7, 7};
  const Matrix out = model.transition(g, g.constant(packed), Segments({4, 4}), steps, nullptr).value();
  CHECK((out.topRows(4) - x1.values).cwiseAbs().maxCoeff() <= Real(1e-5));
  CHECK((out.bottomRows(4) - x1.values).cwiseAbs().maxCoeff() <= Real(1e-5));
}

TEST_CASE("denoiser is deterministic in its seed") {
  const Denoiser a(micro_config(12, 20), 5), b(micro_config(12, 20), 5), c(micro_config(12, 20), 6);
  CHECK(a.embedding().table.value() == b.embedding().table.value());
  CHECK(a.embedding().table.value() != c.embedding().table.value());
  CHECK(a.parameter_count() == b.parameter_count());
}

TEST_CASE("denoiser validates configuration and inputs") {
  DenoiserConfig bad = micro_config(12, 20);
  bad.heads = 3;
  CHECK_THROWS_AS(Denoiser(bad, 1), Error);
  bad = micro_config(2, 20);
  CHECK_THROWS_AS(Denoiser(bad, 1), Error);
  const Denoiser model(micro_config(12, 20), 1);
  TokenSequence d;
  d.ids = {3, 40};
  CHECK_THROWS_AS(model.embed(d), Error);
  const LatentSequence x{Matrix::Zero(2, 6), 0};
  CHECK_THROWS_AS(model.transition(x, 0), Error);
  CHECK_THROWS_AS(model.transition(x, 21), Error);
  CHECK_THROWS_AS(model.transition(LatentSequence{Matrix::Zero(2, 5), 0}, 3), Error);
  Matrix nan = Matrix::Zero(2, 6);
  nan(0, 0) = std::numeric_limits<Real>::quiet_NaN();
  CHECK_THROWS_AS(model.transition(LatentSequence{nan, 0}, 3), Error);
}

TEST_CASE("parameter names are unique") {
  Denoiser model(micro_config(12, 20), 1);
  std::set<std::string> names;
  for (const Parameter* p : model.parameters()) CHECK(names.insert(p->name()).second);
}

TEST_CASE("denoiser config json round trip") {
  DenoiserConfig c = micro_config(30, 77, 5);
  c.dropout = 0.25;
  const DenoiserConfig d = DenoiserConfig::from_json(c.to_json());
  CHECK(d.to_json() == c.to_json());
}

TEST_CASE("model checkpoints round trip exactly") {
  ScratchDir dir("ckpt");
  const Vocabulary vocab = Vocabulary::build({"a b c d e f g h i"});
  ScheduleConfig sc;
  sc.steps = 20;
  Denoiser model(micro_config(vocab.size(), 20), 3);
  save_model(dir / "m.ckpt", model, vocab, sc, {{"strategy", "MaskEntropyRel"}});
  const ModelBundle bundle = load_model(dir / "m.ckpt");
  CHECK(bundle.vocab.hash() == vocab.hash());
  CHECK(bundle.schedule.steps == 20);
  CHECK(bundle.header.value("strategy", "") == "MaskEntropyRel");
  const auto a = model.parameters();
  const auto b = bundle.model.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name() == b[i]->name());
    CHECK(a[i]->value() == b[i]->value());
  }
}

TEST_CASE("checkpoint reader rejects foreign and damaged files") {
  ScratchDir dir("ckpt_bad");
  mdlm::testing::write_file(dir / "junk.ckpt", "definitely not a checkpoint");
  try {
    read_checkpoint(dir / "junk.ckpt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "checkpoint");
  }
  const Vocabulary vocab = Vocabulary::build({"a b"});
  ScheduleConfig sc;
  sc.steps = 20;
  const Denoiser model(micro_config(vocab.size(), 20), 3);
  save_model(dir / "m.ckpt", model, vocab, sc);
  const auto size = std::filesystem::file_size(dir / "m.ckpt");
  std::filesystem::resize_file(dir / "m.ckpt", size - 16);
  CHECK_THROWS_AS(load_model(dir / "m.ckpt"), Error);
  CHECK_THROWS_AS(load_model(dir / "missing.ckpt"), Error);

  // Tensors with the wrong shape are refused on assignment.
  Denoiser other(micro_config(vocab.size() + 1, 20), 3);
  save_model(dir / "o.ckpt", other, Vocabulary::build({"a b c"}), sc);
  const CheckpointFile file = read_checkpoint(dir / "o.ckpt");
  Denoiser target(micro_config(vocab.size(), 20), 3);
  CHECK_THROWS_AS(assign_parameters(file, target.parameters()), Error);
}
