// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/denoiser.hpp"

#include <string>

#include "mdlm/error.hpp"

namespace mdlm::inline MDLM_ABI {

nlohmann::json DenoiserConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"latent_dim", latent_dim}, {"width", width},
          {"layers", layers},         {"heads", heads},           {"ffn_mult", ffn_mult},
          {"dropout", dropout},       {"max_length", max_length}, {"steps", steps}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j) {
  DenoiserConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.width = j.value("width", c.width);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  c.dropout = j.value("dropout", c.dropout);
  c.max_length = j.value("max_length", c.max_length);
  c.steps = j.value("steps", c.steps);
  return c;
}

EmbeddingTable::EmbeddingTable(int vocab_size, int dim, Rng& rng)
    : table("embedding.table", normal_matrix(vocab_size, dim, rng)) {}

Var EmbeddingTable::embed(Graph& g, std::span<const int> ids) const {
  for (int id : ids)
    if (id < 0 || id >= table.value().rows())
      throw Error("range", "token id " + std::to_string(id) + " outside embedding table");
  return g.gather_rows(g.param(table), ids);
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error("non_finite", std::string(what) + " contains non-finite values");
}

Denoiser::Denoiser(const DenoiserConfig& config, std::uint64_t seed) : config_(config) {
  if (config.vocab_size < 3) throw Error("config", "denoiser needs a vocabulary");
  if (config.width % config.heads != 0) throw Error("config", "heads must divide width");
  if (config.layers < 1 || config.latent_dim < 1 || config.steps < 1 || config.max_length < 1)
    throw Error("config", "denoiser dimensions must be positive");
  Rng rng(seed);
  embedding_ = EmbeddingTable(config.vocab_size, config.latent_dim, rng);
  in_proj_ = nn::Linear("in_proj", config.latent_dim, config.width, rng);
  position_ = Parameter("position", normal_matrix(config.max_length, config.width, rng, 0.02));
  timestep_ = Parameter("timestep", normal_matrix(config.steps + 1, config.width, rng, 0.02));
  for (int i = 0; i < config.layers; ++i)
    blocks_.emplace_back("block" + std::to_string(i), config.width, config.heads, config.ffn_mult * config.width,
                         /*causal=*/false, rng);
  final_norm_ = nn::LayerNorm("final_norm", config.width);
  out_proj_ = nn::Linear("out_proj", config.width, config.latent_dim, rng);
  logits_ = nn::Linear("logits", config.latent_dim, config.vocab_size, rng);
}

Var Denoiser::transition(Graph& g, const Var& x_t, const Segments& segments, std::span<const int> steps,
                         Rng* dropout_rng) const {
  if (steps.size() != segments.count()) throw Error("shape", "one diffusion step per segment required");
  std::vector<int> positions, times;
  positions.reserve(static_cast<std::size_t>(segments.total_rows()));
  times.reserve(positions.capacity());
  for (std::size_t s = 0; s < segments.count(); ++s) {
    if (steps[s] < 1 || steps[s] > config_.steps) throw Error("range", "transition step outside [1, T]");
    if (segments.length(s) > config_.max_length) throw Error("range", "sequence longer than max_length");
    for (int i = 0; i < segments.length(s); ++i) {
      positions.push_back(i);
      times.push_back(steps[s]);
    }
  }
  const Real drop = dropout_rng ? static_cast<Real>(config_.dropout) : Real(0);
  Var h = in_proj_(g, x_t);
  h = g.add(h, g.gather_rows(g.param(position_), positions));
  h = g.add(h, g.gather_rows(g.param(timestep_), times));
  h = g.dropout(h, drop, dropout_rng);
  for (const auto& block : blocks_) h = block(g, h, segments, drop, dropout_rng);
  return out_proj_(g, final_norm_(g, h));
}

Var Denoiser::project_logits(Graph& g, const Var& x) const { return logits_(g, x); }

LatentSequence Denoiser::embed(const TokenSequence& d) const {
  Graph g(false);
  return {embedding_.embed(g, d.ids).value(), 0};
}

LatentSequence Denoiser::transition(const LatentSequence& x_t, int t) const {
  check_finite(x_t.values, "transition input");
  if (x_t.values.cols() != config_.latent_dim) throw Error("shape", "latent width mismatch");
  Graph g(false);
  const Segments seg({static_cast<int>(x_t.values.rows())});
  const int steps[] = {t};
  return {transition(g, g.constant(x_t.values), seg, steps, nullptr).value(), t - 1};
}

Matrix Denoiser::project_logits(const LatentSequence& x) const {
  Graph g(false);
  return project_logits(g, g.constant(x.values)).value();
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

TokenSequence Denoiser::decode(const LatentSequence& x) const {
  TokenSequence seq;
  seq.ids = argmax_rows(project_logits(x));
  return seq;
}

std::vector<Parameter*> Denoiser::parameters() {
  std::vector<Parameter*> out{&embedding_.table};
  in_proj_.collect(out);
  out.push_back(&position_);
  out.push_back(&timestep_);
  for (auto& block : blocks_) block.collect(out);
  final_norm_.collect(out);
  out_proj_.collect(out);
  logits_.collect(out);
  return out;
}

std::vector<const Parameter*> Denoiser::parameters() const {
  auto mutable_params = const_cast<Denoiser*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t Denoiser::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value().size());
  return n;
}

}  // namespace mdlm
