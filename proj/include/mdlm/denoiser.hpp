// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// The learnable pieces of the diffusion LM: token embedding e(.), the
// transformer transition (X_t, t) -> X_{t-1}, and the output projection f(.)
// from latents to vocabulary logits.

#pragma once

#include "mdlm/abi.hpp"

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "mdlm/autograd.hpp"
#include "mdlm/corpus.hpp"
#include "mdlm/nn.hpp"
#include "mdlm/schedule.hpp"

namespace mdlm::inline MDLM_ABI {

using ag::Graph;
using ag::Parameter;
using ag::Segments;
using ag::Var;

struct DenoiserConfig {
  int vocab_size = 0;
  int latent_dim = 128;  // h
  int width = 128;       // transformer model width
  int layers = 4;
  int heads = 4;
  int ffn_mult = 4;
  double dropout = 0.1;
  int max_length = kDefaultMaxLength;
  int steps = 500;  // T; sizes the timestep embedding

  nlohmann::json to_json() const;
  static DenoiserConfig from_json(const nlohmann::json& j);
};

/// Maps token ids to the initial latent X_0. A frozen pre-trained encoder
/// would implement this interface.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  virtual Var embed(Graph& g, std::span<const int> ids) const = 0;
};

class EmbeddingTable final : public EmbeddingProvider {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int vocab_size, int dim, Rng& rng);

  int dim() const override { return static_cast<int>(table.value().cols()); }
  /// Throws Error("range") for ids outside the table.
  Var embed(Graph& g, std::span<const int> ids) const override;

  Parameter table;  // V x h
};

class Denoiser {
 public:
  Denoiser(const DenoiserConfig& config, std::uint64_t seed);
  Denoiser(const Denoiser&) = delete;  // parameters are shared handles
  Denoiser& operator=(const Denoiser&) = delete;
  Denoiser(Denoiser&&) = default;
  Denoiser& operator=(Denoiser&&) = default;

  const DenoiserConfig& config() const { return config_; }
  EmbeddingTable& embedding() { return embedding_; }
  const EmbeddingTable& embedding() const { return embedding_; }

  Var embed(Graph& g, std::span<const int> ids) const { return embedding_.embed(g, ids); }
  /// Packed batch: rows of segment s are diffused to step steps[s].
  /// dropout_rng == nullptr runs in inference mode.
  Var transition(Graph& g, const Var& x_t, const Segments& segments, std::span<const int> steps,
                 Rng* dropout_rng) const;
  Var project_logits(Graph& g, const Var& x) const;

  LatentSequence embed(const TokenSequence& d) const;
  /// X_hat_{t-1} for one sequence, deterministic. Throws Error("range") for t
  /// outside [1, T] and Error("non_finite") for non-finite input.
  LatentSequence transition(const LatentSequence& x_t, int t) const;
  Matrix project_logits(const LatentSequence& x) const;
  /// Per-position argmax of the logits; ties go to the lowest id.
  TokenSequence decode(const LatentSequence& x) const;

  /// Fixed order; checkpoints and the optimizer rely on it.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;

 private:
  DenoiserConfig config_;
  EmbeddingTable embedding_;
  nn::Linear in_proj_;
  Parameter position_;  // max_length x width
  Parameter timestep_;  // (T + 1) x width
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm final_norm_;
  nn::Linear out_proj_;
  nn::Linear logits_;  // f: h -> V
};

/// Argmax per row; ties resolve to the lowest column.
std::vector<int> argmax_rows(const Matrix& logits);

void check_finite(const Matrix& m, const char* what);

}  // namespace mdlm
