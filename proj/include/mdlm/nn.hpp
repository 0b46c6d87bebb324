// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mdlm/abi.hpp"

#include <string>
#include <vector>

#include "mdlm/autograd.hpp"

namespace mdlm::inline MDLM_ABI::nn {

using ag::Graph;
using ag::Parameter;
using ag::Segments;
using ag::Var;

class Linear {
 public:
  Linear() = default;
  /// Weights ~ N(0, 1/in), bias zero.
  Linear(const std::string& name, int in, int out, Rng& rng);

  Var operator()(Graph& g, const Var& x) const;
  void collect(std::vector<Parameter*>& out);

  Parameter weight;  // in x out
  Parameter bias;    // 1 x out
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, int width);

  Var operator()(Graph& g, const Var& x) const;
  void collect(std::vector<Parameter*>& out);

  Parameter gain;
  Parameter bias;
};

/// Pre-norm block: x + Attn(LN(x)), then h + FFN(LN(h)) with a GELU FFN.
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(const std::string& name, int width, int heads, int ffn_width, bool causal, Rng& rng);

  /// dropout_rng == nullptr disables dropout (inference).
  Var operator()(Graph& g, const Var& x, const Segments& segments, Real dropout, Rng* dropout_rng) const;
  void collect(std::vector<Parameter*>& out);

 private:
  int heads_ = 1;
  bool causal_ = false;
  LayerNorm ln_attn_;
  Linear qkv_;
  Linear proj_;
  LayerNorm ln_ffn_;
  Linear ffn_in_;
  Linear ffn_out_;
};

std::size_t parameter_count(const std::vector<Parameter*>& params);

}  // namespace mdlm::nn
