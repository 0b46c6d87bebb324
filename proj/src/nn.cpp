// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/nn.hpp"

#include <cmath>

namespace mdlm::inline MDLM_ABI::nn {

Linear::Linear(const std::string& name, int in, int out, Rng& rng)
    : weight(name + ".weight", normal_matrix(in, out, rng, 1.0 / std::sqrt(static_cast<double>(in)))),
      bias(name + ".bias", Matrix::Zero(1, out)) {}

Var Linear::operator()(Graph& g, const Var& x) const {
  return g.add_row(g.matmul(x, g.param(weight)), g.param(bias));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, int width)
    : gain(name + ".gain", Matrix::Ones(1, width)), bias(name + ".bias", Matrix::Zero(1, width)) {}

Var LayerNorm::operator()(Graph& g, const Var& x) const { return g.layer_norm(x, g.param(gain), g.param(bias)); }

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

TransformerBlock::TransformerBlock(const std::string& name, int width, int heads, int ffn_width, bool causal,
                                   Rng& rng)
    : heads_(heads),
      causal_(causal),
      ln_attn_(name + ".ln_attn", width),
      qkv_(name + ".qkv", width, 3 * width, rng),
      proj_(name + ".proj", width, width, rng),
      ln_ffn_(name + ".ln_ffn", width),
      ffn_in_(name + ".ffn_in", width, ffn_width, rng),
      ffn_out_(name + ".ffn_out", ffn_width, width, rng) {}

Var TransformerBlock::operator()(Graph& g, const Var& x, const Segments& segments, Real dropout,
                                 Rng* dropout_rng) const {
  Var attn = g.attention(qkv_(g, ln_attn_(g, x)), segments, heads_, causal_);
  Var h = g.add(x, g.dropout(proj_(g, attn), dropout, dropout_rng));
  Var ff = ffn_out_(g, g.gelu(ffn_in_(g, ln_ffn_(g, h))));
  return g.add(h, g.dropout(ff, dropout, dropout_rng));
}

void TransformerBlock::collect(std::vector<Parameter*>& out) {
  ln_attn_.collect(out);
  qkv_.collect(out);
  proj_.collect(out);
  ln_ffn_.collect(out);
  ffn_in_.collect(out);
  ffn_out_.collect(out);
}

std::size_t parameter_count(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += static_cast<std::size_t>(p->value().size());
  return n;
}

}  // namespace mdlm::nn
