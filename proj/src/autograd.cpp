// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/autograd.hpp"

#include <cmath>
#include <limits>

#include "mdlm/error.hpp"

namespace mdlm::inline MDLM_ABI::ag {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error("shape", std::string("autograd: ") + what);
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Real mx = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace

Parameter::Parameter(std::string name, Matrix init)
    : name_(std::move(name)), node_(std::make_shared<Node>()) {
  node_->value = std::move(init);
  node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
}

Segments::Segments(std::vector<int> lengths) : lengths_(std::move(lengths)) {
  offsets_.reserve(lengths_.size());
  int offset = 0;
  for (int len : lengths_) {
    require(len > 0, "segment length must be positive");
    offsets_.push_back(offset);
    offset += len;
  }
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Real mx = logits.row(r).maxCoeff();
    const Real lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

Var Graph::make(Matrix value, bool tracked, std::function<void()> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->backward = std::move(backward);
  const bool keep = record_ && tracked;
  if (keep) tape_.push_back(node);
  return Var(std::move(node), keep);
}

bool Graph::any_tracked(std::initializer_list<const Var*> vars) const {
  if (!record_) return false;
  for (const Var* v : vars) {
    if (v->tracked()) return true;
  }
  return false;
}

Var Graph::constant(Matrix value) { return make(std::move(value), false); }

Var Graph::input(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node), record_);
}

Var Graph::param(const Parameter& p) { return Var(p.shared(), record_ && train_params_); }

Var Graph::matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul inner dimension");
  Var out = make(a.value() * b.value(), any_tracked({&a, &b}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    auto bn = b.shared();
    const bool ta = a.tracked(), tb = b.tracked();
    o->backward = [o, an, bn, ta, tb] {
      if (ta) an->grad_buffer().noalias() += o->grad * bn->value.transpose();
      if (tb) bn->grad_buffer().noalias() += an->value.transpose() * o->grad;
    };
  }
  return out;
}

Var Graph::add(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add shape");
  Var out = make(a.value() + b.value(), any_tracked({&a, &b}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    auto bn = b.shared();
    const bool ta = a.tracked(), tb = b.tracked();
    o->backward = [o, an, bn, ta, tb] {
      if (ta) an->grad_buffer() += o->grad;
      if (tb) bn->grad_buffer() += o->grad;
    };
  }
  return out;
}

Var Graph::sub(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub shape");
  Var out = make(a.value() - b.value(), any_tracked({&a, &b}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    auto bn = b.shared();
    const bool ta = a.tracked(), tb = b.tracked();
    o->backward = [o, an, bn, ta, tb] {
      if (ta) an->grad_buffer() += o->grad;
      if (tb) bn->grad_buffer() -= o->grad;
    };
  }
  return out;
}

Var Graph::mul(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul shape");
  Var out = make(a.value().cwiseProduct(b.value()), any_tracked({&a, &b}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    auto bn = b.shared();
    const bool ta = a.tracked(), tb = b.tracked();
    o->backward = [o, an, bn, ta, tb] {
      if (ta) an->grad_buffer() += o->grad.cwiseProduct(bn->value);
      if (tb) bn->grad_buffer() += o->grad.cwiseProduct(an->value);
    };
  }
  return out;
}

Var Graph::add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row shape");
  Matrix value = a.value();
  value.rowwise() += row.value().row(0);
  Var out = make(std::move(value), any_tracked({&a, &row}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    auto rn = row.shared();
    const bool ta = a.tracked(), tr = row.tracked();
    o->backward = [o, an, rn, ta, tr] {
      if (ta) an->grad_buffer() += o->grad;
      if (tr) rn->grad_buffer() += o->grad.colwise().sum();
    };
  }
  return out;
}

Var Graph::add_constant(const Var& a, const Matrix& c) {
  require(a.rows() == c.rows() && a.cols() == c.cols(), "add_constant shape");
  Var out = make(a.value() + c, any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    o->backward = [o, an] { an->grad_buffer() += o->grad; };
  }
  return out;
}

Var Graph::scale(const Var& a, Real c) {
  Var out = make(a.value() * c, any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    o->backward = [o, an, c] { an->grad_buffer() += o->grad * c; };
  }
  return out;
}

Var Graph::scale_rows(const Var& a, std::span<const Real> factors) {
  require(static_cast<Eigen::Index>(factors.size()) == a.rows(), "scale_rows length");
  Matrix value = a.value();
  for (Eigen::Index r = 0; r < value.rows(); ++r) value.row(r) *= factors[r];
  Var out = make(std::move(value), any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    std::vector<Real> f(factors.begin(), factors.end());
    o->backward = [o, an, f = std::move(f)] {
      Matrix& g = an->grad_buffer();
      for (Eigen::Index r = 0; r < g.rows(); ++r) g.row(r) += o->grad.row(r) * f[r];
    };
  }
  return out;
}

Var Graph::gather_rows(const Var& table, std::span<const int> ids) {
  Matrix value(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < table.rows(), "gather_rows id out of range");
    value.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  Var out = make(std::move(value), any_tracked({&table}));
  if (out.tracked()) {
    Node* o = out.node();
    auto tn = table.shared();
    std::vector<int> idx(ids.begin(), ids.end());
    o->backward = [o, tn, idx = std::move(idx)] {
      Matrix& g = tn->grad_buffer();
      for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += o->grad.row(static_cast<Eigen::Index>(i));
    };
  }
  return out;
}

Var Graph::gelu(const Var& a) {
  static constexpr Real kC = Real(0.7978845608028654);  // sqrt(2/pi)
  static constexpr Real kA = Real(0.044715);
  const Matrix& x = a.value();
  Matrix th = (kC * (x.array() + kA * x.array().cube())).tanh().matrix();
  Matrix value = (Real(0.5) * x.array() * (Real(1) + th.array())).matrix();
  Var out = make(std::move(value), any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    o->backward = [o, an, th = std::move(th)] {
      const auto x = an->value.array();
      const auto t = th.array();
      const auto d = Real(0.5) * (Real(1) + t) +
                     Real(0.5) * x * (Real(1) - t.square()) * kC * (Real(1) + Real(3) * kA * x.square());
      an->grad_buffer().array() += o->grad.array() * d;
    };
  }
  return out;
}

Var Graph::tanh(const Var& a) {
  Var out = make(a.value().array().tanh().matrix(), any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    o->backward = [o, an] {
      an->grad_buffer().array() += o->grad.array() * (Real(1) - o->value.array().square());
    };
  }
  return out;
}

Var Graph::layer_norm(const Var& x, const Var& gain, const Var& bias, Real eps) {
  const Eigen::Index n = x.cols();
  require(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n,
          "layer_norm affine shape");
  Matrix normed(x.rows(), n);
  std::vector<Real> inv_std(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Real mean = x.value().row(r).mean();
    const Real var = (x.value().row(r).array() - mean).square().mean();
    inv_std[r] = Real(1) / std::sqrt(var + eps);
    normed.row(r) = (x.value().row(r).array() - mean) * inv_std[r];
  }
  Matrix value = normed.array().rowwise() * gain.value().row(0).array();
  value.rowwise() += bias.value().row(0);
  Var out = make(std::move(value), any_tracked({&x, &gain, &bias}));
  if (out.tracked()) {
    Node* o = out.node();
    auto xn = x.shared();
    auto gn = gain.shared();
    auto bn = bias.shared();
    const bool tx = x.tracked(), tg = gain.tracked(), tb = bias.tracked();
    o->backward = [o, xn, gn, bn, tx, tg, tb, normed = std::move(normed), inv_std = std::move(inv_std)] {
      const Matrix& g = o->grad;
      if (tg) gn->grad_buffer() += g.cwiseProduct(normed).colwise().sum();
      if (tb) bn->grad_buffer() += g.colwise().sum();
      if (tx) {
        Matrix& gx = xn->grad_buffer();
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const auto dn = (g.row(r).array() * gn->value.row(0).array()).eval();
          const Real mean_dn = dn.mean();
          const Real mean_dn_n = (dn * normed.row(r).array()).mean();
          gx.row(r).array() += inv_std[r] * (dn - mean_dn - normed.row(r).array() * mean_dn_n);
        }
      }
    };
  }
  return out;
}

Var Graph::attention(const Var& qkv, const Segments& segments, int heads, bool causal) {
  require(qkv.cols() % 3 == 0, "attention expects [Q|K|V]");
  const Eigen::Index width = qkv.cols() / 3;
  require(heads > 0 && width % heads == 0, "attention heads must divide width");
  require(segments.total_rows() == qkv.rows(), "attention segments cover rows");
  const Eigen::Index d = width / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(d));
  const Matrix& in = qkv.value();
  Matrix value = Matrix::Zero(in.rows(), width);
  const bool tracked = any_tracked({&qkv});
  std::vector<Matrix> probs;
  if (tracked) probs.reserve(segments.count() * static_cast<std::size_t>(heads));

  for (std::size_t s = 0; s < segments.count(); ++s) {
    const Eigen::Index off = segments.offset(s), n = segments.length(s);
    for (int h = 0; h < heads; ++h) {
      const auto q = in.block(off, h * d, n, d);
      const auto k = in.block(off, width + h * d, n, d);
      const auto v = in.block(off, 2 * width + h * d, n, d);
      Matrix scores = (q * k.transpose()) * scale;
      if (causal) {
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = i + 1; j < n; ++j) scores(i, j) = -std::numeric_limits<Real>::infinity();
      }
      Matrix p = softmax_rows(scores);
      value.block(off, h * d, n, d).noalias() = p * v;
      if (tracked) probs.push_back(std::move(p));
    }
  }

  Var out = make(std::move(value), tracked);
  if (out.tracked()) {
    Node* o = out.node();
    auto in_node = qkv.shared();
    o->backward = [o, in_node, segments, heads, width, d, scale, probs = std::move(probs)] {
      const Matrix& x = in_node->value;
      Matrix& gx = in_node->grad_buffer();
      std::size_t idx = 0;
      for (std::size_t s = 0; s < segments.count(); ++s) {
        const Eigen::Index off = segments.offset(s), n = segments.length(s);
        for (int h = 0; h < heads; ++h, ++idx) {
          const Matrix& p = probs[idx];
          const auto q = x.block(off, h * d, n, d);
          const auto k = x.block(off, width + h * d, n, d);
          const auto v = x.block(off, 2 * width + h * d, n, d);
          const auto go = o->grad.block(off, h * d, n, d);
          Matrix dp = go * v.transpose();
          const Eigen::VectorX<Real> row_dot = p.cwiseProduct(dp).rowwise().sum();
          Matrix ds = p.cwiseProduct((dp.colwise() - row_dot).eval());
          gx.block(off, h * d, n, d).noalias() += (ds * k) * scale;
          gx.block(off, width + h * d, n, d).noalias() += (ds.transpose() * q) * scale;
          gx.block(off, 2 * width + h * d, n, d).noalias() += p.transpose() * go;
        }
      }
    };
  }
  return out;
}

Var Graph::dropout(const Var& a, Real p, Rng* rng) {
  if (p <= Real(0) || rng == nullptr) return a;
  require(p < Real(1), "dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const Real kept = Real(1) / (Real(1) - p);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? kept : Real(0);
  Var out = make(a.value().cwiseProduct(mask), any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    o->backward = [o, an, mask = std::move(mask)] { an->grad_buffer() += o->grad.cwiseProduct(mask); };
  }
  return out;
}

Var Graph::log_softmax(const Var& a) {
  Var out = make(log_softmax_rows(a.value()), any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    o->backward = [o, an] {
      const Matrix sm = o->value.array().exp().matrix();
      const Eigen::VectorX<Real> gsum = o->grad.rowwise().sum();
      Matrix& g = an->grad_buffer();
      for (Eigen::Index r = 0; r < g.rows(); ++r) g.row(r) += o->grad.row(r) - sm.row(r) * gsum(r);
    };
  }
  return out;
}

Var Graph::select_sum(const Var& a, std::span<const int> targets) {
  require(static_cast<Eigen::Index>(targets.size()) == a.rows(), "select_sum length");
  Real total = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0) continue;
    require(targets[r] < a.cols(), "select_sum target out of range");
    total += a.value()(static_cast<Eigen::Index>(r), targets[r]);
  }
  Var out = make(Matrix::Constant(1, 1, total), any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    std::vector<int> t(targets.begin(), targets.end());
    o->backward = [o, an, t = std::move(t)] {
      Matrix& g = an->grad_buffer();
      for (std::size_t r = 0; r < t.size(); ++r)
        if (t[r] >= 0) g(static_cast<Eigen::Index>(r), t[r]) += o->grad(0, 0);
    };
  }
  return out;
}

Var Graph::weighted_cross_entropy(const Var& logits, std::span<const int> targets,
                                  std::span<const Real> weights) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows() && targets.size() == weights.size(),
          "weighted_cross_entropy lengths");
  Matrix lsm = log_softmax_rows(logits.value());
  Real total = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0) continue;
    require(targets[r] < logits.cols(), "cross entropy target out of range");
    total -= weights[r] * lsm(static_cast<Eigen::Index>(r), targets[r]);
  }
  Var out = make(Matrix::Constant(1, 1, total), any_tracked({&logits}));
  if (out.tracked()) {
    Node* o = out.node();
    auto ln = logits.shared();
    std::vector<int> t(targets.begin(), targets.end());
    std::vector<Real> w(weights.begin(), weights.end());
    o->backward = [o, ln, lsm = std::move(lsm), t = std::move(t), w = std::move(w)] {
      Matrix& g = ln->grad_buffer();
      const Real go = o->grad(0, 0);
      for (std::size_t r = 0; r < t.size(); ++r) {
        if (t[r] < 0) continue;
        const auto row = static_cast<Eigen::Index>(r);
        g.row(row) += (go * w[r]) * lsm.row(row).array().exp().matrix();
        g(row, t[r]) -= go * w[r];
      }
    };
  }
  return out;
}

Var Graph::weighted_squared_error(const Var& a, const Var& b, std::span<const Real> weights) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "squared error shape");
  require(static_cast<Eigen::Index>(weights.size()) == a.rows(), "squared error weights");
  Matrix diff = a.value() - b.value();
  const Real inv_cols = Real(1) / static_cast<Real>(a.cols());
  Real total = 0;
  for (Eigen::Index r = 0; r < diff.rows(); ++r) total += weights[r] * diff.row(r).squaredNorm() * inv_cols;
  Var out = make(Matrix::Constant(1, 1, total), any_tracked({&a, &b}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    auto bn = b.shared();
    const bool ta = a.tracked(), tb = b.tracked();
    std::vector<Real> w(weights.begin(), weights.end());
    o->backward = [o, an, bn, ta, tb, inv_cols, diff = std::move(diff), w = std::move(w)] {
      Matrix g = diff;
      for (Eigen::Index r = 0; r < g.rows(); ++r) g.row(r) *= Real(2) * inv_cols * w[r] * o->grad(0, 0);
      if (ta) an->grad_buffer() += g;
      if (tb) bn->grad_buffer() -= g;
    };
  }
  return out;
}

Var Graph::sum(const Var& a) {
  Var out = make(Matrix::Constant(1, 1, a.value().sum()), any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    o->backward = [o, an] { an->grad_buffer().array() += o->grad(0, 0); };
  }
  return out;
}

Var Graph::sum_squares(const Var& a) {
  Var out = make(Matrix::Constant(1, 1, a.value().squaredNorm()), any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    o->backward = [o, an] { an->grad_buffer() += (Real(2) * o->grad(0, 0)) * an->value; };
  }
  return out;
}

Var Graph::segment_mean(const Var& a, const Segments& segments) {
  require(segments.total_rows() == a.rows(), "segment_mean segments cover rows");
  Matrix value(static_cast<Eigen::Index>(segments.count()), a.cols());
  for (std::size_t s = 0; s < segments.count(); ++s)
    value.row(static_cast<Eigen::Index>(s)) =
        a.value().middleRows(segments.offset(s), segments.length(s)).colwise().mean();
  Var out = make(std::move(value), any_tracked({&a}));
  if (out.tracked()) {
    Node* o = out.node();
    auto an = a.shared();
    o->backward = [o, an, segments] {
      Matrix& g = an->grad_buffer();
      for (std::size_t s = 0; s < segments.count(); ++s) {
        const Real inv = Real(1) / static_cast<Real>(segments.length(s));
        g.middleRows(segments.offset(s), segments.length(s)).rowwise() +=
            o->grad.row(static_cast<Eigen::Index>(s)) * inv;
      }
    };
  }
  return out;
}

void Graph::backward(const Var& root) {
  require(root.rows() == 1 && root.cols() == 1, "backward root must be scalar");
  if (!root.tracked()) return;
  root.node()->grad_buffer()(0, 0) += Real(1);
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    Node& node = **it;
    if (node.grad.size() != 0 && node.backward) node.backward();
  }
}

}  // namespace mdlm::ag
