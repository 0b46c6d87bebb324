// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Graph records every operation applied to its Vars. Calling
// Graph::backward on a 1x1 result walks the record in reverse and pushes
// adjoints into every tracked input; Parameters accumulate their gradient
// across backward calls until zero_grad. A Graph built with recording off
// evaluates values only, which is what inference paths use.

#pragma once

#include "mdlm/abi.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mdlm/random.hpp"
#include "mdlm/real.hpp"

namespace mdlm::inline MDLM_ABI::ag {

struct Node {
  Matrix value;
  Matrix grad;  // empty until an adjoint reaches this node
  std::function<void()> backward;

  Matrix& grad_buffer() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  Var(std::shared_ptr<Node> node, bool tracked) : node_(std::move(node)), tracked_(tracked) {}

  const Matrix& value() const { return node_->value; }
  /// Adjoint after backward; zeros if the node was never reached.
  Matrix grad() const {
    return node_->grad.size() ? node_->grad : Matrix::Zero(node_->value.rows(), node_->value.cols());
  }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Real scalar() const { return node_->value(0, 0); }
  bool tracked() const { return tracked_; }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
  bool tracked_ = false;
};

/// Persistent learnable tensor. Its gradient buffer lives across graphs.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Matrix init);

  const std::string& name() const { return name_; }
  Matrix& value() { return node_->value; }
  const Matrix& value() const { return node_->value; }
  Matrix& grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.setZero(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::string name_;
  std::shared_ptr<Node> node_;
};

/// Row layout of several variable-length sequences packed into one matrix.
class Segments {
 public:
  Segments() = default;
  explicit Segments(std::vector<int> lengths);

  std::size_t count() const { return lengths_.size(); }
  int length(std::size_t s) const { return lengths_[s]; }
  int offset(std::size_t s) const { return offsets_[s]; }
  int total_rows() const { return offsets_.empty() ? 0 : offsets_.back() + lengths_.back(); }
  const std::vector<int>& lengths() const { return lengths_; }

 private:
  std::vector<int> lengths_;
  std::vector<int> offsets_;
};

class Graph {
 public:
  /// record=false: values only, no adjoints (inference).
  /// train_params=false: Parameters enter as constants even while recording,
  /// so only explicit inputs receive gradients.
  explicit Graph(bool record = true, bool train_params = true)
      : record_(record), train_params_(train_params) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  /// Leaf whose gradient is wanted (e.g. a latent under guidance).
  Var input(Matrix value);
  Var param(const Parameter& p);

  Var matmul(const Var& a, const Var& b);
  Var add(const Var& a, const Var& b);
  Var sub(const Var& a, const Var& b);
  Var mul(const Var& a, const Var& b);
  /// a (n x k) + row (1 x k) broadcast over rows.
  Var add_row(const Var& a, const Var& row);
  Var add_constant(const Var& a, const Matrix& c);
  Var scale(const Var& a, Real c);
  /// Row i multiplied by factors[i].
  Var scale_rows(const Var& a, std::span<const Real> factors);
  /// Rows of table selected by ids (embedding lookup); scatter-add backward.
  Var gather_rows(const Var& table, std::span<const int> ids);
  Var gelu(const Var& a);
  Var tanh(const Var& a);
  Var layer_norm(const Var& x, const Var& gain, const Var& bias, Real eps = Real(1e-5));
  /// Multi-head scaled dot-product attention. qkv is (rows x 3w) holding
  /// [Q | K | V]; attention never crosses segment boundaries.
  Var attention(const Var& qkv, const Segments& segments, int heads, bool causal);
  /// Inverted dropout; identity when p == 0 or rng is null.
  Var dropout(const Var& a, Real p, Rng* rng);
  Var log_softmax(const Var& a);
  /// Sum over rows of a(r, targets[r]); rows with a negative target skipped.
  Var select_sum(const Var& a, std::span<const int> targets);
  /// Sum_r weights[r] * -log softmax(logits)_r[targets[r]]; negative targets skipped.
  Var weighted_cross_entropy(const Var& logits, std::span<const int> targets,
                             std::span<const Real> weights);
  /// Sum_r weights[r] * mean_c (a - b)^2.
  Var weighted_squared_error(const Var& a, const Var& b, std::span<const Real> weights);
  Var sum(const Var& a);
  Var sum_squares(const Var& a);
  /// Per-segment mean of rows -> (segments x cols).
  Var segment_mean(const Var& a, const Segments& segments);

  /// Seeds d(root)/d(root) = 1 and propagates adjoints. root must be 1x1.
  void backward(const Var& root);

 private:
  Var make(Matrix value, bool tracked, std::function<void()> backward = {});
  bool any_tracked(std::initializer_list<const Var*> vars) const;

  bool record_;
  bool train_params_;
  std::vector<std::shared_ptr<Node>> tape_;
};

/// Row-wise numerically stable log-softmax (value only).
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace mdlm::ag
