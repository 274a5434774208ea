// Copyright 2026 BiteNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace bitenet {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
class Graph;

/// Handle to one node of a computation graph. Values are dense matrices
/// (scalars are 1x1, vectors 1xd or mx1). A tensor created with
/// requires_grad participates in reverse-mode differentiation; after
/// Graph::backward its grad() holds d(loss)/d(tensor).
template <typename Scalar>
class Tensor {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Tensor() = default;
  Tensor(Graph<Scalar>* graph, int id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  int id() const { return id_; }
  Graph<Scalar>& graph() const { return *graph_; }

  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;

  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const;

 private:
  Graph<Scalar>* graph_ = nullptr;
  int id_ = -1;
};

/// Tape of eagerly evaluated nodes. Creation order is a topological order,
/// so backward() is a single reverse sweep. One graph is single-threaded;
/// concurrent forward passes must each own a graph.
template <typename Scalar>
class Graph {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using BackwardFn = std::function<void(Graph&, int)>;

  Tensor<Scalar> constant(Matrix value) {
    return make(std::move(value), false, nullptr);
  }

  Tensor<Scalar> variable(Matrix value) {
    return make(std::move(value), true, nullptr);
  }

  /// Internal node factory used by the op library. `backward` receives the
  /// graph and the node's own id and must accumulate into parent grads.
  Tensor<Scalar> make(Matrix value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad,
                          requires_grad ? std::move(backward) : nullptr});
    return Tensor<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Matrix& value(int id) const { return nodes_[id].value; }

  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  const Matrix& grad(int id) const {
    Node& n = const_cast<Node&>(nodes_[id]);
    Matrix& slot = in_sweep_ ? const_cast<Matrix&>(sweep_[id]) : n.grad;
    if (slot.size() == 0) slot = Matrix::Zero(n.value.rows(), n.value.cols());
    return slot;
  }

  /// Accumulates `g` into the node's gradient buffer (the sweep buffer while
  /// a backward pass is running).
  void accumulate(int id, const Matrix& g) { accumulate_expr(id, g); }

  template <typename Expr>
  void accumulate_expr(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    Matrix& slot = in_sweep_ ? sweep_[id] : n.grad;
    if (slot.size() == 0) {
      slot = g;
    } else {
      slot += g;
    }
  }

  /// Reverse sweep from a scalar loss. The sweep propagates through scratch
  /// buffers, then adds into the persistent grads, so repeated calls
  /// accumulate one true gradient each until zero_grad().
  void backward(const Tensor<Scalar>& loss) {
    if (loss.rows() != 1 || loss.cols() != 1)
      throw std::invalid_argument("backward: loss must be a 1x1 scalar tensor");
    if (!nodes_[loss.id()].requires_grad)
      throw std::invalid_argument("backward: loss does not depend on any variable");
    sweep_.assign(nodes_.size(), Matrix());
    in_sweep_ = true;
    accumulate(loss.id(), Matrix::Ones(1, 1));
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || !n.backward || sweep_[id].size() == 0) continue;
      n.backward(*this, id);
    }
    in_sweep_ = false;
    for (std::size_t id = 0; id < sweep_.size(); ++id) {
      if (sweep_[id].size() == 0) continue;
      Node& n = nodes_[id];
      if (n.grad.size() == 0) {
        n.grad = std::move(sweep_[id]);
      } else {
        n.grad += sweep_[id];
      }
    }
    sweep_.clear();
  }

  void zero_grad() {
    for (Node& n : nodes_) n.grad.resize(0, 0);
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // lazily allocated; empty means zero
    bool requires_grad;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<Matrix> sweep_;
  bool in_sweep_ = false;
};

template <typename Scalar>
const typename Tensor<Scalar>::Matrix& Tensor<Scalar>::value() const {
  return graph_->value(id_);
}

template <typename Scalar>
const typename Tensor<Scalar>::Matrix& Tensor<Scalar>::grad() const {
  return graph_->grad(id_);
}

template <typename Scalar>
bool Tensor<Scalar>::requires_grad() const {
  return graph_->requires_grad(id_);
}

template <typename Scalar>
Scalar Tensor<Scalar>::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw std::logic_error("scalar(): tensor is not 1x1");
  return v(0, 0);
}

}  // namespace bitenet
