// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "promptmil/autodiff/tensor.hpp"

namespace promptmil {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const noexcept { return id_; }
  Graph* graph() const noexcept { return graph_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients of the requires-grad leaves, keyed by leaf name.
using GradientMap = std::map<std::string, Tensor>;

enum class Op {
  kLeaf,
  kMatMul,
  kAdd,
  kScale,
  kScaleBy,
  kConcatRows,
  kConcatCols,
  kRowSoftmax,
  kTanh,
  kExp,
  kL2NormalizeRows,
  kMeanRows,
  kTranspose,
  kMul,
  kSum,
  kNllSoftmax,
};

const char* op_name(Op op);

/// Define-by-run reverse-mode tape.
///
/// Nodes are appended in topological order and evaluated eagerly. `forward`
/// re-evaluates every non-leaf node from the current leaf values, which is how
/// the finite-difference checker perturbs a leaf and re-reads the root. The
/// graph is rebuilt for every training step; it is never reused across steps.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Trainable leaf. Names must be unique within a graph.
  Var parameter(const std::string& name, Tensor value);
  /// Leaf that never receives a gradient.
  Var constant(Tensor value);

  Var push(Op op, std::vector<std::size_t> inputs, double scalar = 0.0,
           std::vector<std::size_t> labels = {});

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  Tensor& leaf_value(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Re-evaluates all non-leaf nodes up to and including `root`.
  const Tensor& forward(Var root);

  /// Reverse sweep from a 1x1 root. Gradients accumulate additively across
  /// fan-out. Returns the gradient of every requires-grad leaf.
  GradientMap backward(Var root);

  /// Gradient of any node after `backward`; empty if none reached it.
  const Tensor& grad(Var v) const { return nodes_.at(v.id()).grad; }

  /// Requires-grad leaves in creation order.
  std::vector<std::size_t> parameter_ids() const;
  const std::string& name(std::size_t id) const { return nodes_.at(id).name; }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::vector<std::size_t> inputs;
    double scalar = 0.0;
    std::vector<std::size_t> labels;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::string name;
  };

  void evaluate(Node& node);
  void propagate(const Node& node);
  Tensor& grad_slot(std::size_t id);

  std::deque<Node> nodes_;
  std::map<std::string, std::size_t> names_;
};

/// Primitive set. All operands must live in the same graph.
namespace ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
/// `a` times the single entry of the 1x1 node `s`.
Var scale_by(Var a, Var s);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var row_softmax(Var a);
Var tanh(Var a);
Var exp(Var a);
/// x / max(||x||, 1e-12) per row; a zero row stays zero.
Var l2_normalize_rows(Var a);
Var mean_rows(Var a);
Var transpose(Var a);
Var mul(Var a, Var b);
Var sum(Var a);
/// Mean over rows of -log softmax(row)[label]. Returns 1x1.
Var nll_softmax(Var logits, std::span<const std::size_t> labels);

inline constexpr double kNormEpsilon = 1e-12;

}  // namespace ad
}  // namespace promptmil
