// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/autodiff/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "promptmil/common/error.hpp"

namespace promptmil {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap view(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_fail(Op op, const std::string& detail) {
  throw ShapeError(std::string(op_name(op)) + ": " + detail);
}

void require_same(Op op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail(op, a.shape_string() + " vs " + b.shape_string());
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kScale: return "scale";
    case Op::kScaleBy: return "scale-by";
    case Op::kConcatRows: return "concat-rows";
    case Op::kConcatCols: return "concat-cols";
    case Op::kRowSoftmax: return "row-softmax";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kL2NormalizeRows: return "l2-normalize-rows";
    case Op::kMeanRows: return "mean-rows";
    case Op::kTranspose: return "transpose";
    case Op::kMul: return "elementwise-multiply";
    case Op::kSum: return "sum";
    case Op::kNllSoftmax: return "nll-indexed-softmax";
  }
  return "?";
}

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::parameter(const std::string& name, Tensor value) {
  if (name.empty()) throw ValidationError("graph: parameter needs a name");
  if (!names_.emplace(name, nodes_.size()).second) {
    throw ValidationError("graph: duplicate parameter '" + name + "'");
  }
  if (value.empty()) throw ShapeError("graph: parameter '" + name + "' is empty");
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  node.name = name;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  if (value.empty()) throw ShapeError("graph: constant is empty");
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::push(Op op, std::vector<std::size_t> inputs, double scalar,
                std::vector<std::size_t> labels) {
  Node node;
  node.op = op;
  node.scalar = scalar;
  node.labels = std::move(labels);
  for (std::size_t id : inputs) {
    if (id >= nodes_.size()) throw ValidationError("graph: dangling input");
    node.requires_grad = node.requires_grad || nodes_[id].requires_grad;
  }
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  evaluate(nodes_.back());
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::leaf_value(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.op != Op::kLeaf) throw ValidationError("graph: node is not a leaf");
  return node.value;
}

std::vector<std::size_t> Graph::parameter_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::kLeaf && nodes_[i].requires_grad) ids.push_back(i);
  }
  return ids;
}

const Tensor& Graph::forward(Var root) {
  for (std::size_t i = 0; i <= root.id(); ++i) {
    if (nodes_[i].op != Op::kLeaf) evaluate(nodes_[i]);
  }
  return nodes_[root.id()].value;
}

void Graph::evaluate(Node& node) {
  const Op op = node.op;
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k]].value; };
  Tensor& out = node.value;

  switch (op) {
    case Op::kLeaf:
      return;
    case Op::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.rows()) shape_fail(op, a.shape_string() + " x " + b.shape_string());
      out.resize(a.rows(), b.cols());
      view(out).noalias() = view(a) * view(b);
      break;
    }
    case Op::kAdd:
    case Op::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_same(op, a, b);
      out.resize(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = op == Op::kAdd ? a[i] + b[i] : a[i] * b[i];
      }
      break;
    }
    case Op::kScale: {
      const Tensor& a = in(0);
      out.resize(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * node.scalar;
      break;
    }
    case Op::kScaleBy: {
      const Tensor& a = in(0);
      const Tensor& s = in(1);
      if (s.rows() != 1 || s.cols() != 1) shape_fail(op, "factor " + s.shape_string() + " is not 1x1");
      out.resize(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s[0];
      break;
    }
    case Op::kConcatRows: {
      const std::size_t cols = in(0).cols();
      std::size_t rows = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        if (in(k).cols() != cols) shape_fail(op, in(0).shape_string() + " vs " + in(k).shape_string());
        rows += in(k).rows();
      }
      out.resize(rows, cols);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        std::copy(in(k).data().begin(), in(k).data().end(), out.data().begin() + offset);
        offset += in(k).size();
      }
      break;
    }
    case Op::kConcatCols: {
      const std::size_t rows = in(0).rows();
      std::size_t cols = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        if (in(k).rows() != rows) shape_fail(op, in(0).shape_string() + " vs " + in(k).shape_string());
        cols += in(k).cols();
      }
      out.resize(rows, cols);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const Tensor& part = in(k);
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy(part.row_span(r).begin(), part.row_span(r).end(),
                    out.row_span(r).begin() + offset);
        }
        offset += part.cols();
      }
      break;
    }
    case Op::kRowSoftmax: {
      const Tensor& a = in(0);
      out.resize(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        auto src = a.row_span(r);
        auto dst = out.row_span(r);
        const double mx = *std::max_element(src.begin(), src.end());
        double total = 0.0;
        for (std::size_t c = 0; c < src.size(); ++c) {
          dst[c] = std::exp(src[c] - mx);
          total += dst[c];
        }
        for (double& v : dst) v /= total;
      }
      break;
    }
    case Op::kTanh:
    case Op::kExp: {
      const Tensor& a = in(0);
      out.resize(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = op == Op::kTanh ? std::tanh(a[i]) : std::exp(a[i]);
      }
      break;
    }
    case Op::kL2NormalizeRows: {
      const Tensor& a = in(0);
      out.resize(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        const double denom = std::max(norm(a.row_span(r)), ad::kNormEpsilon);
        auto src = a.row_span(r);
        auto dst = out.row_span(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / denom;
      }
      break;
    }
    case Op::kMeanRows: {
      const Tensor& a = in(0);
      out.resize(1, a.cols());
      view(out) = view(a).colwise().mean();
      break;
    }
    case Op::kTranspose: {
      const Tensor& a = in(0);
      out.resize(a.cols(), a.rows());
      view(out) = view(a).transpose();
      break;
    }
    case Op::kSum: {
      const Tensor& a = in(0);
      out.resize(1, 1);
      out[0] = view(a).sum();
      break;
    }
    case Op::kNllSoftmax: {
      const Tensor& z = in(0);
      if (node.labels.size() != z.rows()) {
        shape_fail(op, std::to_string(node.labels.size()) + " labels for logits " + z.shape_string());
      }
      double total = 0.0;
      for (std::size_t r = 0; r < z.rows(); ++r) {
        if (node.labels[r] >= z.cols()) {
          shape_fail(op, "label " + std::to_string(node.labels[r]) + " out of range for " + z.shape_string());
        }
        auto row = z.row_span(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double acc = 0.0;
        for (double v : row) acc += std::exp(v - mx);
        total += mx + std::log(acc) - row[node.labels[r]];
      }
      out.resize(1, 1);
      out[0] = total / static_cast<double>(z.rows());
      break;
    }
  }

  if (!out.all_finite()) {
    throw NumericError(std::string(op_name(op)) + ": produced a non-finite value");
  }
}

Tensor& Graph::grad_slot(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.rows(), node.value.cols());
  return node.grad;
}

GradientMap Graph::backward(Var root) {
  if (root.graph() != this) throw ValidationError("backward: root belongs to another graph");
  const Tensor& rv = nodes_.at(root.id()).value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ShapeError("backward: root must be scalar, got " + rv.shape_string());
  }
  for (Node& node : nodes_) node.grad = Tensor();
  grad_slot(root.id())[0] = 1.0;

  for (std::size_t i = root.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (node.op == Op::kLeaf || !node.requires_grad || node.grad.empty()) continue;
    propagate(node);
  }

  GradientMap grads;
  for (std::size_t id : parameter_ids()) {
    if (id > root.id()) continue;
    Node& node = nodes_[id];
    grads.emplace(node.name, node.grad.empty() ? Tensor(node.value.rows(), node.value.cols())
                                               : node.grad);
  }
  return grads;
}

void Graph::propagate(const Node& node) {
  const Tensor& g = node.grad;
  const Tensor& y = node.value;
  auto in_id = [&](std::size_t k) { return node.inputs[k]; };
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k]].value; };
  auto wants = [&](std::size_t k) { return nodes_[node.inputs[k]].requires_grad; };

  switch (node.op) {
    case Op::kLeaf:
      return;
    case Op::kMatMul: {
      if (wants(0)) view(grad_slot(in_id(0))).noalias() += view(g) * view(in(1)).transpose();
      if (wants(1)) view(grad_slot(in_id(1))).noalias() += view(in(0)).transpose() * view(g);
      return;
    }
    case Op::kAdd: {
      for (std::size_t k = 0; k < 2; ++k) {
        if (wants(k)) view(grad_slot(in_id(k))) += view(g);
      }
      return;
    }
    case Op::kMul: {
      if (wants(0)) view(grad_slot(in_id(0))).array() += view(g).array() * view(in(1)).array();
      if (wants(1)) view(grad_slot(in_id(1))).array() += view(g).array() * view(in(0)).array();
      return;
    }
    case Op::kScale: {
      if (wants(0)) view(grad_slot(in_id(0))) += node.scalar * view(g);
      return;
    }
    case Op::kScaleBy: {
      const double s = in(1)[0];
      if (wants(0)) view(grad_slot(in_id(0))) += s * view(g);
      if (wants(1)) grad_slot(in_id(1))[0] += (view(g).array() * view(in(0)).array()).sum();
      return;
    }
    case Op::kConcatRows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const std::size_t n = in(k).size();
        if (wants(k)) {
          Tensor& dst = grad_slot(in_id(k));
          for (std::size_t i = 0; i < n; ++i) dst[i] += g[offset + i];
        }
        offset += n;
      }
      return;
    }
    case Op::kConcatCols: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const std::size_t cols = in(k).cols();
        if (wants(k)) {
          Tensor& dst = grad_slot(in_id(k));
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < cols; ++c) dst(r, c) += g(r, offset + c);
          }
        }
        offset += cols;
      }
      return;
    }
    case Op::kRowSoftmax: {
      if (!wants(0)) return;
      Tensor& dst = grad_slot(in_id(0));
      for (std::size_t r = 0; r < y.rows(); ++r) {
        const double gy = dot(g.row_span(r), y.row_span(r));
        for (std::size_t c = 0; c < y.cols(); ++c) dst(r, c) += y(r, c) * (g(r, c) - gy);
      }
      return;
    }
    case Op::kTanh: {
      if (!wants(0)) return;
      Tensor& dst = grad_slot(in_id(0));
      for (std::size_t i = 0; i < y.size(); ++i) dst[i] += g[i] * (1.0 - y[i] * y[i]);
      return;
    }
    case Op::kExp: {
      if (!wants(0)) return;
      Tensor& dst = grad_slot(in_id(0));
      for (std::size_t i = 0; i < y.size(); ++i) dst[i] += g[i] * y[i];
      return;
    }
    case Op::kL2NormalizeRows: {
      if (!wants(0)) return;
      const Tensor& x = in(0);
      Tensor& dst = grad_slot(in_id(0));
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double n = norm(x.row_span(r));
        const double s = std::max(n, ad::kNormEpsilon);
        const double coupling = n > ad::kNormEpsilon ? dot(x.row_span(r), g.row_span(r)) / (n * n * n) : 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
          dst(r, c) += g(r, c) / s - x(r, c) * coupling;
        }
      }
      return;
    }
    case Op::kMeanRows: {
      if (!wants(0)) return;
      const double inv = 1.0 / static_cast<double>(in(0).rows());
      view(grad_slot(in_id(0))).rowwise() += inv * view(g).row(0);
      return;
    }
    case Op::kTranspose: {
      if (wants(0)) view(grad_slot(in_id(0))) += view(g).transpose();
      return;
    }
    case Op::kSum: {
      if (wants(0)) view(grad_slot(in_id(0))).array() += g[0];
      return;
    }
    case Op::kNllSoftmax: {
      if (!wants(0)) return;
      const Tensor& z = in(0);
      Tensor& dst = grad_slot(in_id(0));
      const double w = g[0] / static_cast<double>(z.rows());
      for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row_span(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double acc = 0.0;
        for (double v : row) acc += std::exp(v - mx);
        for (std::size_t c = 0; c < z.cols(); ++c) {
          const double p = std::exp(row[c] - mx) / acc;
          dst(r, c) += w * (p - (c == node.labels[r] ? 1.0 : 0.0));
        }
      }
      return;
    }
  }
}

namespace ad {

namespace {
Graph& graph_of(Var a) {
  if (!a.valid()) throw ValidationError("autodiff: operand is not bound to a graph");
  return *a.graph();
}
Graph& graph_of(Var a, Var b) {
  if (a.graph() != b.graph()) throw ValidationError("autodiff: operands from different graphs");
  return graph_of(a);
}
std::vector<std::size_t> ids_of(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  std::vector<std::size_t> ids;
  for (const Var& v : parts) {
    if (v.graph() != parts[0].graph()) throw ValidationError("concat: operands from different graphs");
    ids.push_back(v.id());
  }
  return ids;
}
}  // namespace

Var matmul(Var a, Var b) { return graph_of(a, b).push(Op::kMatMul, {a.id(), b.id()}); }
Var add(Var a, Var b) { return graph_of(a, b).push(Op::kAdd, {a.id(), b.id()}); }
Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }
Var scale(Var a, double factor) { return graph_of(a).push(Op::kScale, {a.id()}, factor); }
Var scale_by(Var a, Var s) { return graph_of(a, s).push(Op::kScaleBy, {a.id(), s.id()}); }
Var concat_rows(std::span<const Var> parts) {
  return graph_of(parts.front()).push(Op::kConcatRows, ids_of(parts));
}
Var concat_cols(std::span<const Var> parts) {
  return graph_of(parts.front()).push(Op::kConcatCols, ids_of(parts));
}
Var row_softmax(Var a) { return graph_of(a).push(Op::kRowSoftmax, {a.id()}); }
Var tanh(Var a) { return graph_of(a).push(Op::kTanh, {a.id()}); }
Var exp(Var a) { return graph_of(a).push(Op::kExp, {a.id()}); }
Var l2_normalize_rows(Var a) { return graph_of(a).push(Op::kL2NormalizeRows, {a.id()}); }
Var mean_rows(Var a) { return graph_of(a).push(Op::kMeanRows, {a.id()}); }
Var transpose(Var a) { return graph_of(a).push(Op::kTranspose, {a.id()}); }
Var mul(Var a, Var b) { return graph_of(a, b).push(Op::kMul, {a.id(), b.id()}); }
Var sum(Var a) { return graph_of(a).push(Op::kSum, {a.id()}); }
Var nll_softmax(Var logits, std::span<const std::size_t> labels) {
  return graph_of(logits).push(Op::kNllSoftmax, {logits.id()}, 0.0,
                               std::vector<std::size_t>(labels.begin(), labels.end()));
}

}  // namespace ad
}  // namespace promptmil
