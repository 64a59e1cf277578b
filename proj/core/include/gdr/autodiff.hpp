// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "gdr/tensor.hpp"

namespace gdr {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kNeg,
  kMul,       // elementwise; a 1x1 operand broadcasts
  kDiv,       // elementwise; a 1x1 divisor/dividend broadcasts
  kScale,     // multiply by compile-time constant c0
  kMatmul,
  kTranspose,
  kTanh,
  kSigmoid,
  kSoftplus,
  kExp,
  kLog,
  kSqrt,
  kSum,       // all elements -> 1x1
  kDot,       // same-shape pair -> 1x1
  kL2Norm,    // -> 1x1
  kClamp,     // elementwise clamp to [c0, c1]
  kClampMask, // 1 where parent strictly inside (c0, c1), else 0; gradient 0
  kArccos,
  kSelect,    // element `index` of a vector -> 1x1
  kSoftmax,
  kSoftmaxXent,  // (logits, target distribution) -> 1x1 cross entropy
};

const char* op_name(Op op);

struct Node {
  Op op = Op::kLeaf;
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  Tensor value;
  double c0 = 0.0;  // scale factor / clamp lower bound
  double c1 = 0.0;  // clamp upper bound
  int index = -1;   // select component
};

/// What to do when a gradient target is not an ancestor of the root.
enum class Unreachable {
  kError,  // throw ValueError
  kZero,   // return a zero tensor / zero constant node
};

/// Reverse-mode tape over a dynamic computation graph.
///
/// Nodes are appended to an arena and evaluated eagerly; the arena order is
/// a topological order by construction. Every recorded value is checked for
/// NaN/Inf and rejected with NumericError rather than propagated.
///
/// A Graph is single-threaded; distinct graphs may be used from different
/// threads concurrently.
class Graph {
 public:
  explicit Graph(std::uint64_t seed = 0) : seed_(seed) {}

  NodeId leaf(Tensor v);
  NodeId constant(Tensor v);
  NodeId scalar_const(double v) { return constant(Tensor::scalar(v)); }

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId neg(NodeId a);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId softplus(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId sum(NodeId a);
  NodeId dot(NodeId a, NodeId b);
  NodeId l2_norm(NodeId a);
  NodeId clamp(NodeId a, double lo, double hi);
  /// arccos with the operand clamped to [-1+1e-7, 1-1e-7] first, so cosines
  /// that floating point pushed past +-1 stay differentiable.
  NodeId arccos(NodeId a);
  NodeId select(NodeId a, int index);
  NodeId softmax(NodeId a);
  NodeId softmax_xent(NodeId logits, NodeId target);

  const Tensor& value(NodeId id) const;
  const Node& node(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  std::uint64_t seed() const { return seed_; }

  /// Overwrite a leaf/constant value (same shape required) for graph replay.
  void set_value(NodeId id, const Tensor& v);
  /// Re-evaluate every non-leaf node in arena order after set_value calls.
  void recompute();
  /// Drop all nodes recorded at or after `mark` (as returned by size()).
  void truncate(std::size_t mark);
  void clear();

  /// d(root)/d(wrt) for a scalar root, as plain tensors (fast path; nothing
  /// is recorded). Calling it twice without mutation returns identical
  /// results.
  std::vector<Tensor> gradient(NodeId root, std::span<const NodeId> wrt,
                               Unreachable policy = Unreachable::kError);

  /// Like gradient(), but with an explicit seed adjoint, so a single
  /// component of a vector root can be differentiated without recording a
  /// select node.
  std::vector<Tensor> gradient_seeded(NodeId root, const Tensor& seed_adjoint,
                                      std::span<const NodeId> wrt,
                                      Unreachable policy = Unreachable::kError);

  /// Differentiable gradient: records the backward pass as ordinary graph
  /// nodes and returns the adjoint node ids, so a second gradient call can
  /// differentiate through the first (double backprop).
  std::vector<NodeId> gradient_nodes(NodeId root, std::span<const NodeId> wrt,
                                     Unreachable policy = Unreachable::kError);

 private:
  NodeId record(Node n);
  Tensor eval(const Node& n) const;
  void check_id(NodeId id) const;
  std::vector<char> active_set(NodeId root, std::span<const NodeId> wrt) const;
  NodeId transpose_memoized(NodeId a);

  std::vector<Node> nodes_;
  std::unordered_map<NodeId, NodeId> transpose_memo_;
  std::uint64_t seed_;
};

}  // namespace gdr
