// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include "gdr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gdr/errors.hpp"

namespace gdr {

namespace {

constexpr double kArccosClamp = 1e-7;

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i]);
  return out;
}

Tensor softmax_value(const Tensor& a) {
  Tensor out(a.rows, a.cols);
  double m = -std::numeric_limits<double>::infinity();
  for (double v : a.data) m = std::max(m, v);
  double z = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data[i] = std::exp(a.data[i] - m);
    z += out.data[i];
  }
  for (double& v : out.data) v /= z;
  return out;
}

Node make_node(Op op, NodeId a = kNoNode, NodeId b = kNoNode) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  return n;
}

void require_vector(const Tensor& t, const char* op) {
  if (t.rows != 1 && t.cols != 1) {
    throw ShapeError(std::string(op) + ": expected a vector, got (" + std::to_string(t.rows) +
                     "x" + std::to_string(t.cols) + ")");
  }
}

// In-place accumulation kernels for the value-mode backward sweep. Adjoint
// buffers are allocated once per node and written without temporaries.

void ensure_zeros(Tensor& t, const Tensor& like) {
  if (t.rows == 0) t = Tensor(like.rows, like.cols);
}

void acc_add(Tensor& out, const Tensor& x) {
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] += x.data[i];
}

void acc_scaled(Tensor& out, const Tensor& x, double s) {
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] += x.data[i] * s;
}

// out += a * b^T
void acc_matmul_nt(Tensor& out, const Tensor& a, const Tensor& b) {
  for (int i = 0; i < a.rows; ++i) {
    const double* a_row = &a.data[static_cast<std::size_t>(i) * a.cols];
    double* out_row = &out.data[static_cast<std::size_t>(i) * out.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* b_row = &b.data[static_cast<std::size_t>(j) * b.cols];
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a_row[k] * b_row[k];
      out_row[j] += s;
    }
  }
}

// out += a^T * b
void acc_matmul_tn(Tensor& out, const Tensor& a, const Tensor& b) {
  for (int k = 0; k < a.rows; ++k) {
    const double* a_row = &a.data[static_cast<std::size_t>(k) * a.cols];
    const double* b_row = &b.data[static_cast<std::size_t>(k) * b.cols];
    for (int i = 0; i < a.cols; ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      double* out_row = &out.data[static_cast<std::size_t>(i) * out.cols];
      for (int j = 0; j < b.cols; ++j) out_row[j] += aki * b_row[j];
    }
  }
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kNeg: return "neg";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScale: return "scale";
    case Op::kMatmul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kSoftplus: return "softplus";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSqrt: return "sqrt";
    case Op::kSum: return "sum";
    case Op::kDot: return "dot";
    case Op::kL2Norm: return "l2_norm";
    case Op::kClamp: return "clamp";
    case Op::kClampMask: return "clamp_mask";
    case Op::kArccos: return "arccos";
    case Op::kSelect: return "select";
    case Op::kSoftmax: return "softmax";
    case Op::kSoftmaxXent: return "softmax_xent";
  }
  return "?";
}

void Graph::check_id(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw ValueError("node id " + std::to_string(id) + " is not in this graph");
  }
}

const Tensor& Graph::value(NodeId id) const {
  check_id(id);
  return nodes_[id].value;
}

const Node& Graph::node(NodeId id) const {
  check_id(id);
  return nodes_[id];
}

Tensor Graph::eval(const Node& n) const {
  const Tensor& A = n.a >= 0 ? nodes_[n.a].value : n.value;
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      return n.value;
    case Op::kAdd: return t_add(A, nodes_[n.b].value);
    case Op::kSub: return t_sub(A, nodes_[n.b].value);
    case Op::kNeg: return t_neg(A);
    case Op::kMul: return t_mul(A, nodes_[n.b].value);
    case Op::kDiv: return t_div(A, nodes_[n.b].value);
    case Op::kScale: return t_scale(A, n.c0);
    case Op::kMatmul: return t_matmul(A, nodes_[n.b].value);
    case Op::kTranspose: return t_transpose(A);
    case Op::kTanh: return map_unary(A, [](double x) { return std::tanh(x); });
    case Op::kSigmoid: return map_unary(A, stable_sigmoid);
    case Op::kSoftplus: return map_unary(A, stable_softplus);
    case Op::kExp: return map_unary(A, [](double x) { return std::exp(x); });
    case Op::kLog: return map_unary(A, [](double x) { return std::log(x); });
    case Op::kSqrt: return map_unary(A, [](double x) { return std::sqrt(x); });
    case Op::kSum: return t_sum(A);
    case Op::kDot: return t_dot(A, nodes_[n.b].value);
    case Op::kL2Norm: return t_l2_norm(A);
    case Op::kClamp: {
      const double lo = n.c0, hi = n.c1;
      return map_unary(A, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); });
    }
    case Op::kClampMask: {
      const double lo = n.c0, hi = n.c1;
      return map_unary(A, [lo, hi](double x) { return (lo < x && x < hi) ? 1.0 : 0.0; });
    }
    case Op::kArccos: return map_unary(A, [](double x) { return std::acos(x); });
    case Op::kSelect: {
      if (n.index < 0 || static_cast<std::size_t>(n.index) >= A.size()) {
        throw ShapeError("select: index " + std::to_string(n.index) + " out of range for size " +
                         std::to_string(A.size()));
      }
      return Tensor::scalar(A.data[n.index]);
    }
    case Op::kSoftmax: return softmax_value(A);
    case Op::kSoftmaxXent: {
      const Tensor& H = nodes_[n.b].value;
      if (!A.same_shape(H)) throw ShapeError("softmax_xent: logits/target shape mismatch");
      double m = -std::numeric_limits<double>::infinity();
      for (double v : A.data) m = std::max(m, v);
      double z = 0.0;
      for (double v : A.data) z += std::exp(v - m);
      double hz = 0.0;
      for (std::size_t i = 0; i < A.size(); ++i) hz += H.data[i] * A.data[i];
      return Tensor::scalar(m + std::log(z) - hz);
    }
  }
  throw ValueError("eval: unknown op");
}

NodeId Graph::record(Node n) {
  if (n.a != kNoNode) check_id(n.a);
  if (n.b != kNoNode) check_id(n.b);
  if (n.op != Op::kLeaf && n.op != Op::kConst) n.value = eval(n);
  if (!n.value.all_finite()) {
    throw NumericError(std::string(op_name(n.op)) + ": non-finite result");
  }
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Tensor v) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(v);
  return record(std::move(n));
}

NodeId Graph::constant(Tensor v) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(v);
  return record(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return record(make_node(Op::kAdd, a, b)); }
NodeId Graph::sub(NodeId a, NodeId b) { return record(make_node(Op::kSub, a, b)); }
NodeId Graph::neg(NodeId a) { return record(make_node(Op::kNeg, a)); }
NodeId Graph::mul(NodeId a, NodeId b) { return record(make_node(Op::kMul, a, b)); }
NodeId Graph::div(NodeId a, NodeId b) { return record(make_node(Op::kDiv, a, b)); }

NodeId Graph::scale(NodeId a, double c) {
  Node n = make_node(Op::kScale, a);
  n.c0 = c;
  return record(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) { return record(make_node(Op::kMatmul, a, b)); }
NodeId Graph::transpose(NodeId a) { return record(make_node(Op::kTranspose, a)); }
NodeId Graph::tanh(NodeId a) { return record(make_node(Op::kTanh, a)); }
NodeId Graph::sigmoid(NodeId a) { return record(make_node(Op::kSigmoid, a)); }
NodeId Graph::softplus(NodeId a) { return record(make_node(Op::kSoftplus, a)); }
NodeId Graph::exp(NodeId a) { return record(make_node(Op::kExp, a)); }
NodeId Graph::log(NodeId a) { return record(make_node(Op::kLog, a)); }
NodeId Graph::sqrt(NodeId a) { return record(make_node(Op::kSqrt, a)); }
NodeId Graph::sum(NodeId a) { return record(make_node(Op::kSum, a)); }
NodeId Graph::dot(NodeId a, NodeId b) { return record(make_node(Op::kDot, a, b)); }
NodeId Graph::l2_norm(NodeId a) { return record(make_node(Op::kL2Norm, a)); }

NodeId Graph::clamp(NodeId a, double lo, double hi) {
  if (!(lo <= hi)) throw ValueError("clamp: lo must be <= hi");
  Node n = make_node(Op::kClamp, a);
  n.c0 = lo;
  n.c1 = hi;
  return record(std::move(n));
}

NodeId Graph::arccos(NodeId a) {
  const NodeId clamped = clamp(a, -1.0 + kArccosClamp, 1.0 - kArccosClamp);
  return record(make_node(Op::kArccos, clamped));
}

NodeId Graph::select(NodeId a, int index) {
  require_vector(value(a), "select");
  Node n = make_node(Op::kSelect, a);
  n.index = index;
  return record(std::move(n));
}

NodeId Graph::softmax(NodeId a) {
  require_vector(value(a), "softmax");
  return record(make_node(Op::kSoftmax, a));
}

NodeId Graph::softmax_xent(NodeId logits, NodeId target) {
  require_vector(value(logits), "softmax_xent");
  return record(make_node(Op::kSoftmaxXent, logits, target));
}

void Graph::set_value(NodeId id, const Tensor& v) {
  check_id(id);
  Node& n = nodes_[id];
  if (n.op != Op::kLeaf && n.op != Op::kConst) {
    throw ValueError("set_value: only leaf/const nodes can be assigned");
  }
  if (!n.value.same_shape(v)) throw ShapeError("set_value: shape mismatch");
  if (!v.all_finite()) throw NumericError("set_value: non-finite value");
  n.value = v;
}

void Graph::recompute() {
  for (Node& n : nodes_) {
    if (n.op == Op::kLeaf || n.op == Op::kConst) continue;
    n.value = eval(n);
    if (!n.value.all_finite()) {
      throw NumericError(std::string(op_name(n.op)) + ": non-finite result during recompute");
    }
  }
}

void Graph::truncate(std::size_t mark) {
  if (mark > nodes_.size()) throw ValueError("truncate: mark beyond arena size");
  nodes_.resize(mark);
  for (auto it = transpose_memo_.begin(); it != transpose_memo_.end();) {
    if (static_cast<std::size_t>(it->second) >= mark ||
        static_cast<std::size_t>(it->first) >= mark) {
      it = transpose_memo_.erase(it);
    } else {
      ++it;
    }
  }
}

void Graph::clear() {
  nodes_.clear();
  transpose_memo_.clear();
}

NodeId Graph::transpose_memoized(NodeId a) {
  auto it = transpose_memo_.find(a);
  if (it != transpose_memo_.end()) return it->second;
  const NodeId t = transpose(a);
  transpose_memo_.emplace(a, t);
  return t;
}

std::vector<char> Graph::active_set(NodeId root, std::span<const NodeId> wrt) const {
  // A node matters iff it lies on a path from some wrt target up to the
  // root: ancestor of root AND descendant of a target.
  std::vector<char> anc(static_cast<std::size_t>(root) + 1, 0);
  std::vector<NodeId> stack{root};
  anc[root] = 1;
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    for (NodeId p : {n.a, n.b}) {
      if (p >= 0 && !anc[p]) {
        anc[p] = 1;
        stack.push_back(p);
      }
    }
  }
  std::vector<char> desc(static_cast<std::size_t>(root) + 1, 0);
  NodeId lo = root;
  for (NodeId w : wrt) {
    if (w <= root) {
      desc[w] = 1;
      lo = std::min(lo, w);
    }
  }
  for (NodeId id = lo; id <= root; ++id) {
    if (desc[id]) continue;
    const Node& n = nodes_[id];
    if ((n.a >= 0 && desc[n.a]) || (n.b >= 0 && desc[n.b])) desc[id] = 1;
  }
  for (NodeId id = 0; id <= root; ++id) anc[id] = anc[id] && desc[id];
  return anc;
}

std::vector<Tensor> Graph::gradient(NodeId root, std::span<const NodeId> wrt,
                                    Unreachable policy) {
  check_id(root);
  if (!nodes_[root].value.is_scalar()) {
    throw ValueError("gradient: root must be scalar, got (" +
                     std::to_string(nodes_[root].value.rows) + "x" +
                     std::to_string(nodes_[root].value.cols) + ")");
  }
  return gradient_seeded(root, Tensor::scalar(1.0), wrt, policy);
}

std::vector<Tensor> Graph::gradient_seeded(NodeId root, const Tensor& seed_adjoint,
                                           std::span<const NodeId> wrt, Unreachable policy) {
  check_id(root);
  for (NodeId w : wrt) check_id(w);
  if (!nodes_[root].value.same_shape(seed_adjoint)) {
    throw ShapeError("gradient: seed adjoint shape must match root value");
  }

  const std::vector<char> active = active_set(root, wrt);
  std::vector<Tensor> adj(static_cast<std::size_t>(root) + 1);
  adj[root] = seed_adjoint;

  for (NodeId id = root; id >= 0; --id) {
    if (!active[id] || adj[id].rows == 0) continue;
    const Node& n = nodes_[id];
    const Tensor& g = adj[id];
    const bool act_a = n.a >= 0 && active[n.a];
    const bool act_b = n.b >= 0 && active[n.b];
    if (!act_a && !act_b) continue;
    const Tensor* A = n.a >= 0 ? &nodes_[n.a].value : nullptr;
    const Tensor* B = n.b >= 0 ? &nodes_[n.b].value : nullptr;
    Tensor* da = act_a ? &adj[n.a] : nullptr;
    Tensor* db = act_b ? &adj[n.b] : nullptr;
    if (da) ensure_zeros(*da, *A);
    if (db) ensure_zeros(*db, *B);

    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
      case Op::kClampMask:
        break;
      case Op::kAdd:
        if (da) acc_add(*da, g);
        if (db) acc_add(*db, g);
        break;
      case Op::kSub:
        if (da) acc_add(*da, g);
        if (db) acc_scaled(*db, g, -1.0);
        break;
      case Op::kNeg:
        if (da) acc_scaled(*da, g, -1.0);
        break;
      case Op::kMul:
        if (A->same_shape(*B)) {
          if (da)
            for (std::size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i] * B->data[i];
          if (db)
            for (std::size_t i = 0; i < g.size(); ++i) db->data[i] += g.data[i] * A->data[i];
        } else if (B->is_scalar()) {
          if (da) acc_scaled(*da, g, B->data[0]);
          if (db)
            for (std::size_t i = 0; i < g.size(); ++i) db->data[0] += g.data[i] * A->data[i];
        } else {  // A scalar
          if (da)
            for (std::size_t i = 0; i < g.size(); ++i) da->data[0] += g.data[i] * B->data[i];
          if (db) acc_scaled(*db, g, A->data[0]);
        }
        break;
      case Op::kDiv: {
        const Tensor& Y = n.value;
        if (A->same_shape(*B)) {
          if (da)
            for (std::size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i] / B->data[i];
          if (db)
            for (std::size_t i = 0; i < g.size(); ++i)
              db->data[i] -= g.data[i] * Y.data[i] / B->data[i];
        } else if (B->is_scalar()) {
          const double s = B->data[0];
          if (da) acc_scaled(*da, g, 1.0 / s);
          if (db)
            for (std::size_t i = 0; i < g.size(); ++i)
              db->data[0] -= g.data[i] * Y.data[i] / s;
        } else {  // A scalar
          if (da)
            for (std::size_t i = 0; i < g.size(); ++i) da->data[0] += g.data[i] / B->data[i];
          if (db)
            for (std::size_t i = 0; i < g.size(); ++i)
              db->data[i] -= g.data[i] * Y.data[i] / B->data[i];
        }
        break;
      }
      case Op::kScale:
        if (da) acc_scaled(*da, g, n.c0);
        break;
      case Op::kMatmul:
        if (da) acc_matmul_nt(*da, g, *B);
        if (db) acc_matmul_tn(*db, *A, g);
        break;
      case Op::kTranspose:
        if (da)
          for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) da->at(j, i) += g.at(i, j);
        break;
      case Op::kTanh: {
        const Tensor& Y = n.value;
        if (da)
          for (std::size_t i = 0; i < g.size(); ++i)
            da->data[i] += g.data[i] * (1.0 - Y.data[i] * Y.data[i]);
        break;
      }
      case Op::kSigmoid: {
        const Tensor& Y = n.value;
        if (da)
          for (std::size_t i = 0; i < g.size(); ++i)
            da->data[i] += g.data[i] * Y.data[i] * (1.0 - Y.data[i]);
        break;
      }
      case Op::kSoftplus:
        if (da)
          for (std::size_t i = 0; i < g.size(); ++i)
            da->data[i] += g.data[i] * stable_sigmoid(A->data[i]);
        break;
      case Op::kExp: {
        const Tensor& Y = n.value;
        if (da)
          for (std::size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i] * Y.data[i];
        break;
      }
      case Op::kLog:
        if (da)
          for (std::size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i] / A->data[i];
        break;
      case Op::kSqrt: {
        const Tensor& Y = n.value;
        if (da)
          for (std::size_t i = 0; i < g.size(); ++i)
            da->data[i] += 0.5 * g.data[i] / Y.data[i];
        break;
      }
      case Op::kSum:
        if (da)
          for (std::size_t i = 0; i < da->size(); ++i) da->data[i] += g.data[0];
        break;
      case Op::kDot:
        if (da) acc_scaled(*da, *B, g.data[0]);
        if (db) acc_scaled(*db, *A, g.data[0]);
        break;
      case Op::kL2Norm: {
        const double norm = n.value.data[0];
        if (da) acc_scaled(*da, *A, g.data[0] / norm);
        break;
      }
      case Op::kClamp:
        if (da)
          for (std::size_t i = 0; i < g.size(); ++i)
            if (n.c0 < A->data[i] && A->data[i] < n.c1) da->data[i] += g.data[i];
        break;
      case Op::kArccos:
        if (da)
          for (std::size_t i = 0; i < g.size(); ++i)
            da->data[i] -= g.data[i] / std::sqrt(1.0 - A->data[i] * A->data[i]);
        break;
      case Op::kSelect:
        if (da) da->data[n.index] += g.data[0];
        break;
      case Op::kSoftmax: {
        const Tensor& S = n.value;
        if (da) {
          double sg = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) sg += S.data[i] * g.data[i];
          for (std::size_t i = 0; i < g.size(); ++i)
            da->data[i] += S.data[i] * (g.data[i] - sg);
        }
        break;
      }
      case Op::kSoftmaxXent: {
        const double gs = g.data[0];
        if (da) {
          const Tensor S = softmax_value(*A);
          for (std::size_t i = 0; i < S.size(); ++i)
            da->data[i] += gs * (S.data[i] - B->data[i]);
        }
        if (db) acc_scaled(*db, *A, -gs);
        break;
      }
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (NodeId w : wrt) {
    if (w <= root && adj[w].rows != 0) {
      if (!adj[w].all_finite()) {
        throw NumericError("gradient: non-finite adjoint for node " + std::to_string(w));
      }
      out.push_back(adj[w]);
    } else if (policy == Unreachable::kZero) {
      out.push_back(Tensor(nodes_[w].value.rows, nodes_[w].value.cols));
    } else {
      throw ValueError("gradient: target node " + std::to_string(w) +
                       " is not reachable from the root");
    }
  }
  return out;
}

std::vector<NodeId> Graph::gradient_nodes(NodeId root, std::span<const NodeId> wrt,
                                          Unreachable policy) {
  check_id(root);
  for (NodeId w : wrt) check_id(w);
  if (!nodes_[root].value.is_scalar()) {
    throw ValueError("gradient_nodes: root must be scalar");
  }

  const std::vector<char> active = active_set(root, wrt);
  std::vector<NodeId> adj(static_cast<std::size_t>(root) + 1, kNoNode);
  adj[root] = scalar_const(1.0);

  auto accumulate = [&](NodeId p, NodeId contrib) {
    adj[p] = (adj[p] == kNoNode) ? contrib : add(adj[p], contrib);
  };

  for (NodeId id = root; id >= 0; --id) {
    if (!active[id] || adj[id] == kNoNode) continue;
    // Copy the parent ids: recording VJP nodes may reallocate the arena.
    const Op op = nodes_[id].op;
    const NodeId a = nodes_[id].a;
    const NodeId b = nodes_[id].b;
    const double c0 = nodes_[id].c0;
    const double c1 = nodes_[id].c1;
    const int index = nodes_[id].index;
    const NodeId g = adj[id];
    const bool act_a = a >= 0 && active[a];
    const bool act_b = b >= 0 && active[b];
    if (!act_a && !act_b) continue;

    switch (op) {
      case Op::kLeaf:
      case Op::kConst:
      case Op::kClampMask:
        break;
      case Op::kAdd:
        if (act_a) accumulate(a, g);
        if (act_b) accumulate(b, g);
        break;
      case Op::kSub:
        if (act_a) accumulate(a, g);
        if (act_b) accumulate(b, neg(g));
        break;
      case Op::kNeg:
        if (act_a) accumulate(a, neg(g));
        break;
      case Op::kMul: {
        const bool same = nodes_[a].value.same_shape(nodes_[b].value);
        const bool b_scalar = !same && nodes_[b].value.is_scalar();
        if (act_a) accumulate(a, same || b_scalar ? mul(g, b) : dot(g, b));
        if (act_b) accumulate(b, same || !b_scalar ? mul(g, a) : dot(g, a));
        break;
      }
      case Op::kDiv: {
        const bool same = nodes_[a].value.same_shape(nodes_[b].value);
        const bool b_scalar = !same && nodes_[b].value.is_scalar();
        if (act_a) {
          if (same || b_scalar) {
            accumulate(a, div(g, b));
          } else {
            accumulate(a, sum(div(g, b)));
          }
        }
        if (act_b) {
          if (same || !b_scalar) {
            accumulate(b, neg(div(mul(g, id), b)));
          } else {
            accumulate(b, neg(div(dot(g, id), b)));
          }
        }
        break;
      }
      case Op::kScale:
        if (act_a) accumulate(a, scale(g, c0));
        break;
      case Op::kMatmul:
        if (act_a) accumulate(a, matmul(g, transpose_memoized(b)));
        if (act_b) accumulate(b, matmul(transpose_memoized(a), g));
        break;
      case Op::kTranspose:
        if (act_a) accumulate(a, transpose(g));
        break;
      case Op::kTanh:
        if (act_a) accumulate(a, sub(g, mul(mul(g, id), id)));
        break;
      case Op::kSigmoid:
        if (act_a) accumulate(a, sub(mul(g, id), mul(mul(g, id), id)));
        break;
      case Op::kSoftplus:
        if (act_a) accumulate(a, mul(g, sigmoid(a)));
        break;
      case Op::kExp:
        if (act_a) accumulate(a, mul(g, id));
        break;
      case Op::kLog:
        if (act_a) accumulate(a, div(g, a));
        break;
      case Op::kSqrt:
        if (act_a) accumulate(a, div(scale(g, 0.5), id));
        break;
      case Op::kSum: {
        if (act_a) {
          const Tensor& av = nodes_[a].value;
          accumulate(a, mul(constant(map_unary(av, [](double) { return 1.0; })), g));
        }
        break;
      }
      case Op::kDot:
        if (act_a) accumulate(a, mul(b, g));
        if (act_b) accumulate(b, mul(a, g));
        break;
      case Op::kL2Norm:
        if (act_a) accumulate(a, div(mul(a, g), id));
        break;
      case Op::kClamp: {
        if (act_a) {
          Node mask = make_node(Op::kClampMask, a);
          mask.c0 = c0;
          mask.c1 = c1;
          accumulate(a, mul(g, record(std::move(mask))));
        }
        break;
      }
      case Op::kArccos: {
        if (act_a) {
          const Tensor& av = nodes_[a].value;
          const NodeId ones = constant(map_unary(av, [](double) { return 1.0; }));
          accumulate(a, neg(div(g, sqrt(sub(ones, mul(a, a))))));
        }
        break;
      }
      case Op::kSelect: {
        if (act_a) {
          Tensor oh(nodes_[a].value.rows, nodes_[a].value.cols);
          oh.data[index] = 1.0;
          accumulate(a, mul(constant(std::move(oh)), g));
        }
        break;
      }
      case Op::kSoftmax:
        if (act_a) accumulate(a, sub(mul(id, g), mul(id, dot(id, g))));
        break;
      case Op::kSoftmaxXent: {
        if (act_a) accumulate(a, mul(sub(softmax(a), b), g));
        if (act_b) accumulate(b, neg(mul(a, g)));
        break;
      }
    }
  }

  std::vector<NodeId> out;
  out.reserve(wrt.size());
  for (NodeId w : wrt) {
    if (w <= root && adj[w] != kNoNode) {
      out.push_back(adj[w]);
    } else if (policy == Unreachable::kZero) {
      out.push_back(constant(Tensor(nodes_[w].value.rows, nodes_[w].value.cols)));
    } else {
      throw ValueError("gradient_nodes: target node " + std::to_string(w) +
                       " is not reachable from the root");
    }
  }
  return out;
}

}  // namespace gdr
