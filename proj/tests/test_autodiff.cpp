// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <functional>
#include <random>

#include <doctest.h>

#include "gdr/autodiff.hpp"
#include "gdr/errors.hpp"
#include "support.hpp"

using namespace gdr;
using gdr::test::fd_gradient;
using gdr::test::fd_second;
using gdr::test::rel_err;
using gdr::test::rel_l2_err;

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("recorded primitives produce expected forward values") {
  Graph g;
  const NodeId a = g.leaf(Tensor::scalar(2.0));
  const NodeId b = g.leaf(Tensor::scalar(3.0));
  CHECK(g.value(g.add(a, b)).scalar_value() == 5.0);
  CHECK(g.value(g.tanh(g.scalar_const(0.0))).scalar_value() == 0.0);
  // arccos clamps its operand to 1 - 1e-7 first, so arccos(1) is the angle
  // of the clamped cosine: ~4.5e-4 instead of an exact 0.
  CHECK(std::fabs(g.value(g.arccos(g.scalar_const(1.0))).scalar_value()) < 1e-3);
}

TEST_CASE("shape mismatches and non-finite results are rejected") {
  Graph g;
  const NodeId v3 = g.leaf(Tensor(3, 1));
  const NodeId v4 = g.leaf(Tensor(4, 1));
  CHECK_THROWS_AS(g.add(v3, v4), ShapeError);
  CHECK_THROWS_AS(g.matmul(v3, v4), ShapeError);
  CHECK_THROWS_AS(g.log(g.scalar_const(-1.0)), NumericError);   // NaN
  CHECK_THROWS_AS(g.div(v3, g.scalar_const(0.0)), NumericError);  // Inf
  CHECK_THROWS_AS(g.leaf(Tensor::scalar(std::nan(""))), NumericError);
}

TEST_CASE("gradient of x*x at 3 is 6; tanh'(0) is 1") {
  Graph g;
  const NodeId x = g.leaf(Tensor::scalar(3.0));
  const NodeId y = g.mul(x, x);
  const NodeId wrt[] = {x};
  CHECK(g.gradient(y, wrt)[0].scalar_value() == doctest::Approx(6.0).epsilon(1e-14));

  Graph g2;
  const NodeId x2 = g2.leaf(Tensor::scalar(0.0));
  const NodeId wrt2[] = {x2};
  CHECK(g2.gradient(g2.tanh(x2), wrt2)[0].scalar_value() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gradient errors: non-scalar root, unreachable target") {
  Graph g;
  const NodeId x = g.leaf(Tensor(3, 1));
  const NodeId y = g.tanh(x);
  const NodeId wrt[] = {x};
  CHECK_THROWS_AS(g.gradient(y, wrt), ValueError);

  const NodeId unrelated = g.leaf(Tensor::scalar(1.0));
  const NodeId root = g.sum(y);
  const NodeId wrt2[] = {unrelated};
  CHECK_THROWS_AS(g.gradient(root, wrt2), ValueError);
  // The zero policy instead reports a zero gradient for targets the root
  // does not depend on.
  CHECK(g.gradient(root, wrt2, Unreachable::kZero)[0].scalar_value() == 0.0);
}

namespace {

struct PrimitiveCase {
  const char* name;
  std::function<NodeId(Graph&, NodeId)> build;  // vector leaf -> scalar root
  double lo, hi;          // componentwise input range
  double boundary_pad;    // skip inputs this close to a domain boundary
  std::function<bool(const std::vector<double>&)> admit;  // extra input filter
};

bool always(const std::vector<double>&) { return true; }

std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;
  cases.push_back({"add", [](Graph& g, NodeId x) {
    return g.sum(g.add(x, g.constant(Tensor::column({0.3, -0.8, 1.2, 0.1}))));
  }, -2, 2, 0, always});
  cases.push_back({"sub+neg", [](Graph& g, NodeId x) {
    return g.sum(g.neg(g.sub(x, g.constant(Tensor::column({0.5, 0.5, -0.25, 2.0})))));
  }, -2, 2, 0, always});
  cases.push_back({"mul", [](Graph& g, NodeId x) {
    return g.sum(g.mul(x, g.constant(Tensor::column({1.5, -2.0, 0.3, 0.9}))));
  }, -2, 2, 0, always});
  cases.push_back({"mul_scalar_broadcast", [](Graph& g, NodeId x) {
    return g.sum(g.mul(x, g.sum(x)));
  }, -2, 2, 0, always});
  cases.push_back({"div", [](Graph& g, NodeId x) {
    return g.sum(g.div(g.constant(Tensor::column({1.0, 2.0, -1.0, 0.5})), x));
  }, 0.2, 2, 0, always});
  cases.push_back({"scale", [](Graph& g, NodeId x) {
    return g.sum(g.scale(x, -3.25));
  }, -2, 2, 0, always});
  cases.push_back({"matmul+transpose", [](Graph& g, NodeId x) {
    Tensor w(3, 4);
    double v = -0.6;
    for (double& e : w.data) {
      e = v;
      v += 0.17;
    }
    const NodeId wx = g.matmul(g.constant(w), x);
    return g.dot(g.transpose(g.transpose(wx)), wx);
  }, -2, 2, 0, always});
  cases.push_back({"tanh", [](Graph& g, NodeId x) { return g.sum(g.tanh(x)); }, -2, 2, 0, always});
  cases.push_back({"sigmoid", [](Graph& g, NodeId x) { return g.sum(g.sigmoid(x)); }, -2, 2, 0,
                   always});
  cases.push_back({"softplus", [](Graph& g, NodeId x) { return g.sum(g.softplus(x)); }, -2, 2, 0,
                   always});
  cases.push_back({"exp", [](Graph& g, NodeId x) { return g.sum(g.exp(x)); }, -2, 2, 0, always});
  cases.push_back({"log", [](Graph& g, NodeId x) { return g.sum(g.log(x)); }, 0.1, 2, 0, always});
  cases.push_back({"sqrt", [](Graph& g, NodeId x) { return g.sum(g.sqrt(x)); }, 0.1, 2, 0,
                   always});
  cases.push_back({"sum", [](Graph& g, NodeId x) { return g.sum(x); }, -2, 2, 0, always});
  cases.push_back({"dot", [](Graph& g, NodeId x) { return g.dot(x, x); }, -2, 2, 0, always});
  cases.push_back({"l2_norm", [](Graph& g, NodeId x) { return g.l2_norm(x); }, -2, 2, 0,
                   [](const std::vector<double>& v) {
                     double s = 0;
                     for (double e : v) s += e * e;
                     return std::sqrt(s) > 0.1;
                   }});
  cases.push_back({"clamp", [](Graph& g, NodeId x) {
    return g.sum(g.clamp(x, -0.5, 0.7));
  }, -2, 2, 1e-3, [](const std::vector<double>& v) {
    for (double e : v) {
      if (std::fabs(e + 0.5) < 1e-3 || std::fabs(e - 0.7) < 1e-3) return false;
    }
    return true;
  }});
  cases.push_back({"arccos", [](Graph& g, NodeId x) { return g.sum(g.arccos(x)); }, -0.999, 0.999,
                   1e-3, always});
  cases.push_back({"select", [](Graph& g, NodeId x) { return g.select(x, 2); }, -2, 2, 0, always});
  cases.push_back({"softmax", [](Graph& g, NodeId x) {
    return g.dot(g.softmax(x), g.constant(Tensor::column({0.2, -1.0, 0.5, 1.5})));
  }, -2, 2, 0, always});
  cases.push_back({"softmax_xent", [](Graph& g, NodeId x) {
    Tensor h(4, 1);
    h.data[1] = 1.0;
    return g.softmax_xent(x, g.constant(std::move(h)));
  }, -2, 2, 0, always});
  return cases;
}

}  // namespace

TEST_CASE("first derivatives of every primitive match central finite differences") {
  // 100 random inputs per primitive in (-2,2) (intersected with the
  // primitive's domain), points within 1e-3 of a domain boundary excluded.
  std::mt19937_64 rng(7);
  for (const PrimitiveCase& pc : primitive_cases()) {
    CAPTURE(pc.name);
    int tested = 0;
    int attempts = 0;
    while (tested < 100 && attempts < 1000) {
      ++attempts;
      const std::vector<double> xv = gdr::test::random_vector(rng, 4, pc.lo, pc.hi);
      if (!pc.admit(xv)) continue;
      Graph g;
      const NodeId x = g.leaf(Tensor::column(xv));
      const NodeId root = pc.build(g, x);
      const NodeId wrt[] = {x};
      const std::vector<double> ad = g.gradient(root, wrt, Unreachable::kZero)[0].data;
      const std::vector<double> fd = fd_gradient(g, x, root, 1e-5);
      CHECK(rel_l2_err(ad, fd) < 1e-6);
      ++tested;
    }
    CHECK(tested == 100);
  }
}

TEST_CASE("value-mode and recorded-mode gradients agree") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    const NodeId x = g.leaf(Tensor::column(gdr::test::random_vector(rng, 4, -1.5, 1.5)));
    Tensor w(4, 4);
    for (double& e : w.data) e = gdr::test::random_vector(rng, 1, -0.7, 0.7)[0];
    const NodeId h = g.tanh(g.matmul(g.constant(w), x));
    const NodeId root = g.add(g.l2_norm(h), g.softmax_xent(h, g.softmax(x)));
    const NodeId wrt[] = {x};
    const std::vector<double> fast = g.gradient(root, wrt)[0].data;
    const NodeId gnode = g.gradient_nodes(root, wrt)[0];
    CHECK(rel_l2_err(fast, g.value(gnode).data) < 1e-12);
  }
}

TEST_CASE("second-order: d2(x^3)/dx2 at 2 is 12") {
  Graph g;
  const NodeId x = g.leaf(Tensor::scalar(2.0));
  const NodeId y = g.mul(g.mul(x, x), x);
  const NodeId wrt[] = {x};
  const NodeId dy = g.gradient_nodes(y, wrt)[0];
  const double d2 = g.gradient(dy, wrt)[0].scalar_value();
  CHECK(d2 == doctest::Approx(12.0).epsilon(1e-12));
  // Independent second-difference oracle on the same function.
  CHECK(rel_err(d2, fd_second(g, x, y, 1e-4)) < 1e-4);
}

TEST_CASE("second derivatives via differentiable backward match second-order differences") {
  struct SecondCase {
    const char* name;
    std::function<NodeId(Graph&, NodeId)> build;
    double lo, hi;
  };
  std::vector<SecondCase> cases = {
      {"tanh", [](Graph& g, NodeId x) { return g.tanh(x); }, -1.5, 1.5},
      {"sigmoid", [](Graph& g, NodeId x) { return g.sigmoid(x); }, -1.5, 1.5},
      {"softplus", [](Graph& g, NodeId x) { return g.softplus(x); }, -1.5, 1.5},
      {"exp", [](Graph& g, NodeId x) { return g.exp(x); }, -1.5, 1.5},
      {"log", [](Graph& g, NodeId x) { return g.log(x); }, 0.3, 2.0},
      {"sqrt", [](Graph& g, NodeId x) { return g.sqrt(x); }, 0.3, 2.0},
      {"arccos", [](Graph& g, NodeId x) { return g.arccos(x); }, -0.9, 0.9},
      {"softmax_xent_of_pair",
       [](Graph& g, NodeId x) {
         Tensor h(2, 1);
         h.data[0] = 1.0;
         // logits (x, 0.3); curvature flows through the x component
         Tensor fixed(2, 1);
         fixed.data[1] = 1.0;
         const NodeId lifted = g.add(g.mul(g.constant(Tensor::column({1.0, 0.0})), x),
                                     g.scale(g.constant(std::move(fixed)), 0.3));
         return g.softmax_xent(lifted, g.constant(std::move(h)));
       },
       -1.5, 1.5},
      {"l2_norm_squared_chain",
       [](Graph& g, NodeId x) {
         const NodeId v = g.mul(g.constant(Tensor::column({0.8, -0.6, 0.4})), x);
         const NodeId shifted = g.add(v, g.constant(Tensor::column({0.1, 1.0, -0.4})));
         return g.l2_norm(shifted);
       },
       -1.5, 1.5},
  };
  std::mt19937_64 rng(23);
  for (const SecondCase& sc : cases) {
    CAPTURE(sc.name);
    for (int trial = 0; trial < 25; ++trial) {
      const double x0 = gdr::test::random_vector(rng, 1, sc.lo, sc.hi)[0];
      Graph g;
      const NodeId x = g.leaf(Tensor::scalar(x0));
      const NodeId root = sc.build(g, x);
      const NodeId wrt[] = {x};
      const NodeId grad = g.gradient_nodes(root, wrt, Unreachable::kZero)[0];
      const double d2 = g.gradient(grad, wrt, Unreachable::kZero)[0].scalar_value();
      const double fd = fd_second(g, x, root, 1e-4);
      if (std::fabs(fd) < 1e-6) {
        CHECK(std::fabs(d2 - fd) < 1e-6);
      } else {
        CHECK(rel_err(d2, fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("gradient is linear in the root") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const double a = gdr::test::random_vector(rng, 1, -2, 2)[0];
    const double b = gdr::test::random_vector(rng, 1, -2, 2)[0];
    Graph g;
    const NodeId x = g.leaf(Tensor::column(gdr::test::random_vector(rng, 5, -1.5, 1.5)));
    const NodeId f = g.l2_norm(g.tanh(x));
    const NodeId h = g.sum(g.exp(g.scale(x, 0.5)));
    const NodeId combo = g.add(g.scale(f, a), g.scale(h, b));
    const NodeId wrt[] = {x};
    const std::vector<double> gf = g.gradient(f, wrt)[0].data;
    const std::vector<double> gh = g.gradient(h, wrt)[0].data;
    const std::vector<double> gc = g.gradient(combo, wrt)[0].data;
    for (std::size_t i = 0; i < gc.size(); ++i) {
      CHECK(gc[i] == doctest::Approx(a * gf[i] + b * gh[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("deterministic replay: gradient twice on an unmutated graph is identical") {
  Graph g;
  const NodeId x = g.leaf(Tensor::column({0.4, -0.9, 1.1}));
  const NodeId root = g.l2_norm(g.tanh(g.scale(x, 1.7)));
  const NodeId wrt[] = {x};
  const std::vector<double> first = g.gradient(root, wrt)[0].data;
  const std::vector<double> second = g.gradient(root, wrt)[0].data;
  CHECK(first == second);
}

TEST_CASE("set_value + recompute replays the recorded tape") {
  Graph g;
  const NodeId x = g.leaf(Tensor::column({0.2, 0.4}));
  const NodeId root = g.sum(g.tanh(x));
  g.set_value(x, Tensor::column({1.0, -1.0}));
  g.recompute();
  CHECK(g.value(root).scalar_value() ==
        doctest::Approx(std::tanh(1.0) + std::tanh(-1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(g.set_value(root, Tensor::scalar(0.0)), ValueError);
  CHECK_THROWS_AS(g.set_value(x, Tensor::column({1.0, 2.0, 3.0})), ShapeError);
}

TEST_CASE("truncate rolls the arena back") {
  Graph g;
  const NodeId x = g.leaf(Tensor::scalar(0.5));
  const std::size_t mark = g.size();
  const NodeId y = g.tanh(x);
  CHECK(g.size() > mark);
  g.truncate(mark);
  CHECK(g.size() == mark);
  (void)y;
  const NodeId z = g.exp(x);  // arena reuse after truncation
  CHECK(g.value(z).scalar_value() == doctest::Approx(std::exp(0.5)));
}

TEST_SUITE_END();
