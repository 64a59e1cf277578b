// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace gdr {

/// Dense row-major matrix of doubles. Column vectors are (n x 1), scalars
/// are (1 x 1). All library numerics run in 64-bit floating point.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor column(const std::vector<double>& v) {
    Tensor t(static_cast<int>(v.size()), 1);
    t.data = v;
    return t;
  }

  std::size_t size() const { return data.size(); }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  double scalar_value() const { return data[0]; }

  bool all_finite() const;
};

Tensor t_add(const Tensor& a, const Tensor& b);
Tensor t_sub(const Tensor& a, const Tensor& b);
Tensor t_neg(const Tensor& a);
// Elementwise multiply / divide; if one operand is 1x1 it broadcasts.
Tensor t_mul(const Tensor& a, const Tensor& b);
Tensor t_div(const Tensor& a, const Tensor& b);
Tensor t_scale(const Tensor& a, double c);
Tensor t_matmul(const Tensor& a, const Tensor& b);
Tensor t_transpose(const Tensor& a);
Tensor t_sum(const Tensor& a);     // -> 1x1
Tensor t_dot(const Tensor& a, const Tensor& b);  // same shape -> 1x1
Tensor t_l2_norm(const Tensor& a);               // -> 1x1

double l2_norm(const std::vector<double>& v);
double dot(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace gdr
