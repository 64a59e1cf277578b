// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include "gdr/tensor.hpp"

#include <cmath>
#include <string>

#include "gdr/errors.hpp"

namespace gdr {

namespace {

std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.rows) + "x" + std::to_string(t.cols) + ")";
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                   " do not conform");
}

}  // namespace

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor t_add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("add", a, b);
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

Tensor t_sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("sub", a, b);
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  return out;
}

Tensor t_neg(const Tensor& a) {
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = -a.data[i];
  return out;
}

Tensor t_mul(const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) {
    Tensor out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
  }
  if (b.is_scalar()) {
    Tensor out(a.rows, a.cols);
    const double s = b.data[0];
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * s;
    return out;
  }
  if (a.is_scalar()) {
    Tensor out(b.rows, b.cols);
    const double s = a.data[0];
    for (std::size_t i = 0; i < b.size(); ++i) out.data[i] = s * b.data[i];
    return out;
  }
  shape_fail("mul", a, b);
}

Tensor t_div(const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) {
    Tensor out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] / b.data[i];
    return out;
  }
  if (b.is_scalar()) {
    Tensor out(a.rows, a.cols);
    const double s = b.data[0];
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] / s;
    return out;
  }
  if (a.is_scalar()) {
    Tensor out(b.rows, b.cols);
    const double s = a.data[0];
    for (std::size_t i = 0; i < b.size(); ++i) out.data[i] = s / b.data[i];
    return out;
  }
  shape_fail("div", a, b);
}

Tensor t_scale(const Tensor& a, double c) {
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * c;
  return out;
}

Tensor t_matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows) shape_fail("matmul", a, b);
  Tensor out(a.rows, b.cols);
  // i-k-j loop order keeps the inner loop contiguous in both b and out.
  for (int i = 0; i < a.rows; ++i) {
    double* out_row = &out.data[static_cast<std::size_t>(i) * b.cols];
    const double* a_row = &a.data[static_cast<std::size_t>(i) * a.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a_row[k];
      if (aik == 0.0) continue;
      const double* b_row = &b.data[static_cast<std::size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Tensor t_transpose(const Tensor& a) {
  Tensor out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor t_sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v;
  return Tensor::scalar(s);
}

Tensor t_dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return Tensor::scalar(s);
}

Tensor t_l2_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return Tensor::scalar(std::sqrt(s));
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace gdr
