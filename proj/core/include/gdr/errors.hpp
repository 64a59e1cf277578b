// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gdr {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operand shapes do not conform (matmul mismatch, wrong vector length, ...).
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

/// A computation produced NaN/Inf, or a value is outside its legal domain.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

/// Invalid argument at an API boundary (bad sizes, empty sets, bad policy).
class ValueError : public Error {
 public:
  explicit ValueError(const std::string& what) : Error(what) {}
};

/// File format / I/O failures (bad magic, truncation, version mismatch).
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace gdr
