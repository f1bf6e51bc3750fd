// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_ERROR_HPP_
#define SEGRAVIR_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace segravir {

// Bad argument shapes, out-of-range hyperparameters, invalid configs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or missing input data: files, label values, manifests,
// checkpoints.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace segravir

#endif  // SEGRAVIR_ERROR_HPP_
