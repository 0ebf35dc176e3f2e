// Copyright 2026 The qsnn Authors.
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

#ifndef QSNN_ERRORS_H_
#define QSNN_ERRORS_H_

#include <stdexcept>
#include <string>

namespace qsnn {

// Operand shapes are incompatible (e.g. matmul inner dimensions).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Layer or experiment configuration cannot be realized.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// API misuse: wrong call order, missing context, non-scalar loss.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Caller-supplied data is out of range (labels, empty datasets).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents. The message carries a byte offset or line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ANN model cannot be mapped to a spiking model.
class ConversionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qsnn

#endif  // QSNN_ERRORS_H_
