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

// Differentiable tensor ops. Every op takes an optional Tape; with a null
// tape (inference) nothing is recorded.

#ifndef QSNN_OPS_H_
#define QSNN_OPS_H_

#include <cstddef>
#include <span>

#include "qsnn/tape.h"
#include "qsnn/tensor.h"

namespace qsnn {

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// [m x k] . [k x n] -> [m x n].
Tensor MatMul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

// x [N x in], weight [out x in], bias [out] -> x . weight^T + bias.
Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias,
              Tape* tape = nullptr);

// Cross-correlation. x [N x C x H x W], weight [F x C x kh x kw], bias [F].
// Output spatial size is (H + 2*padding - kh) / stride + 1; a non-integral
// quotient is a ConfigError.
Tensor Conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              Conv2dGeometry geometry, Tape* tape = nullptr);

// Mean over k x k windows of an [N x C x H x W] tensor.
Tensor AvgPool2d(const Tensor& x, std::size_t kernel, std::size_t stride,
                 Tape* tape = nullptr);

// Forward only. Recording it on a tape with a grad-requiring input is a
// UsageError: max-pool must be swapped for avg-pool before training.
Tensor MaxPool2d(const Tensor& x, std::size_t kernel, std::size_t stride,
                 Tape* tape = nullptr);

// [N x ...] -> [N x prod(...)].
Tensor Flatten(const Tensor& x, Tape* tape = nullptr);

Tensor Sum(const Tensor& x, Tape* tape = nullptr);
Tensor Scale(const Tensor& x, float factor, Tape* tape = nullptr);

// Mean over the batch of -log softmax(logits)[label]. Max-shifted for
// stability. Labels outside [0, K) raise InputError.
Tensor SoftmaxCrossEntropy(const Tensor& logits, std::span<const int> labels,
                           Tape* tape = nullptr);

// Row-wise argmax of an [N x K] tensor.
std::vector<int> ArgMax(const Tensor& logits);

}  // namespace qsnn

#endif  // QSNN_OPS_H_
