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

#ifndef QSNN_TAPE_H_
#define QSNN_TAPE_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qsnn/tensor.h"

namespace qsnn {

// Backward rule of one recorded op. `grad_inputs[i]` is empty when input i
// does not require a gradient; otherwise the rule must accumulate (+=) into it.
using BackwardFn = std::function<void(std::span<const float> grad_output,
                                      std::span<const std::span<float>> grad_inputs)>;

struct TapeNode {
  std::string op;
  std::vector<Tensor> inputs;
  Tensor output;
  BackwardFn backward;
};

// Reverse-mode autodiff record. One tape per training context; not
// thread-safe. Ops append in creation order, so the node list is a
// topological order and Backward walks it once in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Appends a node when any input requires a gradient and marks `output` as a
  // non-leaf that requires a gradient. No-op otherwise.
  void Record(std::string op, std::vector<Tensor> inputs, Tensor& output,
              BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and accumulates into every reachable leaf that
  // requires a gradient. Repeated calls accumulate; call Tensor::zero_grad to
  // reset. Throws UsageError for a non-scalar loss or one not on this tape.
  void Backward(const Tensor& loss);

  void Clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<TapeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TapeNode> nodes_;
};

}  // namespace qsnn

#endif  // QSNN_TAPE_H_
