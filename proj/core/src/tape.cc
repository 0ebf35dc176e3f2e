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

#include "qsnn/tape.h"

#include <algorithm>
#include <unordered_map>
#include <utility>

#include "qsnn/errors.h"

namespace qsnn {

void Tape::Record(std::string op, std::vector<Tensor> inputs, Tensor& output,
                  BackwardFn backward) {
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
    return t.defined() && t.requires_grad();
  });
  if (!any) return;
  output.storage().requires_grad = true;
  output.storage().is_leaf = false;
  nodes_.push_back(TapeNode{std::move(op), std::move(inputs), output,
                            std::move(backward)});
}

void Tape::Backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " +
                     ShapeToString(loss.shape()));
  }
  const bool recorded = std::any_of(nodes_.begin(), nodes_.end(), [&](const TapeNode& n) {
    return n.output.id() == loss.id();
  });
  if (!recorded) throw UsageError("backward() on a loss not recorded by this tape");

  // Gradients of non-leaf tensors are scratch; only leaves accumulate.
  std::unordered_map<const void*, std::vector<float>> scratch;
  scratch[loss.id()] = {1.0f};

  std::vector<std::span<float>> grad_inputs;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    TapeNode& node = *it;
    auto found = scratch.find(node.output.id());
    if (found == scratch.end()) continue;
    std::vector<float> grad_output = std::move(found->second);
    scratch.erase(found);

    grad_inputs.clear();
    for (Tensor& input : node.inputs) {
      if (!input.defined() || !input.requires_grad()) {
        grad_inputs.emplace_back();
      } else if (input.is_leaf()) {
        grad_inputs.push_back(input.mutable_grad());
      } else {
        std::vector<float>& g = scratch[input.id()];
        if (g.empty()) g.assign(input.size(), 0.0f);
        grad_inputs.emplace_back(g);
      }
    }
    node.backward(grad_output, grad_inputs);
  }
}

}  // namespace qsnn
