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

#ifndef QSNN_TENSOR_H_
#define QSNN_TENSOR_H_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace qsnn {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major float32 array with an optional gradient buffer.
//
// A Tensor is a handle: copies share storage, so a parameter held by a model
// and the same parameter referenced from a Tape are one object. Use Clone()
// for an independent deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f, bool requires_grad = false);
  Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);

  static Tensor Scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const float> values() const;
  std::span<float> mutable_values();
  float item() const;
  float at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool requires_grad);

  // Leaves are tensors not produced by a recorded op. Only leaves keep a
  // persistent grad buffer; intermediate gradients live inside Tape::Backward.
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const float> grad() const;
  // Allocates a zero-filled gradient buffer on first use.
  std::span<float> mutable_grad();
  void zero_grad();

  // Same values, fresh storage, no grad, leaf.
  Tensor Clone() const;
  // Shares no storage; values reinterpreted with a new shape of equal size.
  Tensor Reshaped(Shape shape) const;

  const void* id() const { return impl_.get(); }

 private:
  friend class Tape;
  struct Storage {
    Shape shape;
    std::vector<float> values;
    std::vector<float> grad;
    bool requires_grad = false;
    bool is_leaf = true;
  };
  std::shared_ptr<Storage> impl_;

  const Storage& storage() const;
  Storage& storage();
};

}  // namespace qsnn

#endif  // QSNN_TENSOR_H_
