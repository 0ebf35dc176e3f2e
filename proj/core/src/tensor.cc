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

#include "qsnn/tensor.h"

#include <algorithm>
#include <sstream>
#include <utility>

#include "qsnn/errors.h"

namespace qsnn {

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void CheckShape(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           ShapeToString(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill, bool requires_grad)
    : impl_(std::make_shared<Storage>()) {
  CheckShape(shape);
  impl_->values.assign(NumElements(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<float> values, bool requires_grad)
    : impl_(std::make_shared<Storage>()) {
  CheckShape(shape);
  if (NumElements(shape) != values.size()) {
    throw DimensionError("shape " + ShapeToString(shape) + " needs " +
                         std::to_string(NumElements(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::Scalar(float value, bool requires_grad) {
  return Tensor({1}, std::vector<float>{value}, requires_grad);
}

const Tensor::Storage& Tensor::storage() const {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return *impl_;
}

Tensor::Storage& Tensor::storage() {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return storage().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + ShapeToString(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return storage().values.size(); }

std::span<const float> Tensor::values() const { return storage().values; }
std::span<float> Tensor::mutable_values() { return storage().values; }

float Tensor::item() const {
  if (size() != 1) {
    throw UsageError("item() on tensor of shape " + ShapeToString(shape()));
  }
  return storage().values[0];
}

bool Tensor::requires_grad() const { return storage().requires_grad; }
void Tensor::set_requires_grad(bool requires_grad) {
  storage().requires_grad = requires_grad;
}

bool Tensor::is_leaf() const { return storage().is_leaf; }

bool Tensor::has_grad() const { return !storage().grad.empty(); }

std::span<const float> Tensor::grad() const { return storage().grad; }

std::span<float> Tensor::mutable_grad() {
  Storage& s = storage();
  if (s.grad.empty()) s.grad.assign(s.values.size(), 0.0f);
  return s.grad;
}

void Tensor::zero_grad() {
  Storage& s = storage();
  std::fill(s.grad.begin(), s.grad.end(), 0.0f);
}

Tensor Tensor::Clone() const {
  const Storage& s = storage();
  return Tensor(s.shape, s.values, false);
}

Tensor Tensor::Reshaped(Shape shape) const {
  const Storage& s = storage();
  if (NumElements(shape) != s.values.size()) {
    throw DimensionError("cannot reshape " + ShapeToString(s.shape) + " to " +
                         ShapeToString(shape));
  }
  return Tensor(std::move(shape), s.values, false);
}

}  // namespace qsnn
