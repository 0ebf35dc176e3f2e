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

#ifndef QSNN_MODEL_H_
#define QSNN_MODEL_H_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qsnn/ops.h"
#include "qsnn/quantizer.h"
#include "qsnn/tape.h"
#include "qsnn/tensor.h"

namespace qsnn {

struct LinearLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
};

struct ConvLayer {
  Tensor weight;  // [F x C x kh x kw]
  Tensor bias;    // [F]
  Conv2dGeometry geometry;
};

struct AvgPoolLayer {
  std::size_t kernel = 2;
  std::size_t stride = 2;
};

// Only appears in imported full-precision models; SwapPooling removes it.
struct MaxPoolLayer {
  std::size_t kernel = 2;
  std::size_t stride = 2;
};

struct QuantizerLayer {
  Tensor scale;  // [1], learnable
  int upper_bound = 1;
  bool initialized = false;
};

struct FlattenLayer {};

using Layer = std::variant<LinearLayer, ConvLayer, AvgPoolLayer, MaxPoolLayer,
                           QuantizerLayer, FlattenLayer>;

std::string LayerKind(const Layer& layer);

// Registered desk architectures:
//   "mlp2": flatten - linear(in, hidden) - quant - linear(hidden, classes)
//   "cnn4": [conv3x3(pad 1) - quant - avgpool2] x 2 - flatten - linear
struct ArchSpec {
  std::string name;
  Shape input_shape;  // per sample, e.g. {1, 28, 28} or {2}
  std::size_t num_classes = 10;
  int upper_bound = 2;
  std::size_t hidden = 128;                           // mlp2 width
  std::vector<std::size_t> conv_channels = {16, 32};  // cnn4 widths
};

class AnnModel {
 public:
  ArchSpec arch;
  std::vector<Layer> layers;

  // Deep copy; parameters get fresh storage.
  AnnModel Clone() const;

  // Learnable tensors: weights and biases of linear/conv layers, then
  // quantizer scales, all in layer order.
  std::vector<Tensor> Parameters() const;
  std::vector<Tensor> WeightsAndBiases() const;
  std::vector<Tensor> Scales() const;

  std::size_t NumQuantizers() const;
  bool ScalesInitialized() const;
};

// Throws ConfigError if a quantizer does not directly follow a linear/conv
// layer or the final layer is not a bare linear layer.
void ValidateModel(const AnnModel& model);

// Fan-in-scaled uniform weights (He-uniform bound sqrt(6 / fan_in)), zero
// biases, uninitialized quantizer scales. Unknown names raise ConfigError.
AnnModel BuildModel(const ArchSpec& arch, std::uint64_t seed);

// Replaces every max-pool with an avg-pool of the same kernel and stride.
AnnModel SwapPooling(AnnModel model);

struct ForwardOptions {
  // Noise injection in every quantizer; the key's `layer` field is replaced
  // by the quantizer ordinal.
  bool noise = false;
  NoiseKey noise_key;
  // When >= 0, return the input of the quantizer with this ordinal instead
  // of running it (and everything after it).
  int stop_at_quantizer = -1;
};

struct ForwardTrace {
  std::vector<Tensor> quantizer_inputs;  // pre-activations, one per quantizer
};

Tensor Forward(const AnnModel& model, const Tensor& x, const ForwardOptions& options,
               Tape* tape = nullptr, ForwardTrace* trace = nullptr);

}  // namespace qsnn

#endif  // QSNN_MODEL_H_
