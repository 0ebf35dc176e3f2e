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

// ANN -> SNN conversion. Weights and biases are copied unchanged, every
// quantizer(s, p) becomes an integrate-and-fire activation with threshold
// th = p * s whose membrane starts pre-charged at 0.5 * th, and the final
// linear layer integrates its drive into accumulated logits.

#ifndef QSNN_SNN_MODEL_H_
#define QSNN_SNN_MODEL_H_

#include <variant>
#include <vector>

#include "qsnn/model.h"
#include "qsnn/tensor.h"

namespace qsnn {

inline constexpr float kPrechargeFraction = 0.5f;

struct SpikingLayer {
  float threshold = 1.0f;  // th = p * s
  float precharge_fraction = kPrechargeFraction;
  // Source quantizer, kept for reporting ANN levels next to spike counts.
  float scale = 1.0f;
  int upper_bound = 1;

  float precharge() const { return precharge_fraction * threshold; }
};

using SnnLayer = std::variant<LinearLayer, ConvLayer, AvgPoolLayer, FlattenLayer, SpikingLayer>;

struct SnnModel {
  ArchSpec arch;
  std::vector<SnnLayer> layers;
  float dt = 1.0f;  // time units per step; labels only

  std::size_t NumSpikingLayers() const;
};

// Throws ConversionError naming the layer for an uninitialized scale or a
// remaining max-pool.
SnnModel Convert(const AnnModel& model);

struct ConversionReport {
  int steps = 0;  // T = p
  // Per spiking layer: mean |ANN integer level - SNN spike count|.
  std::vector<double> layer_mean_abs_diff;
  // Fraction of probe samples where ANN and SNN top-1 classes agree.
  double top1_agreement = 0.0;
};

// Runs the SNN for T = p steps on `probe` and compares it with the noise-free
// ANN. Throws UsageError when the models' shapes disagree.
ConversionReport ValidateConversion(const AnnModel& ann, const SnnModel& snn, const Tensor& probe);

}  // namespace qsnn

#endif  // QSNN_SNN_MODEL_H_
