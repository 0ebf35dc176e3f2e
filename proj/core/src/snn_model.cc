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

#include "qsnn/snn_model.h"

#include <algorithm>
#include <cmath>

#include "qsnn/errors.h"
#include "qsnn/ops.h"
#include "qsnn/quantizer.h"
#include "qsnn/snn_sim.h"

namespace qsnn {
namespace {

Tensor Frozen(const Tensor& t) { return t.Clone(); }

}  // namespace

std::size_t SnnModel::NumSpikingLayers() const {
  std::size_t n = 0;
  for (const SnnLayer& layer : layers) n += std::holds_alternative<SpikingLayer>(layer);
  return n;
}

SnnModel Convert(const AnnModel& model) {
  SnnModel snn;
  snn.arch = model.arch;
  snn.layers.reserve(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      snn.layers.emplace_back(LinearLayer{Frozen(l->weight), Frozen(l->bias)});
    } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      snn.layers.emplace_back(ConvLayer{Frozen(c->weight), Frozen(c->bias), c->geometry});
    } else if (const auto* a = std::get_if<AvgPoolLayer>(&layer)) {
      snn.layers.emplace_back(*a);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      snn.layers.emplace_back(FlattenLayer{});
    } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
      throw ConversionError("layer " + std::to_string(i) +
                            ": max-pool cannot be converted; apply SwapPooling and retrain");
    } else if (const auto* q = std::get_if<QuantizerLayer>(&layer)) {
      if (!q->initialized) {
        throw ConversionError("layer " + std::to_string(i) + ": quantizer scale is uninitialized");
      }
      const float s = q->scale.item();
      if (!(s > 0.0f) || !std::isfinite(s)) {
        throw ConversionError("layer " + std::to_string(i) + ": quantizer scale is not positive");
      }
      SpikingLayer spiking;
      spiking.threshold = static_cast<float>(q->upper_bound) * s;
      spiking.precharge_fraction = kPrechargeFraction;
      spiking.scale = s;
      spiking.upper_bound = q->upper_bound;
      snn.layers.emplace_back(spiking);
    }
  }
  return snn;
}

ConversionReport ValidateConversion(const AnnModel& ann, const SnnModel& snn, const Tensor& probe) {
  if (ann.layers.size() != snn.layers.size() || ann.NumQuantizers() != snn.NumSpikingLayers()) {
    throw UsageError("ANN and SNN layer structures differ");
  }
  if (probe.rank() < 1 || probe.dim(0) == 0) throw UsageError("empty probe batch");
  Shape expected{probe.dim(0)};
  expected.insert(expected.end(), ann.arch.input_shape.begin(), ann.arch.input_shape.end());
  if (!ann.arch.input_shape.empty() && probe.shape() != expected) {
    throw UsageError("probe batch " + ShapeToString(probe.shape()) + " does not match model input " +
                     ShapeToString(expected));
  }

  ForwardTrace trace;
  const Tensor ann_logits = Forward(ann, probe, ForwardOptions{}, nullptr, &trace);
  const std::vector<int> ann_pred = ArgMax(ann_logits);

  int steps = 1;
  std::vector<const SpikingLayer*> spiking;
  for (const SnnLayer& layer : snn.layers) {
    if (const auto* s = std::get_if<SpikingLayer>(&layer)) {
      spiking.push_back(s);
      steps = std::max(steps, s->upper_bound);
    }
  }

  SimConfig cfg;
  cfg.steps = steps;
  const RunResult run = Run(snn, probe, ann_pred, cfg);

  ConversionReport report;
  report.steps = steps;
  for (std::size_t l = 0; l < spiking.size(); ++l) {
    const auto preacts = trace.quantizer_inputs[l].values();
    const auto& counts = run.final_state.layers[l].net_count;
    if (counts.size() != preacts.size()) throw UsageError("ANN and SNN layer sizes differ");
    const float s = spiking[l]->scale;
    const float p = static_cast<float>(spiking[l]->upper_bound);
    double total = 0.0;
    for (std::size_t i = 0; i < preacts.size(); ++i) {
      const float level = RoundHalfUp(std::clamp(preacts[i] / s, 0.0f, p));
      total += std::abs(static_cast<double>(level) - counts[i]);
    }
    report.layer_mean_abs_diff.push_back(total / static_cast<double>(preacts.size()));
  }
  report.top1_agreement = run.accuracy.back();
  return report;
}

}  // namespace qsnn
