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

#include "qsnn/snn_sim.h"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "qsnn/errors.h"
#include "qsnn/ops.h"

namespace qsnn {
namespace {

// Applies a non-spiking layer. Returns false for spiking layers.
bool ApplyAffineOrPool(const SnnLayer& layer, Tensor& signal) {
  if (const auto* l = std::get_if<LinearLayer>(&layer)) {
    signal = Linear(signal, l->weight, l->bias);
  } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
    signal = Conv2d(signal, c->weight, c->bias, c->geometry);
  } else if (const auto* a = std::get_if<AvgPoolLayer>(&layer)) {
    signal = AvgPool2d(signal, a->kernel, a->stride);
  } else if (std::holds_alternative<FlattenLayer>(layer)) {
    signal = Flatten(signal);
  } else {
    return false;
  }
  return true;
}

std::size_t FirstSpikingLayer(const SnnModel& snn) {
  for (std::size_t i = 0; i < snn.layers.size(); ++i) {
    if (std::holds_alternative<SpikingLayer>(snn.layers[i])) return i;
  }
  return snn.layers.size();
}

// Runs layers [start, end) for one step, given the signal entering `start`.
void StepFrom(SimState& state, const SnnModel& snn, std::size_t start, Tensor signal,
              Correction correction) {
  const bool negative = correction == Correction::kNegativeSpikes;
  std::size_t spiking_index = 0;
  for (std::size_t i = 0; i < start; ++i) {
    spiking_index += std::holds_alternative<SpikingLayer>(snn.layers[i]);
  }
  for (std::size_t i = start; i < snn.layers.size(); ++i) {
    const SnnLayer& layer = snn.layers[i];
    if (ApplyAffineOrPool(layer, signal)) continue;
    const auto& spiking = std::get<SpikingLayer>(layer);
    SpikingLayerState& st = state.layers.at(spiking_index++);
    const auto drive = signal.values();
    if (drive.size() != st.u.size()) {
      throw UsageError("layer " + std::to_string(i) + ": drive of " + std::to_string(drive.size()) +
                       " values for " + std::to_string(st.u.size()) + " neurons");
    }
    const float th = spiking.threshold;
    std::vector<float> out(drive.size());
    for (std::size_t k = 0; k < drive.size(); ++k) {
      const int z = IntegrateAndFire(st.u[k], drive[k], st.z[k], th, st.net_count[k], negative);
      if (!std::isfinite(st.u[k])) {
        throw NumericError("layer " + std::to_string(i) + ": non-finite membrane potential");
      }
      st.z[k] = z;
      st.positive_spikes += z > 0;
      st.negative_spikes += z < 0;
      out[k] = static_cast<float>(z) * th;
    }
    signal = Tensor(signal.shape(), std::move(out));
  }
  if (!state.logits.defined()) {
    state.logits = Tensor(signal.shape(), 0.0f);
  } else if (state.logits.shape() != signal.shape()) {
    throw UsageError("output drive shape changed between steps");
  }
  auto acc = state.logits.mutable_values();
  const auto drive = signal.values();
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += drive[k];
  ++state.t;
}

}  // namespace

std::string CorrectionName(Correction c) {
  return c == Correction::kNegativeSpikes ? "negative_spikes" : "none";
}

Correction ParseCorrection(const std::string& name) {
  if (name == "none") return Correction::kNone;
  if (name == "negative_spikes" || name == "negative-spikes") return Correction::kNegativeSpikes;
  throw ConfigError("unknown correction '" + name + "' (none, negative_spikes)");
}

SimState InitState(const SnnModel& snn, const Shape& input_shape) {
  if (input_shape.empty() || input_shape[0] == 0) throw UsageError("empty input batch");
  SimState state;
  state.dt = snn.dt;
  state.batch = input_shape[0];
  Tensor signal(input_shape, 0.0f);
  for (const SnnLayer& layer : snn.layers) {
    if (ApplyAffineOrPool(layer, signal)) continue;
    const auto& spiking = std::get<SpikingLayer>(layer);
    if (!(spiking.threshold > 0.0f)) throw ConfigError("spiking threshold must be positive");
    SpikingLayerState st;
    st.u.assign(signal.size(), spiking.precharge());
    st.z.assign(signal.size(), 0);
    st.net_count.assign(signal.size(), 0);
    state.layers.push_back(std::move(st));
  }
  state.logits = Tensor(signal.shape(), 0.0f);
  return state;
}

void StepInPlace(SimState& state, const SnnModel& snn, const Tensor& input, Correction correction) {
  if (state.layers.size() != snn.NumSpikingLayers()) {
    throw UsageError("simulation state was not initialized for this model");
  }
  StepFrom(state, snn, 0, input, correction);
}

SimState Step(SimState state, const SnnModel& snn, const Tensor& input) {
  StepInPlace(state, snn, input, Correction::kNone);
  return state;
}

SimState StepWithNegativeSpikes(SimState state, const SnnModel& snn, const Tensor& input) {
  StepInPlace(state, snn, input, Correction::kNegativeSpikes);
  return state;
}

RunResult Run(const SnnModel& snn, const Tensor& inputs, std::span<const int> labels,
              const SimConfig& cfg) {
  if (cfg.steps < 1) throw ConfigError("simulation needs T >= 1");
  if (inputs.rank() < 1 || inputs.dim(0) == 0) throw UsageError("empty input batch");
  if (labels.size() != inputs.dim(0)) {
    throw UsageError(std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(inputs.dim(0)));
  }
  RunResult result;
  result.final_state = InitState(snn, inputs.shape());
  SimState& state = result.final_state;

  // Analog coding keeps the input constant, so the drive into the first
  // spiking layer is the same every step.
  const std::size_t first = FirstSpikingLayer(snn);
  Tensor first_drive = inputs;
  for (std::size_t i = 0; i < first; ++i) ApplyAffineOrPool(snn.layers[i], first_drive);

  for (int t = 1; t <= cfg.steps; ++t) {
    StepFrom(state, snn, first, first_drive, cfg.correction);
    const std::vector<int> pred = ArgMax(state.logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    result.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(pred.size()));
    if (cfg.record_spike_counts) {
      std::vector<std::uint64_t> per_layer;
      for (const SpikingLayerState& st : state.layers) {
        per_layer.push_back(st.positive_spikes + st.negative_spikes);
      }
      result.spikes.push_back(std::move(per_layer));
    }
    if (t == cfg.steps) result.final_predictions = pred;
  }
  return result;
}

void WriteRunCsv(std::ostream& os, const RunResult& result) {
  const std::size_t n_layers = result.spikes.empty() ? 0 : result.spikes.front().size();
  os << "t,accuracy,total_spikes";
  for (std::size_t l = 0; l < n_layers; ++l) os << ",spikes_l" << l;
  os << '\n';
  char buf[32];
  for (std::size_t t = 0; t < result.accuracy.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.4f", result.accuracy[t]);
    os << (t + 1) << ',' << buf;
    std::uint64_t total = 0;
    if (t < result.spikes.size()) {
      for (std::uint64_t s : result.spikes[t]) total += s;
    }
    os << ',' << total;
    if (t < result.spikes.size()) {
      for (std::uint64_t s : result.spikes[t]) os << ',' << s;
    }
    os << '\n';
  }
}

std::vector<ResponsePoint> ResponseCurve(double threshold, int steps, int n_points) {
  if (!(threshold > 0.0)) throw ConfigError("response curve needs a positive threshold");
  if (steps < 1) throw ConfigError("response curve needs T >= 1");
  if (n_points < 2) throw ConfigError("response curve needs at least two points");
  constexpr double kGrid = 1048576.0;  // 2^20
  std::vector<ResponsePoint> curve;
  curve.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double x = -0.5 + 2.0 * static_cast<double>(i) / static_cast<double>(n_points - 1);
    const double drive = std::round(x * kGrid) / kGrid;  // in units of th
    double u = static_cast<double>(kPrechargeFraction);
    int z = 0, count = 0;
    for (int t = 0; t < steps; ++t) z = IntegrateAndFire(u, drive, z, 1.0, count, false);
    curve.push_back(ResponsePoint{static_cast<double>(steps) * drive * threshold,
                                  static_cast<double>(count) * threshold, count});
  }
  return curve;
}

}  // namespace qsnn
