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

// Time-stepped integrate-and-fire simulation with reset by subtraction.
//
// Per step t and spiking layer l:
//   u_t = u_{t-1} + drive_t - z_{t-1} * th      (drive = W (z^{l-1} th^{l-1}) + B)
//   z_t = 1 if u_t >= th else 0
// The subtraction for a spike lands at the start of the next step. Membranes
// start at 0.5 * th. The first affine layer sees the raw input every step
// (analog coding); the output layer adds its drive to running logits.
//
// With negative spikes enabled, a neuron with u_t < 0 that has a positive net
// spike count emits z_t = -1 instead, which adds th back at the next step and
// decrements its count. This retraction rule is this library's own choice.

#ifndef QSNN_SNN_SIM_H_
#define QSNN_SNN_SIM_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qsnn/snn_model.h"
#include "qsnn/tensor.h"

namespace qsnn {

enum class Correction { kNone, kNegativeSpikes };

std::string CorrectionName(Correction c);
Correction ParseCorrection(const std::string& name);

// One integrate-and-fire update. `net_count` is the running positive-minus-
// negative spike count. Returns the emitted spike in {-1, 0, 1}.
template <typename Real>
int IntegrateAndFire(Real& u, Real drive, int previous_spike, Real threshold, int& net_count,
                     bool negative_spikes) {
  u += drive - static_cast<Real>(previous_spike) * threshold;
  int z = 0;
  if (u >= threshold) {
    z = 1;
  } else if (negative_spikes && u < Real(0) && net_count > 0) {
    z = -1;
  }
  net_count += z;
  return z;
}

struct SpikingLayerState {
  std::vector<float> u;
  std::vector<int> z;          // spikes emitted at the last step
  std::vector<int> net_count;  // positive minus negative spikes so far
  std::uint64_t positive_spikes = 0;
  std::uint64_t negative_spikes = 0;
};

struct SimState {
  std::vector<SpikingLayerState> layers;  // one per SpikingLayer, in order
  Tensor logits;                          // accumulated output drive
  int t = 0;
  float dt = 1.0f;
  std::size_t batch = 0;
};

struct SimConfig {
  int steps = 1;  // T
  Correction correction = Correction::kNone;
  bool record_spike_counts = true;
};

// Pre-charged state for `batch` samples. Sizes come from a shape pass.
SimState InitState(const SnnModel& snn, const Shape& input_shape);

// Advances one step with plain integrate-and-fire neurons.
SimState Step(SimState state, const SnnModel& snn, const Tensor& input);
// Same, with the negative-spike retraction rule.
SimState StepWithNegativeSpikes(SimState state, const SnnModel& snn, const Tensor& input);
// In-place form used by both; throws NumericError naming the layer on a
// non-finite membrane.
void StepInPlace(SimState& state, const SnnModel& snn, const Tensor& input, Correction correction);

struct RunResult {
  // accuracy[t - 1] is the top-1 accuracy of the logits accumulated over
  // steps 1..t.
  std::vector<double> accuracy;
  // spikes[t - 1][l]: cumulative spike events (positive + negative) of
  // spiking layer l after step t. Empty when not recorded.
  std::vector<std::vector<std::uint64_t>> spikes;
  std::vector<int> final_predictions;
  SimState final_state;
};

// Throws UsageError for an empty batch or mismatched label count.
RunResult Run(const SnnModel& snn, const Tensor& inputs, std::span<const int> labels,
              const SimConfig& cfg);

// Columns: t,accuracy,total_spikes,spikes_l0,spikes_l1,...
void WriteRunCsv(std::ostream& os, const RunResult& result);

struct ResponsePoint {
  double accumulated_input = 0.0;  // X = T * per-step drive
  double output = 0.0;             // Y = N * th
  int spikes = 0;                  // N in [0, T]
};

// Single-neuron response curve: constant drive X / T per step, pre-charge
// 0.5 * th, reset by subtraction. X sweeps [-0.5 T th, 1.5 T th] in
// `n_points` steps. Per-step drives are snapped to multiples of th * 2^-20
// and the neuron runs in units of th, so every membrane value is exact and
// the spike count equals clip(floor((X + 0.5 th) / th), 0, T) without
// rounding artefacts.
std::vector<ResponsePoint> ResponseCurve(double threshold, int steps, int n_points);

}  // namespace qsnn

#endif  // QSNN_SNN_SIM_H_
