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

// Quantization-aware training: minibatch SGD with momentum, weight decay and
// a cosine learning-rate schedule over weights, biases and quantizer scales.

#ifndef QSNN_TRAINER_H_
#define QSNN_TRAINER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "qsnn/dataset.h"
#include "qsnn/model.h"

namespace qsnn {

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 64;
  float lr0 = 0.05f;
  float weight_decay = 5e-4f;  // weights and biases only; scales are not decayed
  float momentum = 0.9f;
  std::uint64_t seed = 0;
  int upper_bound = 2;
  bool noise_enabled = true;
  std::size_t warmup_samples = 512;
};

void ValidateTrainConfig(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double eval_accuracy = 0.0;
  float last_lr = 0.0f;
};

struct TrainResult {
  AnnModel model;
  std::vector<EpochRecord> history;
  // Set when the loss became non-finite; `model` then holds the last
  // parameters that completed an epoch with a finite loss.
  bool diverged = false;
  std::string message;
};

// lr0 * (1 + cos(pi * step / total)) / 2, clamped to the final value for
// step > total.
float CosineLr(std::size_t step, std::size_t total_steps, float lr0);

// Fits every quantizer scale with InitScale, sequentially in forward order,
// on the first `warmup_samples` samples. Earlier quantizers are already
// fitted (noise-free) when a later layer's pre-activations are collected.
void InitializeScales(AnnModel& model, const Dataset& data, std::size_t warmup_samples);

// Trains a copy of `model`. Quantizer scales are initialized first when any
// is still unset. `eval` (may be null) feeds EpochRecord::eval_accuracy;
// without it the training set is used.
TrainResult Train(const AnnModel& model, const Dataset& train, const Dataset* eval,
                  const TrainConfig& cfg);

// Noise-free top-1 accuracy. Throws UsageError on an empty dataset.
double EvaluateAnn(const AnnModel& model, const Dataset& data, std::size_t batch_size = 256);

// Noise-free predictions.
std::vector<int> PredictAnn(const AnnModel& model, const Dataset& data,
                            std::size_t batch_size = 256);

}  // namespace qsnn

#endif  // QSNN_TRAINER_H_
