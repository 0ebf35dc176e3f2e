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

#include "qsnn/trainer.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "qsnn/errors.h"
#include "qsnn/ops.h"

namespace qsnn {

void ValidateTrainConfig(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(cfg.lr0 >= 0.0f) || !std::isfinite(cfg.lr0)) {
    throw ConfigError("initial learning rate must be finite and non-negative");
  }
  if (cfg.momentum < 0.0f || cfg.momentum >= 1.0f) throw ConfigError("momentum must be in [0, 1)");
  if (cfg.weight_decay < 0.0f) throw ConfigError("weight decay must be non-negative");
  if (cfg.upper_bound < 1) throw ConfigError("upper bound p must be >= 1");
}

float CosineLr(std::size_t step, std::size_t total_steps, float lr0) {
  if (total_steps == 0) return 0.0f;
  step = std::min(step, total_steps);
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return static_cast<float>(lr0 * 0.5 * (1.0 + std::cos(phase)));
}

void InitializeScales(AnnModel& model, const Dataset& data, std::size_t warmup_samples) {
  if (data.empty()) throw UsageError("scale initialization needs data");
  const std::size_t n = std::min(std::max<std::size_t>(warmup_samples, 1), data.size());
  const Tensor batch = data.Slice(0, n);
  int ordinal = 0;
  for (Layer& layer : model.layers) {
    auto* q = std::get_if<QuantizerLayer>(&layer);
    if (!q) continue;
    ForwardOptions opts;
    opts.stop_at_quantizer = ordinal++;
    const Tensor preacts = Forward(model, batch, opts);
    q->scale.mutable_values()[0] = InitScale(preacts.values(), q->upper_bound);
    q->initialized = true;
  }
}

std::vector<int> PredictAnn(const AnnModel& model, const Dataset& data, std::size_t batch_size) {
  if (data.empty()) throw UsageError("evaluation on an empty dataset");
  batch_size = std::max<std::size_t>(batch_size, 1);
  std::vector<int> out;
  out.reserve(data.size());
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, data.size());
    const std::vector<int> pred = ArgMax(Forward(model, data.Slice(begin, end), ForwardOptions{}));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

double EvaluateAnn(const AnnModel& model, const Dataset& data, std::size_t batch_size) {
  const std::vector<int> pred = PredictAnn(model, data, batch_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

TrainResult Train(const AnnModel& model, const Dataset& train, const Dataset* eval,
                  const TrainConfig& cfg) {
  ValidateTrainConfig(cfg);
  if (train.empty()) throw UsageError("training on an empty dataset");
  ValidateModel(model);
  for (const Layer& layer : model.layers) {
    if (const auto* q = std::get_if<QuantizerLayer>(&layer); q && q->upper_bound != cfg.upper_bound) {
      throw ConfigError("model quantizer p=" + std::to_string(q->upper_bound) +
                        " differs from training p=" + std::to_string(cfg.upper_bound));
    }
  }

  TrainResult result;
  result.model = model.Clone();
  AnnModel& m = result.model;
  if (!m.ScalesInitialized()) InitializeScales(m, train, cfg.warmup_samples);

  std::vector<Tensor> weights = m.WeightsAndBiases();
  std::vector<Tensor> scales = m.Scales();
  std::vector<std::vector<float>> weight_momentum, scale_momentum;
  for (const Tensor& t : weights) weight_momentum.emplace_back(t.size(), 0.0f);
  for (const Tensor& t : scales) scale_momentum.emplace_back(t.size(), 0.0f);

  const std::size_t n = train.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(cfg.epochs);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(cfg.seed);

  AnnModel last_good = m.Clone();
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    float lr = 0.0f;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++step) {
      const std::size_t end = std::min(begin + cfg.batch_size, n);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train.labels[idx[i]];

      Tape tape;
      ForwardOptions opts;
      opts.noise = cfg.noise_enabled;
      opts.noise_key = NoiseKey{cfg.seed, 0, step};
      const Tensor logits = Forward(m, train.Batch(idx), opts, &tape);
      const Tensor loss = SoftmaxCrossEntropy(logits, labels, &tape);
      if (!std::isfinite(loss.item())) {
        result.model = std::move(last_good);
        result.diverged = true;
        result.message = "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                         std::to_string(step);
        return result;
      }
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(idx.size());

      for (Tensor& t : weights) t.zero_grad();
      for (Tensor& t : scales) t.zero_grad();
      tape.Backward(loss);

      lr = CosineLr(step, total_steps, cfg.lr0);
      for (std::size_t k = 0; k < weights.size(); ++k) {
        auto w = weights[k].mutable_values();
        const auto g = weights[k].grad();
        auto& buf = weight_momentum[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
          const float grad = (g.empty() ? 0.0f : g[i]) + cfg.weight_decay * w[i];
          buf[i] = cfg.momentum * buf[i] + grad;
          w[i] -= lr * buf[i];
        }
      }
      for (std::size_t k = 0; k < scales.size(); ++k) {
        auto s = scales[k].mutable_values();
        const auto g = scales[k].grad();
        auto& buf = scale_momentum[k];
        buf[0] = cfg.momentum * buf[0] + (g.empty() ? 0.0f : g[0]);
        s[0] = std::max(s[0] - lr * buf[0], kMinScale);
      }
    }
    const double train_loss = loss_sum / static_cast<double>(n);
    const double accuracy = EvaluateAnn(m, eval ? *eval : train);
    result.history.push_back(EpochRecord{epoch, train_loss, accuracy, lr});
    last_good = m.Clone();
  }
  return result;
}

}  // namespace qsnn
