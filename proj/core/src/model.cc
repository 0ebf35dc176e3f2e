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

#include "qsnn/model.h"

#include <cmath>
#include <random>
#include <utility>

#include "qsnn/errors.h"

namespace qsnn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Tensor UniformTensor(Shape shape, float bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  Tensor t(std::move(shape), 0.0f, true);
  for (float& v : t.mutable_values()) v = dist(rng);
  return t;
}

LinearLayer MakeLinear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const float bound = std::sqrt(6.0f / static_cast<float>(in));
  return LinearLayer{UniformTensor({out, in}, bound, rng), Tensor({out}, 0.0f, true)};
}

ConvLayer MakeConv(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::mt19937_64& rng) {
  const float bound = std::sqrt(6.0f / static_cast<float>(in_ch * k * k));
  return ConvLayer{UniformTensor({out_ch, in_ch, k, k}, bound, rng),
                   Tensor({out_ch}, 0.0f, true), Conv2dGeometry{1, k / 2}};
}

QuantizerLayer MakeQuantizer(int p) {
  return QuantizerLayer{Tensor({1}, 1.0f, true), p, false};
}

Tensor CloneParam(const Tensor& t) {
  Tensor c = t.Clone();
  c.set_requires_grad(t.requires_grad());
  return c;
}

}  // namespace

std::string LayerKind(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const LinearLayer&) { return std::string("linear"); },
                        [](const ConvLayer&) { return std::string("conv"); },
                        [](const AvgPoolLayer&) { return std::string("avg_pool"); },
                        [](const MaxPoolLayer&) { return std::string("max_pool"); },
                        [](const QuantizerLayer&) { return std::string("quantizer"); },
                        [](const FlattenLayer&) { return std::string("flatten"); },
                    },
                    layer);
}

AnnModel AnnModel::Clone() const {
  AnnModel out;
  out.arch = arch;
  out.layers.reserve(layers.size());
  for (const Layer& layer : layers) {
    out.layers.push_back(std::visit(
        Overloaded{
            [](const LinearLayer& l) -> Layer {
              return LinearLayer{CloneParam(l.weight), CloneParam(l.bias)};
            },
            [](const ConvLayer& l) -> Layer {
              return ConvLayer{CloneParam(l.weight), CloneParam(l.bias), l.geometry};
            },
            [](const QuantizerLayer& l) -> Layer {
              return QuantizerLayer{CloneParam(l.scale), l.upper_bound, l.initialized};
            },
            [](const auto& l) -> Layer { return l; },
        },
        layer));
  }
  return out;
}

std::vector<Tensor> AnnModel::WeightsAndBiases() const {
  std::vector<Tensor> out;
  for (const Layer& layer : layers) {
    if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      out.push_back(l->weight);
      out.push_back(l->bias);
    } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      out.push_back(c->weight);
      out.push_back(c->bias);
    }
  }
  return out;
}

std::vector<Tensor> AnnModel::Scales() const {
  std::vector<Tensor> out;
  for (const Layer& layer : layers) {
    if (const auto* q = std::get_if<QuantizerLayer>(&layer)) out.push_back(q->scale);
  }
  return out;
}

std::vector<Tensor> AnnModel::Parameters() const {
  std::vector<Tensor> out = WeightsAndBiases();
  for (Tensor& s : Scales()) out.push_back(s);
  return out;
}

std::size_t AnnModel::NumQuantizers() const {
  std::size_t n = 0;
  for (const Layer& layer : layers) n += std::holds_alternative<QuantizerLayer>(layer);
  return n;
}

bool AnnModel::ScalesInitialized() const {
  for (const Layer& layer : layers) {
    if (const auto* q = std::get_if<QuantizerLayer>(&layer); q && !q->initialized) return false;
  }
  return true;
}

void ValidateModel(const AnnModel& model) {
  if (model.layers.empty()) throw ConfigError("model has no layers");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (!std::holds_alternative<QuantizerLayer>(model.layers[i])) continue;
    const bool after_affine = i > 0 && (std::holds_alternative<LinearLayer>(model.layers[i - 1]) ||
                                        std::holds_alternative<ConvLayer>(model.layers[i - 1]));
    if (!after_affine) {
      throw ConfigError("quantizer at layer " + std::to_string(i) +
                        " does not follow a linear or conv layer");
    }
  }
  if (!std::holds_alternative<LinearLayer>(model.layers.back())) {
    throw ConfigError("final layer must be linear (full-precision logits), got " +
                      LayerKind(model.layers.back()));
  }
}

AnnModel BuildModel(const ArchSpec& arch, std::uint64_t seed) {
  if (arch.upper_bound < 1) throw ConfigError("upper bound p must be >= 1");
  if (arch.num_classes < 2) throw ConfigError("need at least two classes");
  std::mt19937_64 rng(seed);
  AnnModel model;
  model.arch = arch;
  const std::size_t in_features = NumElements(arch.input_shape);

  if (arch.name == "mlp2") {
    if (arch.input_shape.empty()) throw ConfigError("mlp2 needs an input shape");
    model.layers.emplace_back(FlattenLayer{});
    model.layers.emplace_back(MakeLinear(in_features, arch.hidden, rng));
    model.layers.emplace_back(MakeQuantizer(arch.upper_bound));
    model.layers.emplace_back(MakeLinear(arch.hidden, arch.num_classes, rng));
  } else if (arch.name == "cnn4") {
    if (arch.input_shape.size() != 3) {
      throw ConfigError("cnn4 needs a C x H x W input shape, got " +
                        ShapeToString(arch.input_shape));
    }
    if (arch.conv_channels.size() != 2) throw ConfigError("cnn4 needs two conv widths");
    std::size_t channels = arch.input_shape[0];
    std::size_t h = arch.input_shape[1], w = arch.input_shape[2];
    for (std::size_t width : arch.conv_channels) {
      if (h < 2 || w < 2) {
        throw ConfigError("cnn4 input " + ShapeToString(arch.input_shape) +
                          " too small for two 2x2 pools");
      }
      model.layers.emplace_back(MakeConv(channels, width, 3, rng));
      model.layers.emplace_back(MakeQuantizer(arch.upper_bound));
      model.layers.emplace_back(AvgPoolLayer{2, 2});
      channels = width;
      h = (h - 2) / 2 + 1;
      w = (w - 2) / 2 + 1;
    }
    model.layers.emplace_back(FlattenLayer{});
    model.layers.emplace_back(MakeLinear(channels * h * w, arch.num_classes, rng));
  } else {
    throw ConfigError("unknown architecture '" + arch.name + "' (registered: mlp2, cnn4)");
  }
  ValidateModel(model);
  return model;
}

AnnModel SwapPooling(AnnModel model) {
  for (Layer& layer : model.layers) {
    if (const auto* m = std::get_if<MaxPoolLayer>(&layer)) {
      layer = AvgPoolLayer{m->kernel, m->stride};
    }
  }
  return model;
}

Tensor Forward(const AnnModel& model, const Tensor& x, const ForwardOptions& options, Tape* tape,
               ForwardTrace* trace) {
  Tensor h = x;
  std::uint64_t quantizer_index = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      h = Linear(h, l->weight, l->bias, tape);
    } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      h = Conv2d(h, c->weight, c->bias, c->geometry, tape);
    } else if (const auto* a = std::get_if<AvgPoolLayer>(&layer)) {
      h = AvgPool2d(h, a->kernel, a->stride, tape);
    } else if (const auto* m = std::get_if<MaxPoolLayer>(&layer)) {
      h = MaxPool2d(h, m->kernel, m->stride, tape);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      h = Flatten(h, tape);
    } else if (const auto* q = std::get_if<QuantizerLayer>(&layer)) {
      if (trace) trace->quantizer_inputs.push_back(h);
      if (options.stop_at_quantizer == static_cast<int>(quantizer_index)) return h;
      const std::string name = "quantizer " + std::to_string(quantizer_index) + " (layer " +
                               std::to_string(i) + ")";
      if (!q->initialized) throw UsageError(name + " has an uninitialized scale");
      if (options.noise) {
        NoiseKey key = options.noise_key;
        key.layer = quantizer_index;
        const NoiseDraw draw = NoiseDraw::Sample(h.shape(), key);
        h = Quantize(h, q->scale, q->upper_bound, &draw, tape, name);
      } else {
        h = Quantize(h, q->scale, q->upper_bound, nullptr, tape, name);
      }
      ++quantizer_index;
    }
  }
  return h;
}

}  // namespace qsnn
