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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qsnn/errors.h"
#include "qsnn/snn_sim.h"

namespace qsnn {
namespace {

void SetScales(AnnModel& m, float s) {
  for (Layer& layer : m.layers) {
    if (auto* q = std::get_if<QuantizerLayer>(&layer)) {
      q->scale.mutable_values()[0] = s;
      q->initialized = true;
    }
  }
}

// x -> Linear(1) with weight 1, bias 0 -> quantizer(s, p) -> Linear(1).
AnnModel SingleNeuron(float s, int p) {
  AnnModel m = BuildModel({"mlp2", {1}, 2, p, 1}, 0);
  auto& l1 = std::get<LinearLayer>(m.layers[1]);
  l1.weight.mutable_values()[0] = 1.0f;
  l1.bias.mutable_values()[0] = 0.0f;
  SetScales(m, s);
  return m;
}

const SpikingLayer& FirstSpiking(const SnnModel& snn) {
  for (const SnnLayer& l : snn.layers)
    if (const auto* s = std::get_if<SpikingLayer>(&l)) return *s;
  throw std::logic_error("no spiking layer");
}

TEST(ConvertTest, ThresholdAndPrecharge) {
  const SnnModel a = Convert(SingleNeuron(0.5f, 3));
  EXPECT_FLOAT_EQ(FirstSpiking(a).threshold, 1.5f);
  EXPECT_FLOAT_EQ(FirstSpiking(a).precharge(), 0.75f);
  const SnnModel b = Convert(SingleNeuron(1.0f, 2));
  EXPECT_FLOAT_EQ(FirstSpiking(b).threshold, 2.0f);
}

TEST(ConvertTest, WeightsAreBitIdenticalAndShapesPreserved) {
  AnnModel ann = BuildModel({"cnn4", {1, 12, 12}, 10, 2}, 3);
  SetScales(ann, 0.3f);
  const SnnModel snn = Convert(ann);
  ASSERT_EQ(snn.layers.size(), ann.layers.size());
  EXPECT_EQ(snn.NumSpikingLayers(), ann.NumQuantizers());
  for (std::size_t i = 0; i < ann.layers.size(); ++i) {
    if (const auto* c = std::get_if<ConvLayer>(&ann.layers[i])) {
      const auto& sc = std::get<ConvLayer>(snn.layers[i]);
      EXPECT_EQ(sc.weight.shape(), c->weight.shape());
      EXPECT_TRUE(std::equal(c->weight.values().begin(), c->weight.values().end(),
                             sc.weight.values().begin()));
      EXPECT_TRUE(std::equal(c->bias.values().begin(), c->bias.values().end(), sc.bias.values().begin()));
      EXPECT_NE(sc.weight.id(), c->weight.id());  // frozen copy, not an alias
    }
  }
}

TEST(ConvertTest, ThresholdIsLinearInScale) {
  for (float c : {0.5f, 2.0f, 8.0f}) {
    const float th = FirstSpiking(Convert(SingleNeuron(0.25f, 3))).threshold;
    EXPECT_EQ(FirstSpiking(Convert(SingleNeuron(0.25f * c, 3))).threshold, th * c);
  }
}

TEST(ConvertTest, ConvertingTwiceGivesSameModel) {
  AnnModel ann = BuildModel({"mlp2", {6}, 3, 2, 8}, 9);
  SetScales(ann, 0.7f);
  const SnnModel a = Convert(ann), b = Convert(ann);
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (const auto* la = std::get_if<LinearLayer>(&a.layers[i])) {
      const auto& lb = std::get<LinearLayer>(b.layers[i]);
      EXPECT_TRUE(std::equal(la->weight.values().begin(), la->weight.values().end(),
                             lb.weight.values().begin()));
    } else if (const auto* sa = std::get_if<SpikingLayer>(&a.layers[i])) {
      EXPECT_EQ(sa->threshold, std::get<SpikingLayer>(b.layers[i]).threshold);
    }
  }
}

TEST(ConvertTest, UninitializedScaleNamesLayer) {
  const AnnModel ann = BuildModel({"mlp2", {4}, 2, 2}, 0);
  try {
    Convert(ann);
    FAIL() << "expected ConversionError";
  } catch (const ConversionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos) << e.what();
  }
}

TEST(ConvertTest, MaxPoolIsRejected) {
  AnnModel ann = BuildModel({"cnn4", {1, 8, 8}, 10, 2}, 0);
  SetScales(ann, 0.5f);
  ann.layers[2] = MaxPoolLayer{2, 2};
  EXPECT_THROW(Convert(ann), ConversionError);
}

// Hand enumeration of the integrate-and-fire recurrence for a constant
// drive v over p steps, starting half a threshold up.
int EnumeratedSpikes(double v, double s, int p) {
  const double th = p * s;
  double u = 0.5 * th;
  int z = 0, count = 0;
  for (int t = 0; t < p; ++t) {
    u += v - z * th;
    z = u >= th ? 1 : 0;
    count += z;
  }
  return count;
}

TEST(ValidateConversionTest, SingleLayerGridIsExact) {
  const float s = 0.5f;
  const int p = 3;
  const AnnModel ann = SingleNeuron(s, p);
  const SnnModel snn = Convert(ann);
  std::vector<float> grid;
  for (int k = -2; k <= 8; ++k) grid.push_back(0.5f * k * s);  // {-1, -0.5, ..., 4} * s
  const Tensor probe({grid.size(), 1}, grid);
  const ConversionReport report = ValidateConversion(ann, snn, probe);
  EXPECT_EQ(report.steps, p);
  ASSERT_EQ(report.layer_mean_abs_diff.size(), 1u);
  EXPECT_EQ(report.layer_mean_abs_diff[0], 0.0);

  const RunResult run = qsnn::Run(snn, probe, std::vector<int>(grid.size(), 0), SimConfig{p});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int oracle = static_cast<int>(std::floor(std::clamp(grid[i] / s, 0.0f, 3.0f) + 0.5));
    EXPECT_EQ(run.final_state.layers[0].net_count[i], oracle) << "v=" << grid[i];
    EXPECT_EQ(EnumeratedSpikes(grid[i], s, p), oracle) << "v=" << grid[i];
  }
}

TEST(ValidateConversionTest, IdenticalModelsAgreeOnFirstLayer) {
  AnnModel ann = BuildModel({"mlp2", {5}, 3, 2, 6}, 1);
  SetScales(ann, 0.4f);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(20 * 5);
  for (float& x : v) x = dist(rng);
  const ConversionReport report = ValidateConversion(ann, Convert(ann), Tensor({20, 5}, v));
  EXPECT_EQ(report.layer_mean_abs_diff[0], 0.0);
  EXPECT_EQ(report.top1_agreement, 1.0);
}

TEST(ValidateConversionTest, DeepModelReportsNonNegativeDisagreement) {
  AnnModel ann = BuildModel({"cnn4", {1, 8, 8}, 10, 2}, 2);
  SetScales(ann, 0.2f);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> v(4 * 64);
  for (float& x : v) x = dist(rng);
  const ConversionReport report = ValidateConversion(ann, Convert(ann), Tensor({4, 1, 8, 8}, v));
  ASSERT_EQ(report.layer_mean_abs_diff.size(), 2u);
  for (double d : report.layer_mean_abs_diff) {
    EXPECT_GE(d, 0.0);
    EXPECT_TRUE(std::isfinite(d));
  }
  EXPECT_GE(report.top1_agreement, 0.0);
  EXPECT_LE(report.top1_agreement, 1.0);
}

TEST(ValidateConversionTest, ProbeShapeMismatchIsUsageError) {
  const AnnModel ann = SingleNeuron(0.5f, 2);
  EXPECT_THROW(ValidateConversion(ann, Convert(ann), Tensor({3, 2})), UsageError);
}

}  // namespace
}  // namespace qsnn
