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

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "qsnn/errors.h"
#include "qsnn/quantizer.h"

namespace qsnn {
namespace {

// Identity synapse -> one spiking neuron -> identity readout.
SnnModel OneNeuron(float threshold, float precharge_fraction) {
  SnnModel snn;
  snn.arch = {"manual", {1}, 1, 1};
  snn.layers.emplace_back(LinearLayer{Tensor({1, 1}, 1.0f), Tensor({1}, 0.0f)});
  SpikingLayer s;
  s.threshold = threshold;
  s.precharge_fraction = precharge_fraction;
  snn.layers.emplace_back(s);
  snn.layers.emplace_back(LinearLayer{Tensor({1, 1}, 1.0f), Tensor({1}, 0.0f)});
  return snn;
}

Tensor Drive(float x) { return Tensor({1, 1}, std::vector<float>{x}); }

SnnModel RandomMlp(std::uint64_t seed, float s) {
  AnnModel ann = BuildModel({"mlp2", {6}, 4, 2, 12}, seed);
  for (Layer& layer : ann.layers) {
    if (auto* q = std::get_if<QuantizerLayer>(&layer)) {
      q->scale.mutable_values()[0] = s;
      q->initialized = true;
    }
  }
  return Convert(ann);
}

SnnModel RandomCnn(std::uint64_t seed) {
  AnnModel ann = BuildModel({"cnn4", {1, 8, 8}, 4, 2, 128, {4, 6}}, seed);
  for (Layer& layer : ann.layers) {
    if (auto* q = std::get_if<QuantizerLayer>(&layer)) {
      q->scale.mutable_values()[0] = 0.15f;
      q->initialized = true;
    }
  }
  return Convert(ann);
}

Tensor RandomInputs(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(NumElements(shape));
  for (float& x : v) x = dist(rng);
  return Tensor(shape, v);
}

TEST(StepTest, FireThenSubtractNextStep) {
  const SnnModel snn = OneNeuron(1.0f, 0.9f);
  SimState st = InitState(snn, {1, 1});
  EXPECT_FLOAT_EQ(st.layers[0].u[0], 0.9f);
  st = Step(st, snn, Drive(0.3f));
  EXPECT_FLOAT_EQ(st.layers[0].u[0], 1.2f);
  EXPECT_EQ(st.layers[0].z[0], 1);
  st = Step(st, snn, Drive(0.0f));
  EXPECT_NEAR(st.layers[0].u[0], 0.2f, 1e-6f);
  EXPECT_EQ(st.layers[0].z[0], 0);
  EXPECT_EQ(st.t, 2);
}

TEST(StepTest, SubThresholdNeverFires) {
  const SnnModel snn = OneNeuron(1.0f, 0.5f);
  SimState st = InitState(snn, {1, 1});
  for (int t = 0; t < 50; ++t) {
    st = Step(st, snn, Drive(0.0f));
    ASSERT_EQ(st.layers[0].z[0], 0);
  }
  EXPECT_EQ(st.layers[0].positive_spikes, 0u);
}

TEST(StepTest, DriveOfOneThresholdPerStepGivesOneSpikePerStep) {
  const SnnModel snn = OneNeuron(1.0f, 0.5f);
  SimState st = InitState(snn, {1, 1});
  for (int t = 0; t < 3; ++t) st = Step(st, snn, Drive(1.0f));
  EXPECT_EQ(st.layers[0].net_count[0], 3);
  EXPECT_FLOAT_EQ(st.logits.at(0), 3.0f);  // readout sees the spike value th = 1
}

TEST(StepTest, FireAtExactThreshold) {
  const SnnModel snn = OneNeuron(1.0f, 0.5f);
  const SimState st = Step(InitState(snn, {1, 1}), snn, Drive(0.5f));
  EXPECT_EQ(st.layers[0].z[0], 1);
}

TEST(StepTest, NonFiniteMembraneIsNumericError) {
  const SnnModel snn = OneNeuron(1.0f, 0.5f);
  EXPECT_THROW(Step(InitState(snn, {1, 1}), snn, Drive(std::nanf(""))), NumericError);
}

TEST(StepTest, StepAndStepInPlaceAgree) {
  const SnnModel snn = RandomCnn(1);
  const Tensor x = RandomInputs({3, 1, 8, 8}, 2);
  SimState a = InitState(snn, x.shape());
  SimState b = InitState(snn, x.shape());
  for (int t = 0; t < 5; ++t) {
    a = Step(a, snn, x);
    StepInPlace(b, snn, x, Correction::kNone);
  }
  EXPECT_TRUE(std::equal(a.logits.values().begin(), a.logits.values().end(), b.logits.values().begin()));
  EXPECT_EQ(a.layers[1].u, b.layers[1].u);
}

TEST(NegativeSpikeTest, RetractsAfterDip) {
  const SnnModel snn = OneNeuron(1.0f, 0.9f);
  SimState st = InitState(snn, {1, 1});
  st = StepWithNegativeSpikes(st, snn, Drive(0.3f));
  ASSERT_EQ(st.layers[0].net_count[0], 1);
  st = StepWithNegativeSpikes(st, snn, Drive(-0.5f));
  EXPECT_NEAR(st.layers[0].u[0], -0.3f, 1e-6f);
  EXPECT_EQ(st.layers[0].z[0], -1);
  EXPECT_EQ(st.layers[0].net_count[0], 0);
  st = StepWithNegativeSpikes(st, snn, Drive(0.0f));
  EXPECT_NEAR(st.layers[0].u[0], 1.0f - 0.3f, 1e-6f);
  EXPECT_EQ(st.layers[0].negative_spikes, 1u);
}

TEST(NegativeSpikeTest, NeverSpikedMeansNoRetraction) {
  const SnnModel snn = OneNeuron(1.0f, 0.5f);
  SimState st = InitState(snn, {1, 1});
  for (int t = 0; t < 4; ++t) {
    st = StepWithNegativeSpikes(st, snn, Drive(-0.7f));
    EXPECT_EQ(st.layers[0].z[0], 0);
  }
}

TEST(NegativeSpikeTest, ConstantDriveMatchesPlainStep) {
  // A single spiking layer sees a constant drive per neuron, so the
  // membrane never drops below zero after a spike.
  const SnnModel snn = RandomMlp(3, 0.2f);
  const Tensor x = RandomInputs({32, 6}, 4);
  const std::vector<int> labels(32, 0);
  SimConfig plain{40, Correction::kNone, true};
  SimConfig negative{40, Correction::kNegativeSpikes, true};
  const RunResult a = qsnn::Run(snn, x, labels, plain);
  const RunResult b = qsnn::Run(snn, x, labels, negative);
  EXPECT_EQ(a.final_predictions, b.final_predictions);
  EXPECT_TRUE(std::equal(a.final_state.logits.values().begin(), a.final_state.logits.values().end(),
                         b.final_state.logits.values().begin()));
  EXPECT_EQ(b.final_state.layers[0].negative_spikes, 0u);
}

TEST(RunTest, PrefixPropertyAcrossHorizons) {
  const SnnModel snn = RandomCnn(5);
  const Tensor x = RandomInputs({6, 1, 8, 8}, 6);
  const std::vector<int> labels = {0, 1, 2, 3, 0, 1};
  const RunResult one = qsnn::Run(snn, x, labels, SimConfig{1});
  const RunResult many = qsnn::Run(snn, x, labels, SimConfig{8});
  EXPECT_EQ(many.accuracy.size(), 8u);
  EXPECT_EQ(one.accuracy[0], many.accuracy[0]);
  const RunResult four = qsnn::Run(snn, x, labels, SimConfig{4});
  for (int t = 0; t < 4; ++t) EXPECT_EQ(four.accuracy[t], many.accuracy[t]);
}

TEST(RunTest, SpikeCountBoundedByHorizonAndBinary) {
  const SnnModel snn = RandomCnn(7);
  const Tensor x = RandomInputs({4, 1, 8, 8}, 8);
  const int steps = 6;
  SimState st = InitState(snn, x.shape());
  for (int t = 0; t < steps; ++t) {
    StepInPlace(st, snn, x, Correction::kNone);
    for (const SpikingLayerState& layer : st.layers)
      for (int z : layer.z) ASSERT_TRUE(z == 0 || z == 1);
  }
  for (const SpikingLayerState& layer : st.layers) {
    for (int c : layer.net_count) {
      EXPECT_GE(c, 0);
      EXPECT_LE(c, steps);
    }
    EXPECT_EQ(layer.negative_spikes, 0u);
  }
}

TEST(RunTest, ZeroInputIsDeterministic) {
  const SnnModel snn = RandomCnn(9);
  const Tensor x({5, 1, 8, 8}, 0.0f);
  const std::vector<int> labels(5, 1);
  const RunResult a = qsnn::Run(snn, x, labels, SimConfig{5});
  const RunResult b = qsnn::Run(snn, x, labels, SimConfig{5});
  EXPECT_EQ(a.final_predictions, b.final_predictions);
  EXPECT_TRUE(std::all_of(a.final_predictions.begin(), a.final_predictions.end(),
                          [&](int p) { return p == a.final_predictions[0]; }));
  EXPECT_EQ(a.spikes, b.spikes);
}

TEST(RunTest, SingleLayerAtHorizonPMatchesQuantizedAnn) {
  AnnModel ann = BuildModel({"mlp2", {6}, 4, 3, 12}, 11);
  for (Layer& layer : ann.layers) {
    if (auto* q = std::get_if<QuantizerLayer>(&layer)) {
      q->scale.mutable_values()[0] = 0.25f;
      q->initialized = true;
    }
  }
  const Tensor x = RandomInputs({64, 6}, 12);
  const std::vector<int> ann_pred = ArgMax(Forward(ann, x, ForwardOptions{}));
  const RunResult run = qsnn::Run(Convert(ann), x, ann_pred, SimConfig{3});
  EXPECT_EQ(run.final_predictions, ann_pred);
  EXPECT_EQ(run.accuracy.back(), 1.0);
}

TEST(RunTest, ErrorPaths) {
  const SnnModel snn = OneNeuron(1.0f, 0.5f);
  EXPECT_THROW(qsnn::Run(snn, Drive(1.0f), std::vector<int>{0}, SimConfig{0}), ConfigError);
  EXPECT_THROW(qsnn::Run(snn, Drive(1.0f), std::vector<int>{0, 1}, SimConfig{2}), UsageError);
  EXPECT_THROW(InitState(snn, {0, 1}), UsageError);
}

TEST(RunTest, CsvHasOneRowPerStep) {
  const SnnModel snn = RandomMlp(1, 0.3f);
  const RunResult r = qsnn::Run(snn, RandomInputs({8, 6}, 1), std::vector<int>(8, 0), SimConfig{3});
  std::ostringstream os;
  WriteRunCsv(os, r);
  const std::string csv = os.str();
  EXPECT_EQ(csv.rfind("t,accuracy,total_spikes,spikes_l0\n", 0), 0u) << csv;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

// ---- response curve ---------------------------------------------------------

TEST(ResponseCurveTest, ThreeStepsMaxOutput) {
  // Sweep over [-1.5 th, 4.5 th] on 13 points; index 9 is X = 3 th.
  const auto curve = ResponseCurve(1.0, 3, 13);
  ASSERT_EQ(curve.size(), 13u);
  EXPECT_DOUBLE_EQ(curve[9].accumulated_input, 3.0);
  EXPECT_DOUBLE_EQ(curve[9].output, 3.0);
  EXPECT_EQ(curve.back().spikes, 3);
}

TEST(ResponseCurveTest, NegativeInputGivesZero) {
  for (int steps : {1, 3, 16, 64}) {
    for (const ResponsePoint& pt : ResponseCurve(0.7, steps, 200)) {
      if (pt.accumulated_input < 0.0) EXPECT_EQ(pt.spikes, 0) << "T=" << steps;
    }
  }
}

TEST(ResponseCurveTest, ClosedFormAndRectifiedLimit) {
  for (double th : {1.0, 0.3}) {
    for (int steps : {3, 6, 12, 64}) {
      for (const ResponsePoint& pt : ResponseCurve(th, steps, 1000)) {
        const double x = pt.accumulated_input;
        const double closed =
            std::clamp(std::floor((x + 0.5 * th) / th), 0.0, static_cast<double>(steps));
        ASSERT_EQ(pt.spikes, static_cast<int>(closed)) << "th=" << th << " T=" << steps << " X=" << x;
        EXPECT_LE(std::abs(pt.output - std::clamp(x, 0.0, steps * th)), th / 2 + 1e-9);
        // Per-step form of the same bound.
        EXPECT_LE(std::abs(pt.output / steps - std::clamp(x / steps, 0.0, th)),
                  th / (2.0 * steps) + 1e-9);
      }
    }
  }
}

TEST(ResponseCurveTest, BadArguments) {
  EXPECT_THROW(ResponseCurve(0.0, 3, 10), ConfigError);
  EXPECT_THROW(ResponseCurve(1.0, 0, 10), ConfigError);
}

// The templated neuron update is the single source of the dynamics; check
// it in double against a hand trace.
TEST(IntegrateAndFireTest, DoubleTrace) {
  double u = 0.5;
  int count = 0;
  int z = IntegrateAndFire(u, 0.6, 0, 1.0, count, false);
  EXPECT_EQ(z, 1);
  EXPECT_DOUBLE_EQ(u, 1.1);
  z = IntegrateAndFire(u, 0.6, z, 1.0, count, false);
  EXPECT_EQ(z, 0);
  EXPECT_DOUBLE_EQ(u, 1.1 + 0.6 - 1.0);
  z = IntegrateAndFire(u, 0.6, z, 1.0, count, false);
  EXPECT_EQ(z, 1);
  EXPECT_EQ(count, 2);
}

}  // namespace
}  // namespace qsnn
