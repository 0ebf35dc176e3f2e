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

#include "qsnn/verify.h"

#include <gtest/gtest.h>

namespace qsnn {
namespace {

TEST(PropertySuiteTest, ExpectedMean) {
  const CheckResult r = CheckExpectedMean(0);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PropertySuiteTest, BackwardReference) {
  const CheckResult r = CheckBackwardReference(0);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PropertySuiteTest, SingleNeuronEquivalence) {
  const CheckResult r = CheckSingleNeuronEquivalence();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PropertySuiteTest, ResponseCurve) {
  const CheckResult r = CheckResponseCurve();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PropertySuiteTest, Gradients) {
  const CheckResult r = CheckGradients(0);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PropertySuiteTest, OtherSeedsPassToo) {
  for (std::uint64_t seed : {1u, 2u}) {
    for (const CheckResult& r : RunPropertySuite(seed)) EXPECT_TRUE(r.passed) << FormatCheck(r);
  }
}

TEST(FormatCheckTest, OneLine) {
  EXPECT_EQ(FormatCheck({3, "name", true, "ok"}), "PASS [3] name: ok");
  EXPECT_EQ(FormatCheck({5, "trend", false, "bad"}), "FAIL [5] trend: bad");
}

ResultRow Mean(const std::string& variant, double ann, std::vector<double> snn) {
  ResultRow r;
  r.variant = variant;
  r.seed = "mean";
  r.ann_accuracy = ann;
  r.snn_accuracy = std::move(snn);
  return r;
}

ResultTable TrendTable(std::vector<double> plain, std::vector<double> noisy, double ann = 0.9) {
  ResultTable t;
  t.t_list = {1, 2, 4, 8, 16};
  t.rows = {Mean(kVariantNoNoise, ann, plain), Mean(kVariantNoise, ann, noisy)};
  for (ResultRow& r : t.rows) r.seed = "0";
  Aggregate(t);
  return t;
}

TEST(TrendCheckTest, NoiseTrendPassesAndFails) {
  EXPECT_TRUE(CheckNoiseTrend(TrendTable({0.5, 0.7, 0.8, 0.89, 0.9}, {0.6, 0.75, 0.85, 0.89, 0.9}), 2).passed);
  // Not better at T=2.
  EXPECT_FALSE(CheckNoiseTrend(TrendTable({0.5, 0.75, 0.8, 0.89, 0.9}, {0.6, 0.75, 0.85, 0.89, 0.9}), 2).passed);
  // Better everywhere but far from the ANN at T = 4p.
  EXPECT_FALSE(CheckNoiseTrend(TrendTable({0.5, 0.7, 0.8, 0.85, 0.9}, {0.6, 0.75, 0.85, 0.86, 0.9}), 2).passed);
  // T = 4p not simulated.
  EXPECT_FALSE(CheckNoiseTrend(TrendTable({0.5, 0.7, 0.8, 0.89, 0.9}, {0.6, 0.75, 0.85, 0.89, 0.9}), 3).passed);
}

TEST(TrendCheckTest, NegativeSpikeTrend) {
  const ResultTable plain = TrendTable({0.5, 0.7, 0.8, 0.89, 0.9}, {0.6, 0.75, 0.85, 0.89, 0.9});
  EXPECT_TRUE(CheckNegativeSpikeTrend(plain, plain).passed);
  const ResultTable small_drop = TrendTable({0.5, 0.696, 0.8, 0.89, 0.904}, {0.6, 0.75, 0.85, 0.89, 0.9});
  EXPECT_TRUE(CheckNegativeSpikeTrend(plain, small_drop).passed);
  const ResultTable big_drop = TrendTable({0.5, 0.69, 0.8, 0.89, 0.9}, {0.6, 0.75, 0.85, 0.89, 0.9});
  EXPECT_FALSE(CheckNegativeSpikeTrend(plain, big_drop).passed);
  const ResultTable late_gap = TrendTable({0.5, 0.7, 0.8, 0.89, 0.9}, {0.6, 0.75, 0.85, 0.89, 0.91});
  EXPECT_FALSE(CheckNegativeSpikeTrend(plain, late_gap).passed);
}

}  // namespace
}  // namespace qsnn
