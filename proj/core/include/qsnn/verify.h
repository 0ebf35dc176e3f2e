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

// Property checks of the library against independent reference
// computations. Each check returns a pass/fail verdict plus a one-line
// measurement; `qsnn verify` and the acceptance binary print them.

#ifndef QSNN_VERIFY_H_
#define QSNN_VERIFY_H_

#include <cstdint>
#include <string>
#include <vector>

#include "qsnn/experiment.h"

namespace qsnn {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

// "PASS [3] single-neuron-equivalence: ..." style line.
std::string FormatCheck(const CheckResult& r);

// Monte-Carlo mean of the noisy quantizer against clip(v, 0, s p) on a
// 41-point grid over [-0.5 s p, 1.5 s p] for (s, p) in {(1,3), (0.5,2),
// (2,7)}; tolerance 0.005 s.
CheckResult CheckExpectedMean(std::uint64_t seed, std::size_t draws = 100000);

// QuantizeBackward against a line-by-line reference of the backward rule,
// bit for bit, on `n` random scalars covering the below-range, active and
// saturated regimes, plus one batched call.
CheckResult CheckBackwardReference(std::uint64_t seed, std::size_t n = 10000);

// Converted one-neuron SNN run for T = p steps: spike count equals the ANN
// integer level for every v on a 101-point grid over [-s, (p + 1) s].
CheckResult CheckSingleNeuronEquivalence();

// Response curve against clip(floor((X + th/2) / th), 0, T) on 1000 points
// for T in {3, 6, 12, 64, 256}, plus |N th - clip(X, 0, T th)| <= th / 2.
CheckResult CheckResponseCurve();

// Central finite differences for matmul, conv, avg-pool and the loss
// (rtol 1e-2), and the quantizer's straight-through slope against the
// slope of its expected output (tol 0.05).
CheckResult CheckGradients(std::uint64_t seed);

// Mean SNN accuracy with noise beats the noise-free variant at T in
// {1, 2, 4}, and both reach within 0.02 of their ANN accuracy by T = 4 p.
// `table` must hold both variants and those T values.
CheckResult CheckNoiseTrend(const ResultTable& table, int upper_bound);

// Negative spikes lose at most 0.005 mean accuracy at T in {2, 4}, and the
// two modes agree within 0.005 at every T >= 16, for every variant.
CheckResult CheckNegativeSpikeTrend(const ResultTable& plain, const ResultTable& negative);

// Checks 1, 2, 3, 4 and 7 (the ones that need no training).
std::vector<CheckResult> RunPropertySuite(std::uint64_t seed);

}  // namespace qsnn

#endif  // QSNN_VERIFY_H_
