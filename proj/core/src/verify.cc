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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "qsnn/model.h"
#include "qsnn/ops.h"
#include "qsnn/quantizer.h"
#include "qsnn/snn_model.h"
#include "qsnn/snn_sim.h"

namespace qsnn {
namespace {

std::string Printf(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

// Backward rule written out step by step, one named temporary per line of
// the reference pseudo code. Rounding is half-up via floor(x + 0.5) in
// double, which is exact for every float input.
struct ReferenceGrads {
  std::vector<float> grad_activation;
  float grad_scale = 0.0f;
};

ReferenceGrads ReferenceBackward(const std::vector<float>& x_clip, const std::vector<float>& grad_output, int p) {
  ReferenceGrads out;
  double total = 0.0;
  for (std::size_t i = 0; i < x_clip.size(); ++i) {
    const bool above_zero = x_clip[i] > 0.0f;
    const bool at_top = x_clip[i] >= static_cast<float>(p);
    const float internal_flag = (above_zero ^ at_top) ? 1.0f : 0.0f;
    out.grad_activation.push_back(grad_output[i] * internal_flag);
    const float grad_one = x_clip[i] * internal_flag;
    const float grad_two = static_cast<float>(std::floor(static_cast<double>(x_clip[i]) + 0.5));
    const float grad_scale_elem = grad_two - grad_one;
    total += static_cast<double>(grad_scale_elem * grad_output[i]);
  }
  out.grad_scale = static_cast<float>(total / std::sqrt(static_cast<double>(x_clip.size()) * p));
  return out;
}

bool SameBits(float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); }

Tensor RandomTensor(const Shape& shape, std::mt19937_64& rng, bool requires_grad) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(NumElements(shape));
  for (float& x : v) x = dist(rng);
  return Tensor(shape, std::move(v), requires_grad);
}

std::vector<int> RandomLabels(std::size_t n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dist(0, classes - 1);
  std::vector<int> labels(n);
  for (int& l : labels) l = dist(rng);
  return labels;
}

// worst = max |analytic - numeric| / (rtol * max(|analytic|, |numeric|) + atol);
// the check passes when worst <= 1.
struct FdStats {
  double worst = 0.0;
};

// Compares tape gradients of `loss_fn` with central differences for every
// element of `params`.
FdStats FiniteDifference(const std::function<Tensor(Tape*)>& loss_fn, std::vector<Tensor> params) {
  constexpr double kStep = 1e-2, kRtol = 1e-2, kAtol = 1e-4;
  for (Tensor& t : params) t.zero_grad();
  Tape tape;
  tape.Backward(loss_fn(&tape));
  FdStats stats;
  for (Tensor& t : params) {
    const std::vector<float> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float saved = values[i];
      values[i] = static_cast<float>(saved + kStep);
      const double up = loss_fn(nullptr).item();
      values[i] = static_cast<float>(saved - kStep);
      const double down = loss_fn(nullptr).item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * kStep);
      const double diff = std::abs(numeric - analytic[i]);
      const double mag = std::max(std::abs(numeric), std::abs(static_cast<double>(analytic[i])));
      stats.worst = std::max(stats.worst, diff / (kRtol * mag + kAtol));
    }
  }
  return stats;
}

std::size_t IndexOf(const std::vector<int>& list, int value) {
  const auto it = std::find(list.begin(), list.end(), value);
  return it == list.end() ? list.size() : static_cast<std::size_t>(it - list.begin());
}

}  // namespace

std::string FormatCheck(const CheckResult& r) {
  return std::string(r.passed ? "PASS" : "FAIL") + " [" + std::to_string(r.id) + "] " + r.name + ": " + r.detail;
}

CheckResult CheckExpectedMean(std::uint64_t seed, std::size_t draws) {
  CheckResult r{1, "expected-mean", false, ""};
  struct Case {
    float s;
    int p;
  };
  double worst = 0.0;  // in units of s
  bool ok = true;
  std::uint64_t stream = 0;
  for (const Case c : {Case{1.0f, 3}, Case{0.5f, 2}, Case{2.0f, 7}}) {
    const double top = static_cast<double>(c.s) * c.p;
    for (int i = 0; i < 41; ++i) {
      const auto v = static_cast<float>(-0.5 * top + 2.0 * top * i / 40.0);
      const double mean = ExpectedMeanOracle(v, c.s, c.p, draws, seed * 1000 + stream++);
      const double expected = std::clamp(static_cast<double>(v), 0.0, top);
      const double dev = std::abs(mean - expected) / c.s;
      worst = std::max(worst, dev);
      ok = ok && dev <= 0.005;
    }
  }
  r.passed = ok;
  r.detail = Printf("max |mean - clip(v,0,sp)| = %.5f s over 123 points, %zu draws (tol 0.005 s)", worst, draws);
  return r;
}

CheckResult CheckBackwardReference(std::uint64_t seed, std::size_t n) {
  CheckResult r{2, "backward-reference", false, ""};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> scale_dist(0.05f, 4.0f), unit(0.0f, 1.0f), eps_dist(-0.499f, 0.499f);
  std::uniform_int_distribution<int> p_dist(1, 8), regime_dist(0, 2);
  std::size_t mismatches = 0, regime_count[3] = {0, 0, 0};
  std::vector<float> batch_v, batch_eps, batch_g;

  for (std::size_t k = 0; k < n; ++k) {
    const float s = scale_dist(rng);
    const int p = p_dist(rng);
    const int regime = regime_dist(rng);
    // Pick x = v / s + eps below 0, inside (0, p), or at/above p.
    float x;
    if (regime == 0) {
      x = -2.0f * unit(rng);
    } else if (regime == 1) {
      x = static_cast<float>(p) * unit(rng);
    } else {
      x = static_cast<float>(p) + 2.0f * unit(rng);
    }
    const float eps = eps_dist(rng);
    const float v = (x - eps) * s;
    const float g = 2.0f * unit(rng) - 1.0f;

    const QuantizerParams q{s, p, true, 0};
    const NoiseDraw draw{{1}, {eps}};
    const NoisyForwardResult fwd = QuantizeNoisyForward(Tensor({1}, {v}), q, draw);
    const QuantizerGrads got = QuantizeBackward(Tensor({1}, {g}), fwd.context, q);

    const float x_clip = std::clamp(v / s + eps, 0.0f, static_cast<float>(p));
    ++regime_count[x_clip <= 0.0f ? 0 : (x_clip >= static_cast<float>(p) ? 2 : 1)];
    const ReferenceGrads want = ReferenceBackward({x_clip}, {g}, p);
    if (!SameBits(fwd.context.x_clip[0], x_clip) || !SameBits(got.grad_v.values()[0], want.grad_activation[0]) ||
        !SameBits(got.grad_s, want.grad_scale)) {
      ++mismatches;
    }
    if (p == 3) {
      batch_v.push_back(v / s);
      batch_eps.push_back(eps);
      batch_g.push_back(g);
    }
  }

  // One batched call with a shared scale, so the sum and normalization are
  // exercised over many elements.
  const QuantizerParams q{1.0f, 3, true, 0};
  const NoiseDraw draw{{batch_v.size()}, batch_eps};
  const NoisyForwardResult fwd = QuantizeNoisyForward(Tensor({batch_v.size()}, batch_v), q, draw);
  const QuantizerGrads got = QuantizeBackward(Tensor({batch_g.size()}, batch_g), fwd.context, q);
  std::vector<float> x_clip(batch_v.size());
  for (std::size_t i = 0; i < x_clip.size(); ++i) x_clip[i] = std::clamp(batch_v[i] + batch_eps[i], 0.0f, 3.0f);
  const ReferenceGrads want = ReferenceBackward(x_clip, batch_g, 3);
  bool batch_ok = SameBits(got.grad_s, want.grad_scale);
  for (std::size_t i = 0; i < x_clip.size(); ++i) {
    batch_ok = batch_ok && SameBits(got.grad_v.values()[i], want.grad_activation[i]);
  }

  r.passed = mismatches == 0 && batch_ok && regime_count[0] > 0 && regime_count[1] > 0 && regime_count[2] > 0;
  r.detail = Printf("%zu/%zu scalar mismatches (regimes low/active/high = %zu/%zu/%zu), batched call of %zu %s",
                    mismatches, n, regime_count[0], regime_count[1], regime_count[2], batch_v.size(),
                    batch_ok ? "identical" : "DIFFERS");
  return r;
}

CheckResult CheckSingleNeuronEquivalence() {
  CheckResult r{3, "single-neuron-equivalence", false, ""};
  struct Case {
    float s;
    int p;
  };
  std::size_t mismatches = 0, total = 0;
  for (const Case c : {Case{1.0f, 3}, Case{0.5f, 2}, Case{2.0f, 7}}) {
    AnnModel ann;
    ann.arch = ArchSpec{"single", {1}, 1, c.p};
    ann.layers = {LinearLayer{Tensor({1, 1}, {1.0f}), Tensor({1}, {0.0f})},
                  QuantizerLayer{Tensor({1}, {c.s}), c.p, true},
                  LinearLayer{Tensor({1, 1}, {1.0f}), Tensor({1}, {0.0f})}};
    std::vector<float> vs;
    for (int i = 0; i <= 100; ++i) {
      vs.push_back(static_cast<float>(c.s * (-1.0 + (c.p + 2.0) * i / 100.0)));
    }
    const Tensor inputs({vs.size(), 1}, vs);
    const Tensor ann_out = Forward(ann, inputs, ForwardOptions{});

    const SnnModel snn = Convert(ann);
    SimConfig sim;
    sim.steps = c.p;
    const std::vector<int> labels(vs.size(), 0);
    const RunResult run = Run(snn, inputs, labels, sim);
    const auto& counts = run.final_state.layers.at(0).net_count;

    for (std::size_t i = 0; i < vs.size(); ++i) {
      const double x = std::clamp(static_cast<double>(vs[i]) / c.s, 0.0, static_cast<double>(c.p));
      const int level = static_cast<int>(std::floor(x + 0.5));
      const int ann_level = static_cast<int>(std::lround(ann_out.values()[i] / c.s));
      mismatches += counts[i] != level || ann_level != level;
      ++total;
    }
  }
  r.passed = mismatches == 0;
  r.detail = Printf("%zu/%zu grid points where spike count != ANN level (zero tolerance)", mismatches, total);
  return r;
}

CheckResult CheckResponseCurve() {
  CheckResult r{4, "response-curve", false, ""};
  std::size_t mismatches = 0, total = 0;
  double worst_dev = 0.0;  // in units of th
  for (double th : {1.0, 0.25}) {
    for (int steps : {3, 6, 12, 64, 256}) {
      for (const ResponsePoint& pt : ResponseCurve(th, steps, 1000)) {
        const double closed = std::clamp(std::floor((pt.accumulated_input + 0.5 * th) / th), 0.0,
                                         static_cast<double>(steps));
        mismatches += static_cast<double>(pt.spikes) != closed;
        const double relu = std::clamp(pt.accumulated_input, 0.0, steps * th);
        worst_dev = std::max(worst_dev, std::abs(pt.output - relu) / th);
        ++total;
      }
    }
  }
  r.passed = mismatches == 0 && worst_dev <= 0.5;
  r.detail = Printf("%zu/%zu closed-form mismatches; sup |N th - clip(X,0,T th)| = %.4f th (tol 0.5 th)",
                    mismatches, total, worst_dev);
  return r;
}

CheckResult CheckGradients(std::uint64_t seed) {
  CheckResult r{7, "gradient-sanity", false, ""};
  std::mt19937_64 rng(seed);
  std::string detail;
  bool ok = true;

  auto report = [&](const char* name, const FdStats& s) {
    ok = ok && s.worst <= 1.0;
    detail += Printf("%s %.3f; ", name, s.worst);
  };

  {
    Tensor a = RandomTensor({3, 4}, rng, true), b = RandomTensor({4, 5}, rng, true);
    const auto labels = RandomLabels(3, 5, rng);
    report("matmul", FiniteDifference(
                         [&](Tape* t) { return SoftmaxCrossEntropy(MatMul(a, b, t), labels, t); }, {a, b}));
  }
  for (const Conv2dGeometry geom : {Conv2dGeometry{1, 1}, Conv2dGeometry{2, 0}}) {
    Tensor x = RandomTensor({2, 2, 5, 5}, rng, true), w = RandomTensor({3, 2, 3, 3}, rng, true);
    Tensor b = RandomTensor({3}, rng, true);
    const std::size_t out = (5 + 2 * geom.padding - 3) / geom.stride + 1;
    const auto labels = RandomLabels(2, static_cast<int>(3 * out * out), rng);
    report(geom.stride == 1 ? "conv" : "conv-stride2",
           FiniteDifference(
               [&](Tape* t) { return SoftmaxCrossEntropy(Flatten(Conv2d(x, w, b, geom, t), t), labels, t); },
               {x, w, b}));
  }
  {
    Tensor x = RandomTensor({2, 2, 4, 4}, rng, true);
    const auto labels = RandomLabels(2, 8, rng);
    report("avgpool", FiniteDifference(
                          [&](Tape* t) { return SoftmaxCrossEntropy(Flatten(AvgPool2d(x, 2, 2, t), t), labels, t); },
                          {x}));
  }
  {
    Tensor logits = RandomTensor({4, 6}, rng, true);
    const auto labels = RandomLabels(4, 6, rng);
    report("loss", FiniteDifference([&](Tape* t) { return SoftmaxCrossEntropy(logits, labels, t); }, {logits}));
  }

  // Straight-through slope vs the slope of the expected quantizer output,
  // away from the kinks at 0 and s p. Common random numbers for v +- h.
  constexpr std::size_t kDraws = 100000;
  double worst_slope = 0.0;
  struct Case {
    float s;
    int p;
  };
  std::uint64_t step = 0;
  for (const Case c : {Case{1.0f, 3}, Case{0.5f, 2}, Case{2.0f, 7}}) {
    const QuantizerParams q{c.s, c.p, true, seed};
    for (double level = 0.75; level <= c.p - 0.75 + 1e-9; level += 0.25) {
      const auto v = static_cast<float>(level * c.s);
      const float h = 0.25f * c.s;
      const NoiseDraw draw = NoiseDraw::Sample({kDraws}, NoiseKey{seed, 99, step++});
      const auto up = QuantizeNoisyForward(Tensor({kDraws}, v + h), q, draw);
      const auto down = QuantizeNoisyForward(Tensor({kDraws}, v - h), q, draw);
      const auto mid = QuantizeNoisyForward(Tensor({kDraws}, v), q, draw);
      double diff = 0.0;
      for (std::size_t i = 0; i < kDraws; ++i) diff += up.output.values()[i] - down.output.values()[i];
      const double fd_slope = diff / kDraws / (2.0 * h);
      const QuantizerGrads ste = QuantizeBackward(Tensor({kDraws}, 1.0f), mid.context, q);
      double ste_slope = 0.0;
      for (float g : ste.grad_v.values()) ste_slope += g;
      ste_slope /= kDraws;
      worst_slope = std::max({worst_slope, std::abs(fd_slope - 1.0), std::abs(ste_slope - fd_slope)});
    }
  }
  ok = ok && worst_slope <= 0.05;
  detail += Printf("quantizer slope max dev %.4f (tol 0.05)", worst_slope);
  r.passed = ok;
  r.detail = "finite-difference error / (1e-2 |g| + 1e-4): " + detail;
  return r;
}

CheckResult CheckNoiseTrend(const ResultTable& table, int upper_bound) {
  CheckResult r{5, "noise-trend", false, ""};
  const ResultRow* with = table.Mean(kVariantNoise);
  const ResultRow* without = table.Mean(kVariantNoNoise);
  if (!with || !without) {
    r.detail = "table lacks a successful cell for one of the variants";
    return r;
  }
  bool ok = true;
  std::string detail;
  for (int t : {1, 2, 4}) {
    const std::size_t k = IndexOf(table.t_list, t);
    if (k == table.t_list.size()) {
      r.detail = "T=" + std::to_string(t) + " missing from T_list";
      return r;
    }
    const bool better = with->snn_accuracy[k] > without->snn_accuracy[k];
    ok = ok && better;
    detail += Printf("T=%d na %.4f vs no_na %.4f%s; ", t, with->snn_accuracy[k], without->snn_accuracy[k],
                     better ? "" : " (not better)");
  }
  const std::size_t k = IndexOf(table.t_list, 4 * upper_bound);
  if (k == table.t_list.size()) {
    r.detail = "T=4p missing from T_list";
    return r;
  }
  for (const ResultRow* row : {with, without}) {
    const double gap = row->ann_accuracy - row->snn_accuracy[k];
    ok = ok && gap <= 0.02;
    detail += Printf("%s ANN-SNN(T=%d) gap %.4f; ", row->variant.c_str(), 4 * upper_bound, gap);
  }
  detail.resize(detail.size() - 2);
  r.passed = ok;
  r.detail = detail;
  return r;
}

CheckResult CheckNegativeSpikeTrend(const ResultTable& plain, const ResultTable& negative) {
  CheckResult r{6, "negative-spike-trend", false, ""};
  if (plain.t_list != negative.t_list) {
    r.detail = "tables use different T_list";
    return r;
  }
  bool ok = true;
  double worst_drop = -1.0, worst_late = 0.0;
  std::size_t variants = 0;
  for (const char* variant : {kVariantNoNoise, kVariantNoise}) {
    const ResultRow* a = plain.Mean(variant);
    const ResultRow* b = negative.Mean(variant);
    if (!a || !b) continue;
    ++variants;
    for (std::size_t k = 0; k < plain.t_list.size(); ++k) {
      const int t = plain.t_list[k];
      const double delta = b->snn_accuracy[k] - a->snn_accuracy[k];
      if (t == 2 || t == 4) {
        worst_drop = std::max(worst_drop, -delta);
        ok = ok && delta >= -0.005;
      }
      if (t >= 16) {
        worst_late = std::max(worst_late, std::abs(delta));
        ok = ok && std::abs(delta) <= 0.005;
      }
    }
  }
  const bool has_needed = IndexOf(plain.t_list, 2) < plain.t_list.size() &&
                          IndexOf(plain.t_list, 4) < plain.t_list.size() &&
                          std::any_of(plain.t_list.begin(), plain.t_list.end(), [](int t) { return t >= 16; });
  r.passed = ok && variants == 2 && has_needed;
  r.detail = Printf("largest drop at T in {2,4}: %.4f (tol 0.005); largest |diff| at T>=16: %.4f (tol 0.005)",
                    std::max(worst_drop, 0.0), worst_late);
  return r;
}

std::vector<CheckResult> RunPropertySuite(std::uint64_t seed) {
  return {CheckExpectedMean(seed), CheckBackwardReference(seed), CheckSingleNeuronEquivalence(),
          CheckResponseCurve(), CheckGradients(seed)};
}

}  // namespace qsnn
