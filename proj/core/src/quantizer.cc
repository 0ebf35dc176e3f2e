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

#include "qsnn/quantizer.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <utility>

#include "qsnn/errors.h"

namespace qsnn {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer.
std::uint64_t Mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t StreamBase(const NoiseKey& key) {
  std::uint64_t h = Mix(key.seed + kGolden);
  h = Mix(h ^ (key.layer + 1) * kGolden);
  return Mix(h ^ (key.step + 1) * 0xD6E8FEB86659FD93ull);
}

float NoiseAt(std::uint64_t base, std::uint64_t index) {
  const std::uint64_t bits = Mix(base + (index + 1) * kGolden) >> 40;  // 24 bits
  // (2k + 1 - 2^24) / 2^25 for k in [0, 2^24): odd numerator, |.| < 0.5.
  const auto numerator = static_cast<std::int64_t>(2 * bits + 1) - (std::int64_t{1} << 24);
  return static_cast<float>(std::ldexp(static_cast<double>(numerator), -25));
}

void CheckScale(const QuantizerParams& q) {
  if (!(q.scale > 0.0f) || !std::isfinite(q.scale)) {
    throw ConfigError("quantizer scale must be positive and finite, got " +
                      std::to_string(q.scale));
  }
  if (q.upper_bound < 1) {
    throw ConfigError("quantizer upper bound must be >= 1, got " +
                      std::to_string(q.upper_bound));
  }
}

void CheckFinite(std::span<const float> v, const std::string& layer) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(layer + ": non-finite pre-activation at element " +
                         std::to_string(i));
    }
  }
}

}  // namespace

float RoundHalfUp(float x) {
  const float r = std::floor(x);
  return (x - r >= 0.5f) ? r + 1.0f : r;
}

float UniformNoise(const NoiseKey& key, std::uint64_t index) {
  return NoiseAt(StreamBase(key), index);
}

NoiseDraw NoiseDraw::Zeros(const Shape& shape) {
  return NoiseDraw{shape, std::vector<float>(NumElements(shape), 0.0f)};
}

NoiseDraw NoiseDraw::Sample(const Shape& shape, const NoiseKey& key) {
  NoiseDraw draw{shape, std::vector<float>(NumElements(shape))};
  const std::uint64_t base = StreamBase(key);
  for (std::size_t i = 0; i < draw.epsilon.size(); ++i) draw.epsilon[i] = NoiseAt(base, i);
  return draw;
}

Tensor QuantizeBaseline(const Tensor& v, const QuantizerParams& q, const std::string& layer) {
  CheckScale(q);
  CheckFinite(v.values(), layer);
  const float p = static_cast<float>(q.upper_bound);
  std::vector<float> out(v.size());
  const auto in = v.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = q.scale * RoundHalfUp(std::clamp(in[i] / q.scale, 0.0f, p));
  }
  return Tensor(v.shape(), std::move(out));
}

NoisyForwardResult QuantizeNoisyForward(const Tensor& v, const QuantizerParams& q,
                                        const NoiseDraw& draw, const std::string& layer) {
  CheckScale(q);
  CheckFinite(v.values(), layer);
  const bool noisy = q.noise_enabled;
  if (noisy && (draw.shape != v.shape() || draw.epsilon.size() != v.size())) {
    throw UsageError(layer + ": noise draw shape " + ShapeToString(draw.shape) +
                     " does not match input " + ShapeToString(v.shape()));
  }
  const float p = static_cast<float>(q.upper_bound);
  const auto in = v.values();
  QuantizerContext ctx{v.shape(), std::vector<float>(v.size()), q.upper_bound};
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    float x = in[i] / q.scale;
    if (noisy) x += draw.epsilon[i];
    const float x_clip = std::clamp(x, 0.0f, p);
    ctx.x_clip[i] = x_clip;
    out[i] = q.scale * RoundHalfUp(x_clip);
  }
  return {Tensor(v.shape(), std::move(out)), std::move(ctx)};
}

QuantizerGrads QuantizeBackward(const Tensor& upstream, const QuantizerContext& context,
                                const QuantizerParams& q) {
  if (!context.valid()) throw UsageError("quantizer backward without a forward context");
  if (upstream.shape() != context.shape) {
    throw UsageError("quantizer backward: upstream " + ShapeToString(upstream.shape()) +
                     " vs saved " + ShapeToString(context.shape));
  }
  if (q.upper_bound != context.upper_bound) {
    throw UsageError("quantizer backward: upper bound differs from the forward pass");
  }
  const float p = static_cast<float>(context.upper_bound);
  const auto g = upstream.values();
  std::vector<float> grad_v(g.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float xc = context.x_clip[i];
    const bool flag = (xc > 0.0f) != (xc >= p);
    const float f = flag ? 1.0f : 0.0f;
    grad_v[i] = g[i] * f;
    const float elem = RoundHalfUp(xc) - xc * f;
    acc += static_cast<double>(elem * g[i]);
  }
  const double norm = std::sqrt(static_cast<double>(g.size()) * static_cast<double>(context.upper_bound));
  return {Tensor(upstream.shape(), std::move(grad_v)), static_cast<float>(acc / norm)};
}

Tensor Quantize(const Tensor& v, const Tensor& scale, int upper_bound, const NoiseDraw* draw,
                Tape* tape, const std::string& layer) {
  if (scale.size() != 1) {
    throw DimensionError(layer + ": scale must hold one value, got " + ShapeToString(scale.shape()));
  }
  QuantizerParams q{scale.item(), upper_bound, draw != nullptr, 0};
  NoisyForwardResult fwd =
      QuantizeNoisyForward(v, q, draw ? *draw : NoiseDraw{}, layer);
  if (tape) {
    tape->Record("quantize", {v, scale}, fwd.output,
                 [ctx = std::move(fwd.context), q](std::span<const float> g,
                                                   std::span<const std::span<float>> gi) {
                   Tensor upstream(ctx.shape, std::vector<float>(g.begin(), g.end()));
                   QuantizerGrads grads = QuantizeBackward(upstream, ctx, q);
                   if (!gi[0].empty()) {
                     const auto gv = grads.grad_v.values();
                     for (std::size_t i = 0; i < gv.size(); ++i) gi[0][i] += gv[i];
                   }
                   if (!gi[1].empty()) gi[1][0] += grads.grad_s;
                 });
  }
  return fwd.output;
}

double ExpectedMeanOracle(float v, float s, int p, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw UsageError("expected-mean oracle needs at least one sample");
  constexpr std::size_t kChunk = 1 << 16;
  const QuantizerParams q{s, p, true, seed};
  double total = 0.0;
  for (std::size_t start = 0, chunk = 0; start < n_samples; start += kChunk, ++chunk) {
    const std::size_t n = std::min(kChunk, n_samples - start);
    Tensor batch({n}, v);
    const NoiseDraw draw = NoiseDraw::Sample({n}, NoiseKey{seed, 0, chunk});
    const NoisyForwardResult r = QuantizeNoisyForward(batch, q, draw, "oracle");
    for (float x : r.output.values()) total += x;
  }
  return total / static_cast<double>(n_samples);
}

double ScaleFitError(std::span<const float> preacts, float s, int p) {
  const float top = static_cast<float>(p);
  double err = 0.0;
  for (float v : preacts) {
    const float q = s * RoundHalfUp(std::clamp(v / s, 0.0f, top));
    const double d = static_cast<double>(q) - static_cast<double>(std::max(v, 0.0f));
    err += d * d;
  }
  return err;
}

float InitScale(std::span<const float> preacts, int p) {
  if (preacts.empty()) throw UsageError("scale initialization needs a non-empty batch");
  if (p < 1) throw ConfigError("upper bound must be >= 1");
  CheckFinite(preacts, "scale initialization");
  const float vmax = *std::max_element(preacts.begin(), preacts.end());
  if (!(vmax > 0.0f)) {
    std::cerr << "warning: scale initialization saw no positive pre-activation; using s = 1\n";
    return 1.0f;
  }
  const double lo = static_cast<double>(vmax) / (4.0 * p);
  const double hi = 2.0 * static_cast<double>(vmax) / p;
  std::vector<float> candidates;
  candidates.reserve(kInitScaleGridSize + 1);
  for (int i = 0; i < kInitScaleGridSize; ++i) {
    const double t = static_cast<double>(i) / (kInitScaleGridSize - 1);
    candidates.push_back(static_cast<float>(lo * std::pow(hi / lo, t)));
  }
  candidates.push_back(vmax / static_cast<float>(p));

  // Non-positive inputs contribute nothing (both sides are 0). For the rest,
  // sort once; each quantization level is then a contiguous run found with
  // the same float expression ScaleFitError uses, and its squared error
  // comes from prefix sums.
  std::vector<float> pos;
  for (float v : preacts) {
    if (v > 0.0f) pos.push_back(v);
  }
  std::sort(pos.begin(), pos.end());
  std::vector<double> sum1(pos.size() + 1, 0.0), sum2(pos.size() + 1, 0.0);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    sum1[i + 1] = sum1[i] + pos[i];
    sum2[i + 1] = sum2[i] + static_cast<double>(pos[i]) * pos[i];
  }
  const float top = static_cast<float>(p);

  float best = candidates.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (float s : candidates) {
    if (!(s > 0.0f)) continue;
    auto level = [&](float v) { return RoundHalfUp(std::clamp(v / s, 0.0f, top)); };
    double err = 0.0;
    std::size_t begin = 0;
    for (int k = 0; k <= p && begin < pos.size(); ++k) {
      const auto end_it = std::partition_point(pos.begin() + static_cast<std::ptrdiff_t>(begin), pos.end(),
                                               [&](float v) { return level(v) <= static_cast<float>(k); });
      const auto end = static_cast<std::size_t>(end_it - pos.begin());
      const double q = static_cast<double>(s * static_cast<float>(k));
      const double n = static_cast<double>(end - begin);
      err += n * q * q - 2.0 * q * (sum1[end] - sum1[begin]) + (sum2[end] - sum2[begin]);
      begin = end;
    }
    if (err < best_err) {
      best_err = err;
      best = s;
    }
  }
  return best;
}

}  // namespace qsnn
