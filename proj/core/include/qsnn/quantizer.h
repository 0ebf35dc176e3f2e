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

// Clip-and-round activation quantizer with optional uniform noise injection.
//
// Forward:  v_hat = s * round(clip(v / s + eps, 0, p)),  eps ~ U(-0.5, 0.5)
// (eps = 0 gives the plain quantizer). The output lies on the lattice
// {0, s, ..., p*s}. With noise, the mean output over eps is exactly
// clip(v, 0, s*p), and for fixed v only the two lattice points adjacent to
// v/s are reachable.
//
// Backward (straight-through inside the active range):
//   flag      = (x_clip > 0) xor (x_clip >= p)
//   dL/dv     = upstream * flag
//   dL/ds     = sum((round(x_clip) - x_clip * flag) * upstream) / sqrt(N * p)
// where x_clip = clip(v / s + eps, 0, p) is saved by the forward pass and N is
// the element count.

#ifndef QSNN_QUANTIZER_H_
#define QSNN_QUANTIZER_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qsnn/tape.h"
#include "qsnn/tensor.h"

namespace qsnn {

inline constexpr float kMinScale = 1e-8f;

struct QuantizerParams {
  float scale = 1.0f;     // s, learnable, kept >= kMinScale
  int upper_bound = 1;    // p, fixed per layer
  bool noise_enabled = false;
  std::uint64_t rng_seed = 0;
};

// Round half up: floor(x) + 1 iff frac(x) >= 0.5. Exact for |x| < 2^23,
// unlike floor(x + 0.5f) which can round 0.5 - ulp up.
float RoundHalfUp(float x);

// Key of one noise stream: run seed, quantizer index, forward-call counter.
struct NoiseKey {
  std::uint64_t seed = 0;
  std::uint64_t layer = 0;
  std::uint64_t step = 0;
};

// Counter-based uniform draw in the open interval (-0.5, 0.5). The value is a
// pure function of (key, index); the result is an odd multiple of 2^-25, so
// it is exactly representable and never touches the interval ends.
float UniformNoise(const NoiseKey& key, std::uint64_t index);

// Per-element noise for one quantizer forward pass.
struct NoiseDraw {
  Shape shape;
  std::vector<float> epsilon;

  static NoiseDraw Zeros(const Shape& shape);
  static NoiseDraw Sample(const Shape& shape, const NoiseKey& key);
};

// State the backward rule needs from the forward pass.
struct QuantizerContext {
  Shape shape;
  std::vector<float> x_clip;
  int upper_bound = 0;

  bool valid() const { return upper_bound > 0 && !x_clip.empty(); }
};

struct NoisyForwardResult {
  Tensor output;
  QuantizerContext context;
};

struct QuantizerGrads {
  Tensor grad_v;
  float grad_s = 0.0f;
};

// s * round(clip(v / s, 0, p)). `layer` names the quantizer in NumericError
// messages for non-finite inputs.
Tensor QuantizeBaseline(const Tensor& v, const QuantizerParams& q,
                        const std::string& layer = "quantizer");

// Noisy forward. With q.noise_enabled false the draw is ignored and the
// result is bit-identical to QuantizeBaseline.
NoisyForwardResult QuantizeNoisyForward(const Tensor& v, const QuantizerParams& q,
                                        const NoiseDraw& draw,
                                        const std::string& layer = "quantizer");

// Straight-through backward; see the file comment. Throws UsageError when the
// context is missing (default-constructed) or does not match `upstream`.
QuantizerGrads QuantizeBackward(const Tensor& upstream, const QuantizerContext& context,
                                const QuantizerParams& q);

// Differentiable quantizer for training. `scale` is the learnable [1]-shaped
// s; `draw` may be null for the noise-free path.
Tensor Quantize(const Tensor& v, const Tensor& scale, int upper_bound,
                const NoiseDraw* draw, Tape* tape, const std::string& layer = "quantizer");

// Monte-Carlo mean of the noisy quantizer at scalar v over n fresh draws.
double ExpectedMeanOracle(float v, float s, int p, std::size_t n_samples,
                          std::uint64_t seed);

// Number of log-spaced candidates searched by InitScale.
inline constexpr int kInitScaleGridSize = 200;

// Scale minimizing sum((quantize(v, s, p) - relu(v))^2) over 200 log-spaced
// candidates in [max(v) / (4p), 2 max(v) / p] plus the lattice-aligned
// candidate max(v) / p. Falls back to 1.0 (with a warning on stderr) when no
// sample is positive.
float InitScale(std::span<const float> preacts, int p);

// L2 objective used by InitScale, in double precision.
double ScaleFitError(std::span<const float> preacts, float s, int p);

}  // namespace qsnn

#endif  // QSNN_QUANTIZER_H_
