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

#include "qsnn/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qsnn/errors.h"

namespace qsnn {
namespace {

// C[M x N] += A[M x K] . B[K x N]. Every C element accumulates its k
// products in order p = 0..k-1, matching the textbook triple loop.
void GemmNN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c) {
  constexpr std::size_t kRows = 1, kCols = 32;
  std::size_t i = 0;
  for (; i + kRows <= m; i += kRows) {
    std::size_t j = 0;
    for (; j + kCols <= n; j += kCols) {
      float acc[kRows][kCols];
      for (std::size_t r = 0; r < kRows; ++r)
        for (std::size_t l = 0; l < kCols; ++l) acc[r][l] = c[(i + r) * n + j + l];
      for (std::size_t p = 0; p < k; ++p) {
        const float* bp = b + p * n + j;
        for (std::size_t r = 0; r < kRows; ++r) {
          const float av = a[(i + r) * k + p];
          for (std::size_t l = 0; l < kCols; ++l) acc[r][l] += av * bp[l];
        }
      }
      for (std::size_t r = 0; r < kRows; ++r)
        for (std::size_t l = 0; l < kCols; ++l) c[(i + r) * n + j + l] = acc[r][l];
    }
    if (j < n) {
      for (std::size_t r = i; r < i + kRows; ++r)
        for (std::size_t p = 0; p < k; ++p) {
          const float av = a[r * k + p];
          for (std::size_t jj = j; jj < n; ++jj) c[r * n + jj] += av * b[p * n + jj];
        }
    }
  }
  for (; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = a[i * k + p];
      const float* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

std::vector<float> Transposed(const float* x, std::size_t rows, std::size_t cols) {
  std::vector<float> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t q = 0; q < cols; ++q) t[q * rows + r] = x[r * cols + q];
  return t;
}

// C[M x N] += A[M x K] . B[N x K]^T
void GemmNT(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c) {
  const std::vector<float> bt = Transposed(b, n, k);
  GemmNN(m, n, k, a, bt.data(), c);
}

// C[M x N] += A[K x M]^T . B[K x N]
void GemmTN(std::size_t m, std::size_t n, std::size_t k, const float* a,
            const float* b, float* c) {
  const std::vector<float> at = Transposed(a, k, m);
  GemmNN(m, n, k, at.data(), b, c);
}

void RequireRank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " +
                         std::to_string(rank) + ", got " + ShapeToString(t.shape()));
  }
}

struct ConvDims {
  std::size_t n, c, h, w, f, kh, kw, ho, wo;
};

void Im2Col(const float* x, const ConvDims& d, Conv2dGeometry g, float* col) {
  const std::size_t hw_out = d.ho * d.wo;
  for (std::size_t ch = 0; ch < d.c; ++ch) {
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        float* dst = col + ((ch * d.kh + ky) * d.kw + kx) * hw_out;
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(d.h) &&
                                ix < static_cast<long>(d.w);
            dst[oy * d.wo + ox] = inside ? x[(ch * d.h + iy) * d.w + ix] : 0.0f;
          }
        }
      }
    }
  }
}

void Col2ImAdd(const float* col, const ConvDims& d, Conv2dGeometry g, float* dx) {
  const std::size_t hw_out = d.ho * d.wo;
  for (std::size_t ch = 0; ch < d.c; ++ch) {
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        const float* src = col + ((ch * d.kh + ky) * d.kw + kx) * hw_out;
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
            dx[(ch * d.h + iy) * d.w + ix] += src[oy * d.wo + ox];
          }
        }
      }
    }
  }
}

std::size_t PooledExtent(std::size_t in, std::size_t kernel, std::size_t stride,
                         const char* op) {
  if (kernel == 0 || stride == 0) {
    throw ConfigError(std::string(op) + ": kernel and stride must be positive");
  }
  if (kernel > in) {
    throw ConfigError(std::string(op) + ": window " + std::to_string(kernel) +
                      " larger than input extent " + std::to_string(in));
  }
  return (in - kernel) / stride + 1;
}

}  // namespace

Tensor MatMul(const Tensor& a, const Tensor& b, Tape* tape) {
  RequireRank(a, 2, "matmul", "lhs");
  RequireRank(b, 2, "matmul", "rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, lhs " +
                         ShapeToString(a.shape()) + " vs rhs " + ShapeToString(b.shape()));
  }
  Tensor c({m, n});
  GemmNN(m, n, k, a.values().data(), b.values().data(), c.mutable_values().data());
  if (tape) {
    tape->Record("matmul", {a, b}, c,
                 [a, b, m, n, k](std::span<const float> g, std::span<const std::span<float>> gi) {
                   if (!gi[0].empty()) GemmNT(m, k, n, g.data(), b.values().data(), gi[0].data());
                   if (!gi[1].empty()) GemmTN(k, n, m, a.values().data(), g.data(), gi[1].data());
                 });
  }
  return c;
}

Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias, Tape* tape) {
  RequireRank(x, 2, "linear", "input");
  RequireRank(weight, 2, "linear", "weight");
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (weight.dim(1) != in) {
    throw DimensionError("linear: input " + ShapeToString(x.shape()) +
                         " incompatible with weight " + ShapeToString(weight.shape()));
  }
  if (bias.size() != out) {
    throw DimensionError("linear: bias " + ShapeToString(bias.shape()) +
                         " does not match " + std::to_string(out) + " outputs");
  }
  Tensor y({batch, out});
  float* yv = y.mutable_values().data();
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy(bias.values().begin(), bias.values().end(), yv + i * out);
  }
  GemmNT(batch, out, in, x.values().data(), weight.values().data(), yv);
  if (tape) {
    tape->Record("linear", {x, weight, bias}, y,
                 [x, weight, batch, in, out](std::span<const float> g,
                                             std::span<const std::span<float>> gi) {
                   if (!gi[0].empty()) GemmNN(batch, in, out, g.data(), weight.values().data(), gi[0].data());
                   if (!gi[1].empty()) GemmTN(out, in, batch, g.data(), x.values().data(), gi[1].data());
                   if (!gi[2].empty()) {
                     for (std::size_t i = 0; i < batch; ++i)
                       for (std::size_t j = 0; j < out; ++j) gi[2][j] += g[i * out + j];
                   }
                 });
  }
  return y;
}

Tensor Conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              Conv2dGeometry geometry, Tape* tape) {
  RequireRank(x, 4, "conv2d", "input");
  RequireRank(weight, 4, "conv2d", "weight");
  if (geometry.stride == 0) throw ConfigError("conv2d: stride must be positive");
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0),
             weight.dim(2), weight.dim(3), 0, 0};
  if (weight.dim(1) != d.c) {
    throw DimensionError("conv2d: input " + ShapeToString(x.shape()) +
                         " has a channel count different from weight " +
                         ShapeToString(weight.shape()));
  }
  if (bias.size() != d.f) {
    throw DimensionError("conv2d: bias " + ShapeToString(bias.shape()) +
                         " does not match " + std::to_string(d.f) + " filters");
  }
  const std::size_t ph = d.h + 2 * geometry.padding, pw = d.w + 2 * geometry.padding;
  if (d.kh > ph || d.kw > pw) {
    throw ConfigError("conv2d: kernel " + ShapeToString({d.kh, d.kw}) +
                      " exceeds padded input " + ShapeToString({ph, pw}));
  }
  if ((ph - d.kh) % geometry.stride != 0 || (pw - d.kw) % geometry.stride != 0) {
    throw ConfigError("conv2d: non-integral output size for input " +
                      ShapeToString(x.shape()) + ", kernel " + ShapeToString({d.kh, d.kw}) +
                      ", stride " + std::to_string(geometry.stride) + ", padding " +
                      std::to_string(geometry.padding));
  }
  d.ho = (ph - d.kh) / geometry.stride + 1;
  d.wo = (pw - d.kw) / geometry.stride + 1;

  const std::size_t ckk = d.c * d.kh * d.kw, hw_out = d.ho * d.wo;
  Tensor y({d.n, d.f, d.ho, d.wo});
  std::vector<float> col(ckk * hw_out);
  float* yv = y.mutable_values().data();
  for (std::size_t s = 0; s < d.n; ++s) {
    Im2Col(x.values().data() + s * d.c * d.h * d.w, d, geometry, col.data());
    float* out = yv + s * d.f * hw_out;
    for (std::size_t f = 0; f < d.f; ++f) {
      std::fill(out + f * hw_out, out + (f + 1) * hw_out, bias.values()[f]);
    }
    GemmNN(d.f, hw_out, ckk, weight.values().data(), col.data(), out);
  }
  if (tape) {
    tape->Record("conv2d", {x, weight, bias}, y,
                 [x, weight, d, geometry, ckk, hw_out](std::span<const float> g,
                                                       std::span<const std::span<float>> gi) {
                   std::vector<float> col(ckk * hw_out), dcol(ckk * hw_out);
                   for (std::size_t s = 0; s < d.n; ++s) {
                     const float* gs = g.data() + s * d.f * hw_out;
                     if (!gi[1].empty()) {
                       Im2Col(x.values().data() + s * d.c * d.h * d.w, d, geometry, col.data());
                       GemmNT(d.f, ckk, hw_out, gs, col.data(), gi[1].data());
                     }
                     if (!gi[0].empty()) {
                       std::fill(dcol.begin(), dcol.end(), 0.0f);
                       GemmTN(ckk, hw_out, d.f, weight.values().data(), gs, dcol.data());
                       Col2ImAdd(dcol.data(), d, geometry, gi[0].data() + s * d.c * d.h * d.w);
                     }
                     if (!gi[2].empty()) {
                       for (std::size_t f = 0; f < d.f; ++f) {
                         float acc = 0.0f;
                         for (std::size_t i = 0; i < hw_out; ++i) acc += gs[f * hw_out + i];
                         gi[2][f] += acc;
                       }
                     }
                   }
                 });
  }
  return y;
}

Tensor AvgPool2d(const Tensor& x, std::size_t kernel, std::size_t stride, Tape* tape) {
  RequireRank(x, 4, "avg_pool2d", "input");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = PooledExtent(h, kernel, stride, "avg_pool2d");
  const std::size_t wo = PooledExtent(w, kernel, stride, "avg_pool2d");
  const float inv = 1.0f / static_cast<float>(kernel * kernel);
  Tensor y({n, c, ho, wo});
  const float* xv = x.values().data();
  float* yv = y.mutable_values().data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const float* xp = xv + plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        float acc = 0.0f;
        for (std::size_t ky = 0; ky < kernel; ++ky)
          for (std::size_t kx = 0; kx < kernel; ++kx)
            acc += xp[(oy * stride + ky) * w + ox * stride + kx];
        yv[(plane * ho + oy) * wo + ox] = acc * inv;
      }
    }
  }
  if (tape) {
    tape->Record("avg_pool2d", {x}, y,
                 [n, c, h, w, ho, wo, kernel, stride, inv](std::span<const float> g,
                                                           std::span<const std::span<float>> gi) {
                   if (gi[0].empty()) return;
                   for (std::size_t plane = 0; plane < n * c; ++plane) {
                     float* dx = gi[0].data() + plane * h * w;
                     for (std::size_t oy = 0; oy < ho; ++oy) {
                       for (std::size_t ox = 0; ox < wo; ++ox) {
                         const float share = g[(plane * ho + oy) * wo + ox] * inv;
                         for (std::size_t ky = 0; ky < kernel; ++ky)
                           for (std::size_t kx = 0; kx < kernel; ++kx)
                             dx[(oy * stride + ky) * w + ox * stride + kx] += share;
                       }
                     }
                   }
                 });
  }
  return y;
}

Tensor MaxPool2d(const Tensor& x, std::size_t kernel, std::size_t stride, Tape* tape) {
  RequireRank(x, 4, "max_pool2d", "input");
  if (tape && x.requires_grad()) {
    throw UsageError("max_pool2d has no backward rule; swap it for avg_pool2d before training");
  }
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = PooledExtent(h, kernel, stride, "max_pool2d");
  const std::size_t wo = PooledExtent(w, kernel, stride, "max_pool2d");
  Tensor y({n, c, ho, wo});
  const float* xv = x.values().data();
  float* yv = y.mutable_values().data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const float* xp = xv + plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        for (std::size_t ky = 0; ky < kernel; ++ky)
          for (std::size_t kx = 0; kx < kernel; ++kx)
            best = std::max(best, xp[(oy * stride + ky) * w + ox * stride + kx]);
        yv[(plane * ho + oy) * wo + ox] = best;
      }
    }
  }
  return y;
}

Tensor Flatten(const Tensor& x, Tape* tape) {
  if (x.rank() < 1) throw DimensionError("flatten: rank-0 input");
  const std::size_t n = x.dim(0);
  Tensor y = x.Reshaped({n, x.size() / n});
  if (tape) {
    tape->Record("flatten", {x}, y,
                 [](std::span<const float> g, std::span<const std::span<float>> gi) {
                   if (gi[0].empty()) return;
                   for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                 });
  }
  return y;
}

Tensor Sum(const Tensor& x, Tape* tape) {
  double acc = 0.0;
  for (float v : x.values()) acc += v;
  Tensor y = Tensor::Scalar(static_cast<float>(acc));
  if (tape) {
    tape->Record("sum", {x}, y,
                 [](std::span<const float> g, std::span<const std::span<float>> gi) {
                   if (gi[0].empty()) return;
                   for (float& v : gi[0]) v += g[0];
                 });
  }
  return y;
}

Tensor Scale(const Tensor& x, float factor, Tape* tape) {
  std::vector<float> out(x.values().begin(), x.values().end());
  for (float& v : out) v *= factor;
  Tensor y(x.shape(), std::move(out));
  if (tape) {
    tape->Record("scale", {x}, y,
                 [factor](std::span<const float> g, std::span<const std::span<float>> gi) {
                   if (gi[0].empty()) return;
                   for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += factor * g[i];
                 });
  }
  return y;
}

Tensor SoftmaxCrossEntropy(const Tensor& logits, std::span<const int> labels, Tape* tape) {
  RequireRank(logits, 2, "softmax_cross_entropy", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + ShapeToString(logits.shape()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw InputError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                       " at row " + std::to_string(i) + " outside [0, " +
                       std::to_string(k) + ")");
    }
  }
  const float* lv = logits.values().data();
  std::vector<float> probs(n * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = lv + i * k;
    const float mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j] - mx));
    const double log_z = std::log(z);
    for (std::size_t j = 0; j < k; ++j) {
      probs[i * k + j] = static_cast<float>(std::exp(static_cast<double>(row[j] - mx) - log_z));
    }
    loss += log_z - static_cast<double>(row[labels[i]] - mx);
  }
  Tensor y = Tensor::Scalar(static_cast<float>(loss / static_cast<double>(n)));
  if (tape) {
    std::vector<int> saved_labels(labels.begin(), labels.end());
    tape->Record("softmax_cross_entropy", {logits}, y,
                 [probs = std::move(probs), saved_labels = std::move(saved_labels), n, k](
                     std::span<const float> g, std::span<const std::span<float>> gi) {
                   if (gi[0].empty()) return;
                   const float scale = g[0] / static_cast<float>(n);
                   for (std::size_t i = 0; i < n; ++i) {
                     for (std::size_t j = 0; j < k; ++j) {
                       const float onehot = static_cast<int>(j) == saved_labels[i] ? 1.0f : 0.0f;
                       gi[0][i * k + j] += scale * (probs[i * k + j] - onehot);
                     }
                   }
                 });
  }
  return y;
}

std::vector<int> ArgMax(const Tensor& logits) {
  RequireRank(logits, 2, "argmax", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = logits.values().subspan(i * k, k);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace qsnn
