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

#include <cmath>
#include <functional>
#include <random>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "qsnn/errors.h"
#include "qsnn/tape.h"

namespace qsnn {
namespace {

using ::testing::ElementsAre;
using ::testing::FloatNear;
using ::testing::Pointwise;

// gmock container matchers need const_iterator, which std::span lacks
// before C++23.
std::vector<float> Vec(std::span<const float> s) { return {s.begin(), s.end()}; }

std::vector<float> RandomValues(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = dist(rng);
  return v;
}

// ---- double-precision references used as finite-difference oracles ----------

std::vector<double> RefConv(const std::vector<double>& x, const std::vector<double>& w, std::size_t n,
                            std::size_t c, std::size_t h, std::size_t wd, std::size_t f, std::size_t k,
                            std::size_t stride, std::size_t pad, std::size_t* ho_out) {
  const std::size_t ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  *ho_out = ho;
  std::vector<double> y(n * f * ho * wo, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          double acc = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                acc += x[((s * c + ch) * h + iy) * wd + ix] * w[((o * c + ch) * k + ky) * k + kx];
              }
          y[((s * f + o) * ho + oy) * wo + ox] = acc;
        }
  return y;
}

double RefCrossEntropy(const std::vector<double>& logits, std::size_t rows, std::size_t cols,
                       const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = logits[i * cols];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, logits[i * cols + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += std::exp(logits[i * cols + j] - mx);
    total += -(logits[i * cols + labels[i]] - mx - std::log(z));
  }
  return total / static_cast<double>(rows);
}

std::vector<double> Widen(std::span<const float> v) { return {v.begin(), v.end()}; }

// Central differences of a double-valued function of `x` with step h.
std::vector<double> NumericGrad(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

void ExpectRelClose(std::span<const float> analytic, const std::vector<double>& numeric, double rtol) {
  ASSERT_EQ(analytic.size(), numeric.size());
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double scale = std::max({std::abs(numeric[i]), std::abs(static_cast<double>(analytic[i])), 1e-3});
    EXPECT_LE(std::abs(analytic[i] - numeric[i]) / scale, rtol) << "element " << i;
  }
}

// ---- matmul -------------------------------------------------------------------

TEST(MatMulTest, IdentityLeavesMatrixUnchanged) {
  const Tensor eye({2, 2}, std::vector<float>{1, 0, 0, 1});
  const Tensor m({2, 2}, std::vector<float>{1, 2, 3, 4});
  EXPECT_THAT(Vec(MatMul(eye, m).values()), ElementsAre(1, 2, 3, 4));
}

TEST(MatMulTest, SelectorRow) {
  const Tensor c = MatMul(Tensor({1, 2}, std::vector<float>{1, 0}), Tensor({2, 1}, std::vector<float>{2, 5}));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_FLOAT_EQ(c.item(), 2.0f);
}

TEST(MatMulTest, GradientOfSumMatchesFiniteDifferences) {
  Tensor a({1, 2}, std::vector<float>{1, 1}, true);
  const Tensor b({2, 1}, std::vector<float>{2, 3});
  Tape tape;
  tape.Backward(Sum(MatMul(a, b, &tape), &tape));
  const auto numeric = NumericGrad(
      [](const std::vector<double>& av) { return av[0] * 2.0 + av[1] * 3.0; }, {1.0, 1.0}, 1e-3);
  EXPECT_THAT(Vec(a.grad()), ElementsAre(2.0f, 3.0f));
  ExpectRelClose(a.grad(), numeric, 1e-6);
}

TEST(MatMulTest, ShapeMismatchReportsBothShapes) {
  try {
    MatMul(Tensor({2, 3}), Tensor({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_THAT(e.what(), ::testing::HasSubstr("[2 x 3]"));
  }
}

TEST(MatMulTest, RandomGradientsMatchReference) {
  const std::size_t m = 3, k = 4, n = 5;
  Tensor a({m, k}, RandomValues(m * k, 1), true);
  Tensor b({k, n}, RandomValues(k * n, 2), true);
  const std::vector<int> labels = {0, 4, 2};
  Tape tape;
  tape.Backward(SoftmaxCrossEntropy(MatMul(a, b, &tape), labels, &tape));

  auto loss = [&](const std::vector<double>& av, const std::vector<double>& bv) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) c[i * n + j] += av[i * k + p] * bv[p * n + j];
    return RefCrossEntropy(c, m, n, labels);
  };
  const auto av = Widen(a.values()), bv = Widen(b.values());
  ExpectRelClose(a.grad(), NumericGrad([&](const auto& x) { return loss(x, bv); }, av, 1e-3), 1e-2);
  ExpectRelClose(b.grad(), NumericGrad([&](const auto& x) { return loss(av, x); }, bv, 1e-3), 1e-2);
}

TEST(LinearTest, MatchesMatMulPlusBias) {
  const Tensor x({2, 3}, RandomValues(6, 3));
  const Tensor w({4, 3}, RandomValues(12, 4));
  const Tensor b({4}, std::vector<float>{1, 2, 3, 4});
  const Tensor y = Linear(x, w, b);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t o = 0; o < 4; ++o) {
      double ref = b.at(o);
      for (std::size_t j = 0; j < 3; ++j) ref += static_cast<double>(x.at(i * 3 + j)) * w.at(o * 3 + j);
      EXPECT_NEAR(y.at(i * 4 + o), ref, 1e-5);
    }
}

// ---- conv2d -------------------------------------------------------------------

TEST(Conv2dTest, OnesGiveNine) {
  const Tensor y = Conv2d(Tensor({1, 1, 3, 3}, 1.0f), Tensor({1, 1, 3, 3}, 1.0f), Tensor({1}, 0.0f), {1, 0});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y.item(), 9.0f);
}

TEST(Conv2dTest, DeltaKernelReproducesInput) {
  std::vector<float> kernel(9, 0.0f);
  kernel[4] = 1.0f;
  const Tensor x({1, 1, 4, 5}, RandomValues(20, 5));
  const Tensor y = Conv2d(x, Tensor({1, 1, 3, 3}, kernel), Tensor({1}, 0.0f), {1, 1});
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_THAT(Vec(y.values()), Pointwise(FloatNear(0.0f), Vec(x.values())));
}

TEST(Conv2dTest, WeightGradientMatchesFiniteDifferences) {
  Tensor x({1, 1, 4, 4}, RandomValues(16, 6));
  Tensor w({2, 1, 3, 3}, RandomValues(18, 7), true);
  Tensor b({2}, std::vector<float>{0.1f, -0.2f}, true);
  const std::vector<int> labels = {3};
  Tape tape;
  tape.Backward(SoftmaxCrossEntropy(Flatten(Conv2d(x, w, b, {1, 0}, &tape), &tape), labels, &tape));

  const auto xv = Widen(x.values());
  const auto bv = Widen(b.values());
  auto loss = [&](const std::vector<double>& wv) {
    std::size_t ho = 0;
    std::vector<double> y = RefConv(xv, wv, 1, 1, 4, 4, 2, 3, 1, 0, &ho);
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t i = 0; i < ho * ho; ++i) y[o * ho * ho + i] += bv[o];
    return RefCrossEntropy(y, 1, y.size(), labels);
  };
  ExpectRelClose(w.grad(), NumericGrad(loss, Widen(w.values()), 1e-3), 1e-2);
}

TEST(Conv2dTest, InputGradientWithStrideAndPadding) {
  Tensor x({2, 2, 5, 5}, RandomValues(100, 8), true);
  const Tensor w({3, 2, 3, 3}, RandomValues(54, 9));
  const Tensor b({3}, 0.0f);
  const std::vector<int> labels = {0, 7};
  Tape tape;
  tape.Backward(SoftmaxCrossEntropy(Flatten(Conv2d(x, w, b, {2, 1}, &tape), &tape), labels, &tape));

  const auto wv = Widen(w.values());
  auto loss = [&](const std::vector<double>& xv) {
    std::size_t ho = 0;
    const std::vector<double> y = RefConv(xv, wv, 2, 2, 5, 5, 3, 3, 2, 1, &ho);
    return RefCrossEntropy(y, 2, y.size() / 2, labels);
  };
  ExpectRelClose(x.grad(), NumericGrad(loss, Widen(x.values()), 1e-3), 1e-2);
}

TEST(Conv2dTest, GeometryErrors) {
  const Tensor b({1}, 0.0f);
  EXPECT_THROW(Conv2d(Tensor({1, 1, 2, 2}), Tensor({1, 1, 3, 3}), b, {1, 0}), ConfigError);
  EXPECT_THROW(Conv2d(Tensor({1, 1, 4, 4}), Tensor({1, 1, 3, 3}), b, {2, 0}), ConfigError);
  EXPECT_THROW(Conv2d(Tensor({1, 2, 4, 4}), Tensor({1, 1, 3, 3}), b, {1, 0}), DimensionError);
}

// ---- pooling ------------------------------------------------------------------

TEST(AvgPoolTest, MeanOfWindow) {
  const Tensor y = AvgPool2d(Tensor({1, 1, 2, 2}, std::vector<float>{1, 3, 5, 7}), 2, 2);
  EXPECT_FLOAT_EQ(y.item(), 4.0f);
}

TEST(AvgPoolTest, ConstantStaysConstant) {
  const Tensor y = AvgPool2d(Tensor({2, 3, 4, 4}, 0.7f), 2, 2);
  EXPECT_EQ(y.shape(), (Shape{2, 3, 2, 2}));
  for (float v : y.values()) EXPECT_FLOAT_EQ(v, 0.7f);
}

TEST(AvgPoolTest, BackwardSpreadsQuarter) {
  Tensor x({1, 1, 2, 2}, std::vector<float>{1, 3, 5, 7}, true);
  Tape tape;
  tape.Backward(Sum(AvgPool2d(x, 2, 2, &tape), &tape));
  EXPECT_THAT(Vec(x.grad()), ElementsAre(0.25f, 0.25f, 0.25f, 0.25f));
}

TEST(AvgPoolTest, WindowLargerThanInput) {
  EXPECT_THROW(AvgPool2d(Tensor({1, 1, 2, 2}), 3, 1), ConfigError);
}

TEST(MaxPoolTest, ForwardOnlyAndRejectsTraining) {
  const Tensor y = MaxPool2d(Tensor({1, 1, 2, 2}, std::vector<float>{1, 3, 5, 7}), 2, 2);
  EXPECT_FLOAT_EQ(y.item(), 7.0f);
  Tensor x({1, 1, 2, 2}, 1.0f, true);
  Tape tape;
  EXPECT_THROW(MaxPool2d(x, 2, 2, &tape), UsageError);
}

// ---- loss ---------------------------------------------------------------------

TEST(CrossEntropyTest, UniformLogitsGiveLnTwo) {
  EXPECT_NEAR(SoftmaxCrossEntropy(Tensor({1, 2}, 0.0f), std::vector<int>{0}).item(), std::log(2.0), 1e-6);
}

TEST(CrossEntropyTest, SaturatedLogitsAreStable) {
  const float loss = SoftmaxCrossEntropy(Tensor({1, 2}, std::vector<float>{1000, 0}), std::vector<int>{0}).item();
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, 0.0, 1e-6);
}

TEST(CrossEntropyTest, GradientMatchesFiniteDifferences) {
  Tensor logits({2, 3}, RandomValues(6, 10), true);
  const std::vector<int> labels = {2, 0};
  Tape tape;
  tape.Backward(SoftmaxCrossEntropy(logits, labels, &tape));
  ExpectRelClose(logits.grad(),
                 NumericGrad([&](const auto& v) { return RefCrossEntropy(v, 2, 3, labels); },
                             Widen(logits.values()), 1e-4),
                 1e-2);
}

TEST(CrossEntropyTest, OutOfRangeLabel) {
  EXPECT_THROW(SoftmaxCrossEntropy(Tensor({1, 3}), std::vector<int>{3}), InputError);
  EXPECT_THROW(SoftmaxCrossEntropy(Tensor({1, 3}), std::vector<int>{-1}), InputError);
}

TEST(ArgMaxTest, FirstMaximumWins) {
  EXPECT_THAT(ArgMax(Tensor({2, 3}, std::vector<float>{1, 5, 5, 0, -1, 2})), ElementsAre(1, 2));
}

TEST(OpsTest, ForwardIsDeterministic) {
  const Tensor x({2, 2, 6, 6}, RandomValues(144, 11));
  const Tensor w({4, 2, 3, 3}, RandomValues(72, 12));
  const Tensor b({4}, RandomValues(4, 13));
  const Tensor y1 = Conv2d(x, w, b, {1, 1});
  const Tensor y2 = Conv2d(x, w, b, {1, 1});
  EXPECT_THAT(Vec(y1.values()), Pointwise(::testing::Eq(), Vec(y2.values())));
}

}  // namespace
}  // namespace qsnn
