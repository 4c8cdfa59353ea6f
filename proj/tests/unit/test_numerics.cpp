/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The redraft Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "redraft/numerics.hpp"

namespace redraft {
namespace {

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, float scale = 3.0f) {
  std::normal_distribution<float> dist(0.0f, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  Matrix a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(matmul(Matrix(Matrix::Identity(2, 2)), a), a);
}

TEST(Matmul, HandCheckedProduct) {
  Matrix a(2, 2), b(2, 1), want(2, 1);
  a << 1, 2, 3, 4;
  b << 1, 1;
  want << 3, 7;
  EXPECT_EQ(matmul(a, b), want);
}

TEST(Matmul, BitwiseEqualToNaiveTripleLoop) {
  std::mt19937_64 rng(11);
  for (int size : {1, 3, 8, 17, 33}) {
    const Matrix a = Matrix::NullaryExpr(size, size + 2, [&] { return std::normal_distribution<float>()(rng); });
    const Matrix b = Matrix::NullaryExpr(size + 2, size, [&] { return std::normal_distribution<float>()(rng); });
    const Matrix got = matmul(a, b);
    const Matrix want = oracle::naive_matmul(a, b);
    ASSERT_EQ(std::memcmp(got.data(), want.data(), sizeof(float) * static_cast<std::size_t>(got.size())), 0)
        << "size " << size;
  }
}

TEST(Matmul, RowComputedAloneMatchesBatch) {
  std::mt19937_64 rng(5);
  const Matrix a = Matrix::NullaryExpr(6, 40, [&] { return std::normal_distribution<float>()(rng); });
  const Matrix b = Matrix::NullaryExpr(40, 24, [&] { return std::normal_distribution<float>()(rng); });
  const Matrix all = matmul(a, b);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const Matrix one = matmul(Matrix(a.row(r)), b);
    EXPECT_EQ(one.row(0), all.row(r));
  }
}

TEST(Matmul, DimensionMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST(LogSoftmax, UniformInput) {
  const Vector out = log_softmax(Vector::Zero(4));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(out(i), std::log(0.25f), 1e-7f);
}

TEST(LogSoftmax, LargeLogitsDoNotOverflow) {
  Vector v(2);
  v << 1000.0f, 0.0f;
  const Vector out = log_softmax(v);
  ASSERT_TRUE(out.allFinite());
  EXPECT_NEAR(out(0), 0.0f, 1e-6f);
  EXPECT_NEAR(out(1), -1000.0f, 1e-3f);
}

TEST(LogSoftmax, MatchesExtendedPrecisionAndNormalises) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector v = random_vector(rng, 16);
    const Vector out = log_softmax(v);
    const auto want = oracle::log_softmax64(v);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      // A few float ulps of the result's own magnitude.
      const double w = want[static_cast<std::size_t>(i)];
      EXPECT_NEAR(out(i), w, 1e-6 * std::max(1.0, std::abs(w)));
    }
    EXPECT_NEAR(out.array().exp().sum(), 1.0f, 1e-6f);
  }
}

TEST(LogSoftmax, EmptyThrows) { EXPECT_THROW(log_softmax(Vector(0)), ShapeError); }

TEST(Argmax, PicksMaximum) {
  Vector v(3);
  v << 1, 3, 2;
  EXPECT_EQ(argmax_tie_low(v), 1u);
}

TEST(Argmax, TiesGoLow) {
  EXPECT_EQ(argmax_tie_low(Vector::Constant(3, 5.0f)), 0u);
}

TEST(Argmax, EmptyThrows) { EXPECT_THROW(argmax_tie_low(Vector(0)), ShapeError); }

TEST(Argmax, MatchesLinearScanWithDuplicatesAndIsShiftInvariant) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    Vector v = random_vector(rng, 1 + static_cast<Eigen::Index>(rng() % 20));
    // Inject duplicates of the maximum at random positions.
    const float mx = v.maxCoeff();
    for (int d = 0; d < 3; ++d) v(static_cast<Eigen::Index>(rng() % static_cast<unsigned>(v.size()))) = mx;
    EXPECT_EQ(argmax_tie_low(v), oracle::linear_argmax(v));
    const Vector shifted = (v.array() + 0.5f).matrix();
    EXPECT_EQ(argmax_tie_low(shifted), argmax_tie_low(v));
  }
}

TEST(TopK, TieResolution) {
  Vector v(4);
  v << 1, 4, 2, 4;
  const TopK t = top_k(v, 2);
  EXPECT_EQ(t.indices, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(t.values, (std::vector<float>{4, 4}));
}

TEST(TopK, FullSort) {
  Vector v(5);
  v << 3, 1, 4, 1, 5;
  EXPECT_EQ(top_k(v, 5).indices, (std::vector<std::size_t>{4, 2, 0, 1, 3}));
}

TEST(TopK, OutOfRangeThrows) {
  EXPECT_THROW(top_k(Vector::Zero(3), 0), ShapeError);
  EXPECT_THROW(top_k(Vector::Zero(3), 4), ShapeError);
}

TEST(TopK, MatchesFullSortOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + static_cast<Eigen::Index>(rng() % 24);
    Vector v(n);
    // Small integer range forces ties.
    for (Eigen::Index i = 0; i < n; ++i) v(i) = static_cast<float>(rng() % 5);
    const std::size_t k = 1 + rng() % static_cast<std::size_t>(n);
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return v(static_cast<Eigen::Index>(a)) > v(static_cast<Eigen::Index>(b));
    });
    order.resize(k);
    const TopK got = top_k(v, k);
    ASSERT_EQ(got.indices, order);
    if (k >= 1) {
      EXPECT_EQ(top_k(v, 1).indices[0], argmax_tie_low(v));
    }
  }
}

TEST(Silu, GradientMatchesFiniteDifference) {
  for (double x : {-4.0, -1.0, 0.0, 0.3, 2.5}) {
    const double eps = 1e-6;
    const double fd = (silu(x + eps) - silu(x - eps)) / (2 * eps);
    EXPECT_NEAR(silu_grad(x), fd, 1e-8);
  }
}

}  // namespace
}  // namespace redraft
