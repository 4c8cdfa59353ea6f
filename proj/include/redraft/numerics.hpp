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

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "redraft/errors.hpp"

namespace redraft {

using TokenId = std::int32_t;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Inference tensors are single precision; double is used for shadow
// evaluation in gradient checks.
using Matrix = MatrixX<float>;
using Vector = VectorX<float>;
using MatrixD = MatrixX<double>;
using VectorD = VectorX<double>;

struct TopK {
  std::vector<std::size_t> indices;
  std::vector<float> values;
};

// Fixed-order product: c[i][j] accumulates a[i][k] * b[k][j] for ascending k
// in the storage scalar. Each output row depends only on the matching input
// row, so a row computed alone is bitwise equal to the same row computed in
// a batch.
template <typename Scalar>
MatrixX<Scalar> matmul(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const Eigen::Index n = a.rows(), inner = a.cols(), m = b.cols();
  MatrixX<Scalar> c = MatrixX<Scalar>::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar* out = c.data() + i * m;
    const Scalar* arow = a.data() + i * inner;
    for (Eigen::Index k = 0; k < inner; ++k) {
      const Scalar aik = arow[k];
      const Scalar* brow = b.data() + k * m;
      for (Eigen::Index j = 0; j < m; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

// Stabilised log-softmax (max subtraction, ascending-order sum).
template <typename Derived>
VectorX<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw ShapeError("log_softmax: empty vector");
  const Scalar mx = v.maxCoeff();
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) sum += std::exp(v(i) - mx);
  // Subtracting the max first keeps the dominant entry exact; folding it into
  // the normalizer would round away low bits when the logits are large.
  const Scalar log_sum = std::log(sum);
  VectorX<Scalar> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = (v(i) - mx) - log_sum;
  return out;
}

template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  return log_softmax(v).array().exp().matrix();
}

// Index of the maximum; ties resolve to the lowest index.
template <typename Derived>
std::size_t argmax_tie_low(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw ShapeError("argmax_tie_low: empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<std::size_t>(best);
}

// Gap between the largest and second largest entry (infinity for size 1).
template <typename Derived>
typename Derived::Scalar top2_margin(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  Scalar first = -std::numeric_limits<Scalar>::infinity();
  Scalar second = first;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) > first) {
      second = first;
      first = v(i);
    } else if (v(i) > second) {
      second = v(i);
    }
  }
  return first - second;
}

// k largest entries sorted by value descending, then index ascending.
TopK top_k(const Eigen::Ref<const Vector>& v, std::size_t k);

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
Scalar silu(Scalar x) {
  return x / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
Scalar silu_grad(Scalar x) {
  const Scalar sig = Scalar(1) / (Scalar(1) + std::exp(-x));
  return sig * (Scalar(1) + x * (Scalar(1) - sig));
}

template <typename Derived>
VectorX<typename Derived::Scalar> silu(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  return v.unaryExpr([](Scalar x) { return silu(x); });
}

float gelu(float x);

// Row-wise layer norm with fixed-order reductions.
Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias, float eps = 1e-5f);

// Row-wise cumulative sum along columns.
MatrixX<std::int32_t> cumsum_rows(const MatrixX<std::int32_t>& m);

// Throws ShapeError unless every entry is finite.
void require_finite(const Eigen::Ref<const Matrix>& m, const char* what);

}  // namespace redraft
