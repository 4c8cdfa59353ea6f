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

#include "redraft/numerics.hpp"

#include <algorithm>

namespace redraft {

TopK top_k(const Eigen::Ref<const Vector>& v, std::size_t k) {
  const auto n = static_cast<std::size_t>(v.size());
  if (k < 1 || k > n) {
    throw ShapeError("top_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&v](std::size_t a, std::size_t b) {
    const float va = v(static_cast<Eigen::Index>(a));
    const float vb = v(static_cast<Eigen::Index>(b));
    return va > vb || (va == vb && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    before);
  TopK out;
  out.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  out.values.reserve(k);
  for (auto i : out.indices) out.values.push_back(v(static_cast<Eigen::Index>(i)));
  return out;
}

float gelu(float x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  return 0.5f * x * (1.0f + std::tanh(kC * (x + 0.044715f * x * x * x)));
}

Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias, float eps) {
  if (gain.size() != x.cols() || bias.size() != x.cols()) throw ShapeError("layer_norm: width");
  Matrix out(x.rows(), x.cols());
  const float inv_n = 1.0f / static_cast<float>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    float mean = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) mean += x(r, c);
    mean *= inv_n;
    float var = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const float d = x(r, c) - mean;
      var += d * d;
    }
    var *= inv_n;
    const float inv_std = 1.0f / std::sqrt(var + eps);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      out(r, c) = (x(r, c) - mean) * inv_std * gain(c) + bias(c);
    }
  }
  return out;
}

MatrixX<std::int32_t> cumsum_rows(const MatrixX<std::int32_t>& m) {
  MatrixX<std::int32_t> out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::int32_t acc = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      acc += m(r, c);
      out(r, c) = acc;
    }
  }
  return out;
}

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite()) throw ShapeError(std::string(what) + ": non-finite value");
}

}  // namespace redraft
