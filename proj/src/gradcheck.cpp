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

#include "redraft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace redraft {

GradCheckInstance random_gradcheck_instance(std::uint64_t seed, std::size_t horizon, std::size_t vocab,
                                            std::size_t state_dim, std::size_t hidden_dim,
                                            std::size_t mlp_layers) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const DrafterDims dims{vocab, hidden_dim, state_dim, state_dim, mlp_layers};
  GradCheckInstance inst;
  inst.params = init_drafter_params(dims, seed, 0.1f).cast<double>();
  inst.embeddings = MatrixD(static_cast<Eigen::Index>(vocab), static_cast<Eigen::Index>(state_dim));
  for (Eigen::Index i = 0; i < inst.embeddings.size(); ++i) inst.embeddings.data()[i] = normal(rng);
  VectorD h(static_cast<Eigen::Index>(hidden_dim));
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = normal(rng);
  inst.state0 = init_state(h, static_cast<TokenId>(rng() % vocab), inst.embeddings);
  for (std::size_t k = 0; k < horizon; ++k) inst.teacher.push_back(static_cast<TokenId>(rng() % vocab));
  return inst;
}

GradCheckResult finite_difference_check(GradCheckInstance inst, double eps) {
  const auto analytic = backward<double>(inst.teacher, inst.state0, inst.params, inst.embeddings);
  std::vector<std::vector<double>> grads;
  analytic.grad.for_each_tensor([&](const std::string&, const double* data, Eigen::Index n) {
    grads.emplace_back(data, data + n);
  });
  auto loss = [&] { return sequence_loss<double>(inst.teacher, inst.state0, inst.params, inst.embeddings); };

  GradCheckResult result;
  std::size_t tensor = 0;
  inst.params.for_each_tensor([&](const std::string& name, double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = loss();
      data[i] = saved - eps;
      const double down = loss();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = grads[tensor][static_cast<std::size_t>(i)];
      const double diff = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double rel = diff / std::max(scale, kRelErrorFloor);
      result.max_abs_error = std::max(result.max_abs_error, diff);
      if (scale > 0.0) result.max_strict_rel_error = std::max(result.max_strict_rel_error, diff / scale);
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_coordinate = name + "[" + std::to_string(i) + "]";
      }
      ++result.coordinates;
    }
    ++tensor;
  });
  return result;
}

}  // namespace redraft
