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

// Central finite-difference check of the analytic drafter gradient, run
// entirely in double precision. Training jobs run it as a precondition.

#include <cstdint>
#include <string>
#include <vector>

#include "redraft/drafter.hpp"

namespace redraft {

struct GradCheckInstance {
  DrafterParamsT<double> params;
  MatrixD embeddings;
  DrafterStateT<double> state0;
  std::vector<TokenId> teacher;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_strict_rel_error = 0.0;  // without the magnitude floor
  double max_abs_error = 0.0;
  std::string worst_coordinate;
  std::size_t coordinates = 0;
};

// Coordinates smaller than this are compared against it instead of their own
// magnitude. Central differences carry an O(eps^2) truncation error, so a pure
// ratio on tiny coordinates measures the oracle's error, not the gradient's.
inline constexpr double kRelErrorFloor = 1e-4;

// Random parameters (std 0.1), N(0,1) embeddings and hidden state, uniform
// teacher tokens.
GradCheckInstance random_gradcheck_instance(std::uint64_t seed, std::size_t horizon, std::size_t vocab = 11,
                                            std::size_t state_dim = 6, std::size_t hidden_dim = 5,
                                            std::size_t mlp_layers = 2);

// Relative error per coordinate is |a - n| / max(|a|, |n|, kRelErrorFloor).
GradCheckResult finite_difference_check(GradCheckInstance instance, double eps = 1e-3);

}  // namespace redraft
