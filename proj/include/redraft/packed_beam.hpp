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

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "redraft/numerics.hpp"

namespace redraft {

using BoolMatrix = MatrixX<std::uint8_t>;
using IndexMatrix = MatrixX<std::int32_t>;

// Attention pattern among packed draft tokens. Parent -1 is the guaranteed
// token; depth counts from it (children of the guaranteed token have depth 1).
struct TreeMask {
  std::size_t n = 0;
  BoolMatrix allowed;
  std::vector<int> depths;
  std::vector<int> parents;
};

// Ancestor closure of a parent forest. Parents must precede children.
TreeMask make_tree_mask(const std::vector<int>& parents);

// Throws ContractError if the mask is not the ancestor closure of its parents
// or depths are inconsistent.
void validate_tree_mask(const TreeMask& mask);

// Deduplicated, flattened draft tokens sent to the base model.
struct PackedBeam {
  std::vector<TokenId> tokens;
  std::vector<int> parents;
  std::vector<int> depths;
  // (candidate, position) that first owned each flat entry.
  std::vector<std::pair<int, int>> owner;
  // beam_width x beam_length map from (candidate, position) to flat index.
  IndexMatrix candidate_node;
  TreeMask mask;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

// Builds a PackedBeam from an explicit tree (no candidate bookkeeping).
PackedBeam packed_from_tree(std::vector<TokenId> tokens, std::vector<int> parents);

// Root-to-node chain of flat indices ending at `node` (inclusive).
std::vector<int> path_to(const PackedBeam& packed, int node);

}  // namespace redraft
