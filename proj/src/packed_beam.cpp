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

#include "redraft/packed_beam.hpp"

#include <string>

namespace redraft {

TreeMask make_tree_mask(const std::vector<int>& parents) {
  TreeMask mask;
  mask.n = parents.size();
  mask.parents = parents;
  mask.depths.assign(mask.n, 0);
  mask.allowed = BoolMatrix::Zero(static_cast<Eigen::Index>(mask.n),
                                  static_cast<Eigen::Index>(mask.n));
  for (std::size_t i = 0; i < mask.n; ++i) {
    const int p = parents[i];
    if (p >= static_cast<int>(i) || p < -1) {
      throw ContractError("tree mask: parent of node " + std::to_string(i) + " is " +
                          std::to_string(p) + "; parents must precede children");
    }
    const auto ii = static_cast<Eigen::Index>(i);
    if (p >= 0) {
      mask.depths[i] = mask.depths[static_cast<std::size_t>(p)] + 1;
      mask.allowed.row(ii) = mask.allowed.row(p);
    } else {
      mask.depths[i] = 1;
    }
    mask.allowed(ii, ii) = 1;
  }
  return mask;
}

void validate_tree_mask(const TreeMask& mask) {
  if (mask.parents.size() != mask.n || mask.depths.size() != mask.n ||
      mask.allowed.rows() != static_cast<Eigen::Index>(mask.n) ||
      mask.allowed.cols() != static_cast<Eigen::Index>(mask.n)) {
    throw ContractError("tree mask: inconsistent sizes");
  }
  const TreeMask expected = make_tree_mask(mask.parents);
  if (expected.depths != mask.depths) throw ContractError("tree mask: depths mismatch");
  if (expected.allowed != mask.allowed) throw ContractError("tree mask: not the ancestor closure");
}

PackedBeam packed_from_tree(std::vector<TokenId> tokens, std::vector<int> parents) {
  if (tokens.size() != parents.size()) throw ShapeError("packed_from_tree: size mismatch");
  PackedBeam packed;
  packed.mask = make_tree_mask(parents);
  packed.tokens = std::move(tokens);
  packed.parents = std::move(parents);
  packed.depths = packed.mask.depths;
  return packed;
}

std::vector<int> path_to(const PackedBeam& packed, int node) {
  std::vector<int> path;
  for (int cur = node; cur >= 0; cur = packed.parents[static_cast<std::size_t>(cur)]) {
    path.push_back(cur);
  }
  return {path.rbegin(), path.rend()};
}

}  // namespace redraft
