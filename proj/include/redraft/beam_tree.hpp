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
#include <span>
#include <vector>

#include "redraft/drafter.hpp"
#include "redraft/packed_beam.hpp"

namespace redraft {

// Drafter beam search result. Rows are sorted by cumulative log-probability,
// descending; every row has exactly `length()` tokens.
struct Beam {
  IndexMatrix tokens;  // beam_width x beam_length
  std::vector<float> logp;
  // State whose head scored each candidate's final token.
  std::vector<DrafterState> states;

  std::size_t width() const { return static_cast<std::size_t>(tokens.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(tokens.cols()); }
};

// table(i, j) == k: k is the smallest candidate with tokens[k][0..j] ==
// tokens[i][0..j].
struct PrefixTree {
  IndexMatrix table;
};

// Beam search over drafter log-probabilities. Every hypothesis is expanded
// with the whole vocabulary and scored by cumulative log-probability; the top
// `width` survive, ties going to the lower flat (hypothesis * vocab + token)
// index.
Beam beam_search(const DraftModel& drafter, std::span<const TokenId> context, const Vector& h,
                 TokenId last_token, std::size_t width, std::size_t length);

// Tensor formulation of shared-prefix detection for fixed-length candidates:
//   matches[i][k][j]     = tokens[i][j] == tokens[k][j]
//   seq_matches[i][k][j] = cumsum_j(matches[i][k]) == j + 1
//   table[i][j]          = first k with seq_matches[i][k][j]
PrefixTree dedup_prefix(const IndexMatrix& beam_tokens);

// Keeps only first-owner tokens (table(i, j) == i) in candidate-major order and
// builds parent links and the ancestor-closure mask.
PackedBeam pack_beam(const IndexMatrix& beam_tokens, const PrefixTree& prefix_tree);
inline PackedBeam pack_beam(const Beam& beam, const PrefixTree& prefix_tree) {
  return pack_beam(beam.tokens, prefix_tree);
}

// Reads every candidate's root-to-leaf path back out of the packed beam.
IndexMatrix unpack_beam(const PackedBeam& packed);

// Raw beam tokens over packed tokens (1 for an empty beam).
double compression_ratio(const IndexMatrix& beam_tokens, const PackedBeam& packed);
inline double compression_ratio(const Beam& beam, const PackedBeam& packed) {
  return compression_ratio(beam.tokens, packed);
}

}  // namespace redraft
