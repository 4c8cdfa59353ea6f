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

#include "redraft/base_model.hpp"

#include <string>

namespace redraft {

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) + ") not divisible by n_heads (" +
                      std::to_string(n_heads) + ")");
  }
}

void KvCache::truncate(std::size_t n) {
  if (n > tokens.size()) throw ContractError("truncate beyond committed length");
  tokens.resize(n);
  // Rows past n are dead; zero them so nothing speculative lingers.
  for (auto* buffers : {&keys, &values}) {
    for (auto& m : *buffers) {
      const auto from = static_cast<Eigen::Index>(n);
      if (from < m.rows()) m.bottomRows(m.rows() - from).setZero();
    }
  }
}

void BaseModel::commit_accepted(KvCache& cache, const PackedBeam& packed,
                                const BaseModelOutput& verified, std::span<const int> path) const {
  if (verified.rows() != packed.size()) {
    throw ShapeError("commit_accepted: verified rows do not match packed beam");
  }
  int expected_parent = -1;
  for (int node : path) {
    if (node < 0 || static_cast<std::size_t>(node) >= packed.size() ||
        packed.parents[static_cast<std::size_t>(node)] != expected_parent) {
      throw ContractError("commit_accepted: positions do not form a root-to-node path");
    }
    expected_parent = node;
  }
  check_capacity(cache.committed_len(), path.size());
  const bool has_kv = !verified.pending.keys.empty();
  if (has_kv && cache.keys.size() != verified.pending.keys.size()) {
    throw ShapeError("commit_accepted: layer count mismatch");
  }
  for (int node : path) {
    const auto row = static_cast<Eigen::Index>(cache.committed_len());
    if (has_kv) {
      for (std::size_t l = 0; l < cache.keys.size(); ++l) {
        cache.keys[l].row(row) = verified.pending.keys[l].row(node);
        cache.values[l].row(row) = verified.pending.values[l].row(node);
      }
    }
    cache.tokens.push_back(packed.tokens[static_cast<std::size_t>(node)]);
  }
}

void BaseModel::check_tokens(std::span<const TokenId> tokens) const {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= config().vocab_size) {
      throw VocabError("token " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(config().vocab_size));
    }
  }
}

void BaseModel::check_capacity(std::size_t committed, std::size_t extra) const {
  if (committed + extra > config().max_seq_len) {
    throw CapacityError("sequence of " + std::to_string(committed + extra) +
                        " tokens exceeds max_seq_len " + std::to_string(config().max_seq_len));
  }
}

TokenId greedy_token(const Matrix& logits, Eigen::Index row) {
  return static_cast<TokenId>(argmax_tie_low(logits.row(row).transpose()));
}

}  // namespace redraft
