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

#include <cstdint>
#include <vector>

#include "redraft/base_model.hpp"

namespace redraft {

struct MarkovConfig {
  std::size_t order = 2;
  std::size_t vocab_size = 32;
  std::size_t d_model = 32;
  std::size_t max_seq_len = 512;
  // Logit gap between the chosen top-1 token and the best runner-up.
  float peak = 5.0f;
  std::uint64_t seed = 0;
};

// Deterministic finite-state base model: next-token logits are a seeded
// random table indexed by the last `order` tokens; the hidden state is the
// concatenation of per-slot slices of fixed token embeddings. Missing history
// at the start of a sequence reads as token 0.
class SyntheticMarkovModel final : public BaseModel {
 public:
  explicit SyntheticMarkovModel(const MarkovConfig& cfg);
  SyntheticMarkovModel(std::size_t order, const ModelConfig& cfg, Matrix table, Matrix embeddings);

  std::string kind() const override { return "markov"; }
  const ModelConfig& config() const override { return cfg_; }
  const Matrix& token_embeddings() const override { return embed_; }
  std::size_t order() const { return order_; }
  const Matrix& table() const { return table_; }

  // Table row for a history tail (oldest first); shorter tails pad with 0.
  std::size_t state_index(std::span<const TokenId> tail) const;

  BaseModelOutput forward_context(std::span<const TokenId> tokens, KvCache& cache) const override;
  BaseModelOutput forward_packed(const PackedBeam& packed, const KvCache& cache) const override;
  VerifyOutput forward_verify(TokenId guaranteed, const PackedBeam& packed,
                              KvCache& cache) const override;

 private:
  void emit_row(std::span<const TokenId> tail, Matrix& logits, Matrix& hidden, Eigen::Index row) const;
  // Last `order` tokens of committed context + (optional prefix token) + tree path to node.
  std::vector<TokenId> tail_for_node(const KvCache& cache, const TokenId* prefix,
                                     const PackedBeam& packed, int node) const;

  std::size_t order_;
  ModelConfig cfg_;
  Matrix table_;  // vocab^order x vocab
  Matrix embed_;  // vocab x d_model
};

// Seeded order-1/2 synthetic base model (vocab <= 256).
SyntheticMarkovModel synthetic_markov_model(std::size_t order, std::size_t vocab_size,
                                            std::uint64_t seed, std::size_t d_model = 32);

}  // namespace redraft
