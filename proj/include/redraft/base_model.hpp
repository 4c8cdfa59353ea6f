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
#include <string>
#include <vector>

#include "redraft/numerics.hpp"
#include "redraft/packed_beam.hpp"

namespace redraft {

struct ModelConfig {
  std::size_t vocab_size = 256;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_seq_len = 512;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Per-layer keys/values for each output row of a packed forward. Held until
// commit_accepted picks the accepted path; empty for models without a cache.
struct PendingKv {
  std::vector<Matrix> keys;
  std::vector<Matrix> values;
};

struct BaseModelOutput {
  Matrix logits;  // positions x vocab
  Matrix hidden;  // positions x d_model, last-layer output fed to the drafter
  PendingKv pending;

  std::size_t rows() const { return static_cast<std::size_t>(logits.rows()); }
};

// Committed decoding context. Models without attention state leave the
// key/value buffers empty and only use `tokens`.
struct KvCache {
  std::vector<TokenId> tokens;
  std::vector<Matrix> keys;    // per layer, capacity rows
  std::vector<Matrix> values;  // per layer, capacity rows

  std::size_t committed_len() const { return tokens.size(); }
  void truncate(std::size_t n);
};

// Result of scoring a guaranteed token together with the draft tree hanging
// off it in a single pass.
struct VerifyOutput {
  Vector guaranteed_logits;
  Vector guaranteed_hidden;
  BaseModelOutput packed;
};

// The model being accelerated. Implementations are immutable after
// construction and may be shared across decode sessions.
class BaseModel {
 public:
  virtual ~BaseModel() = default;

  virtual std::string kind() const = 0;
  virtual const ModelConfig& config() const = 0;

  // Token embedding table (vocab x d_model); the drafter reuses it frozen.
  virtual const Matrix& token_embeddings() const = 0;

  virtual KvCache new_cache() const { return {}; }

  // Causal forward over `tokens` appended to the committed context. Commits
  // the new tokens to `cache`.
  virtual BaseModelOutput forward_context(std::span<const TokenId> tokens,
                                          KvCache& cache) const = 0;

  // Scores every packed draft token against the committed context plus its
  // tree ancestors. Draft token i sits at position committed_len + depth_i - 1.
  // Does not touch the cache.
  virtual BaseModelOutput forward_packed(const PackedBeam& packed, const KvCache& cache) const = 0;

  // forward_context({guaranteed}) and forward_packed(packed) fused into one
  // pass. Commits only the guaranteed token.
  virtual VerifyOutput forward_verify(TokenId guaranteed, const PackedBeam& packed,
                                      KvCache& cache) const = 0;

  // Appends the accepted root-to-node path of a verified packed beam to the
  // committed context, gathering its pending keys/values in path order.
  void commit_accepted(KvCache& cache, const PackedBeam& packed, const BaseModelOutput& verified,
                       std::span<const int> path) const;

 protected:
  void check_tokens(std::span<const TokenId> tokens) const;
  void check_capacity(std::size_t committed, std::size_t extra) const;
};

// Greedy argmax of the logits row for the last committed token.
TokenId greedy_token(const Matrix& logits, Eigen::Index row);

}  // namespace redraft
