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

struct TransformerLayer {
  Vector ln1_gain, ln1_bias;
  Matrix wq, wk, wv, wo;  // d_model x d_model, applied as x * W
  Vector bq, bk, bv, bo;
  Vector ln2_gain, ln2_bias;
  Matrix w1;  // d_model x d_ff
  Vector b1;
  Matrix w2;  // d_ff x d_model
  Vector b2;
};

struct TransformerWeights {
  Matrix tok_embed;  // vocab x d_model
  std::vector<TransformerLayer> layers;
  Vector lnf_gain, lnf_bias;
  Matrix lm_head;  // d_model x vocab
};

TransformerWeights random_transformer_weights(const ModelConfig& cfg, std::uint64_t seed);

// Throws ShapeError naming the first tensor whose shape disagrees with cfg.
void check_transformer_shapes(const ModelConfig& cfg, const TransformerWeights& w);

// Pre-layernorm causal transformer with GELU MLPs and sinusoidal absolute
// positions. Every row of a forward is computed independently with
// fixed-order kernels, so causal, incremental and tree-masked forwards agree
// bitwise whenever a token sees the same keys at the same position.
class TinyTransformer final : public BaseModel {
 public:
  TinyTransformer(ModelConfig cfg, TransformerWeights weights);

  static TinyTransformer random(const ModelConfig& cfg, std::uint64_t seed) {
    return {cfg, random_transformer_weights(cfg, seed)};
  }

  std::string kind() const override { return "transformer"; }
  const ModelConfig& config() const override { return cfg_; }
  const Matrix& token_embeddings() const override { return w_.tok_embed; }
  const TransformerWeights& weights() const { return w_; }

  KvCache new_cache() const override;
  BaseModelOutput forward_context(std::span<const TokenId> tokens, KvCache& cache) const override;
  BaseModelOutput forward_packed(const PackedBeam& packed, const KvCache& cache) const override;
  VerifyOutput forward_verify(TokenId guaranteed, const PackedBeam& packed,
                              KvCache& cache) const override;

 private:
  // visible[r] lists the in-batch rows row r attends to, ascending; every row
  // also attends to the whole committed context first.
  BaseModelOutput run(std::span<const TokenId> tokens, std::span<const std::size_t> positions,
                      const std::vector<std::vector<int>>& visible, const KvCache& cache) const;
  void ensure_buffers(KvCache& cache) const;
  void store_rows(KvCache& cache, const PendingKv& kv, Eigen::Index first_row,
                  Eigen::Index count) const;

  ModelConfig cfg_;
  TransformerWeights w_;
  Matrix position_table_;
};

}  // namespace redraft
