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

#include "redraft/markov_model.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace redraft {
namespace {

ModelConfig markov_model_config(const MarkovConfig& cfg) {
  ModelConfig mc;
  mc.vocab_size = cfg.vocab_size;
  mc.d_model = cfg.d_model;
  mc.n_layers = 0;
  mc.n_heads = 1;
  mc.d_ff = 0;
  mc.max_seq_len = cfg.max_seq_len;
  return mc;
}

void check_markov(std::size_t order, const ModelConfig& cfg) {
  if (order != 1 && order != 2) {
    throw ConfigError("synthetic markov order must be 1 or 2, got " + std::to_string(order));
  }
  if (cfg.vocab_size > 256) throw ConfigError("synthetic markov vocab_size must be <= 256");
  if (cfg.d_model % order != 0) throw ConfigError("d_model must be divisible by the markov order");
  cfg.validate();
}

std::size_t table_rows(std::size_t order, std::size_t vocab) {
  return order == 1 ? vocab : vocab * vocab;
}

}  // namespace

SyntheticMarkovModel::SyntheticMarkovModel(const MarkovConfig& cfg)
    : order_(cfg.order), cfg_(markov_model_config(cfg)) {
  check_markov(order_, cfg_);
  if (!(cfg.peak > 0.5f)) throw ConfigError("markov peak must exceed 0.5");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const auto vocab = static_cast<Eigen::Index>(cfg.vocab_size);
  const auto rows = static_cast<Eigen::Index>(table_rows(order_, cfg.vocab_size));
  table_.resize(rows, vocab);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < vocab; ++c) table_(r, c) = normal(rng);
    const auto top = static_cast<Eigen::Index>(rng() % cfg.vocab_size);
    float runner_up = -1e30f;
    for (Eigen::Index c = 0; c < vocab; ++c) {
      if (c != top) runner_up = std::max(runner_up, table_(r, c));
    }
    table_(r, top) = runner_up + cfg.peak;
  }
  embed_.resize(vocab, static_cast<Eigen::Index>(cfg.d_model));
  for (Eigen::Index i = 0; i < embed_.size(); ++i) embed_.data()[i] = normal(rng);
}

SyntheticMarkovModel::SyntheticMarkovModel(std::size_t order, const ModelConfig& cfg, Matrix table,
                                           Matrix embeddings)
    : order_(order), cfg_(cfg), table_(std::move(table)), embed_(std::move(embeddings)) {
  check_markov(order_, cfg_);
  const auto rows = static_cast<Eigen::Index>(table_rows(order_, cfg_.vocab_size));
  if (table_.rows() != rows || table_.cols() != static_cast<Eigen::Index>(cfg_.vocab_size)) {
    throw ShapeError("tensor table has shape " + std::to_string(table_.rows()) + "," +
                     std::to_string(table_.cols()) + ", expected " + std::to_string(rows) + "," +
                     std::to_string(cfg_.vocab_size));
  }
  if (embed_.rows() != static_cast<Eigen::Index>(cfg_.vocab_size) ||
      embed_.cols() != static_cast<Eigen::Index>(cfg_.d_model)) {
    throw ShapeError("tensor tok_embed does not match vocab_size x d_model");
  }
}

std::size_t SyntheticMarkovModel::state_index(std::span<const TokenId> tail) const {
  std::size_t idx = 0;
  for (std::size_t slot = 0; slot < order_; ++slot) {
    // Slot 0 is the oldest of the last `order` tokens.
    const std::size_t missing = order_ - std::min(order_, tail.size());
    const TokenId tok = slot < missing ? 0 : tail[tail.size() - order_ + slot];
    idx = idx * cfg_.vocab_size + static_cast<std::size_t>(tok);
  }
  return idx;
}

void SyntheticMarkovModel::emit_row(std::span<const TokenId> tail, Matrix& logits, Matrix& hidden,
                                    Eigen::Index row) const {
  logits.row(row) = table_.row(static_cast<Eigen::Index>(state_index(tail)));
  const auto width = static_cast<Eigen::Index>(cfg_.d_model / order_);
  const std::size_t missing = order_ - std::min(order_, tail.size());
  for (std::size_t slot = 0; slot < order_; ++slot) {
    const TokenId tok = slot < missing ? 0 : tail[tail.size() - order_ + slot];
    const auto off = static_cast<Eigen::Index>(slot) * width;
    hidden.row(row).segment(off, width) = embed_.row(tok).segment(off, width);
  }
}

BaseModelOutput SyntheticMarkovModel::forward_context(std::span<const TokenId> tokens,
                                                      KvCache& cache) const {
  check_tokens(tokens);
  check_capacity(cache.committed_len(), tokens.size());
  const auto n = static_cast<Eigen::Index>(tokens.size());
  BaseModelOutput out;
  out.logits.resize(n, static_cast<Eigen::Index>(cfg_.vocab_size));
  out.hidden.resize(n, static_cast<Eigen::Index>(cfg_.d_model));
  for (Eigen::Index r = 0; r < n; ++r) {
    cache.tokens.push_back(tokens[static_cast<std::size_t>(r)]);
    const std::size_t take = std::min(order_, cache.tokens.size());
    emit_row(std::span<const TokenId>(cache.tokens).last(take), out.logits, out.hidden, r);
  }
  return out;
}

std::vector<TokenId> SyntheticMarkovModel::tail_for_node(const KvCache& cache,
                                                         const TokenId* prefix,
                                                         const PackedBeam& packed, int node) const {
  std::vector<TokenId> rev;
  for (int cur = node; cur >= 0 && rev.size() < order_;
       cur = packed.parents[static_cast<std::size_t>(cur)]) {
    rev.push_back(packed.tokens[static_cast<std::size_t>(cur)]);
  }
  if (prefix != nullptr && rev.size() < order_) rev.push_back(*prefix);
  for (auto it = cache.tokens.rbegin(); it != cache.tokens.rend() && rev.size() < order_; ++it) {
    rev.push_back(*it);
  }
  return {rev.rbegin(), rev.rend()};
}

BaseModelOutput SyntheticMarkovModel::forward_packed(const PackedBeam& packed,
                                                     const KvCache& cache) const {
  const std::size_t n = packed.size();
  if (packed.mask.n != n || packed.depths.size() != n || packed.parents.size() != n) {
    throw ShapeError("forward_packed: mask/packed size mismatch");
  }
  check_tokens(packed.tokens);
  int max_depth = 0;
  for (int d : packed.depths) max_depth = std::max(max_depth, d);
  check_capacity(cache.committed_len(), static_cast<std::size_t>(max_depth));
  BaseModelOutput out;
  out.logits.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg_.vocab_size));
  out.hidden.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg_.d_model));
  for (std::size_t a = 0; a < n; ++a) {
    const auto tail = tail_for_node(cache, nullptr, packed, static_cast<int>(a));
    emit_row(tail, out.logits, out.hidden, static_cast<Eigen::Index>(a));
  }
  return out;
}

VerifyOutput SyntheticMarkovModel::forward_verify(TokenId guaranteed, const PackedBeam& packed,
                                                  KvCache& cache) const {
  const TokenId g[] = {guaranteed};
  check_tokens(g);
  int max_depth = 0;
  for (int d : packed.depths) max_depth = std::max(max_depth, d);
  check_capacity(cache.committed_len(), 1 + static_cast<std::size_t>(max_depth));
  VerifyOutput out;
  // Packed rows are computed against the cache before the guaranteed token is
  // committed, with the guaranteed token spliced in as their common root.
  const std::size_t n = packed.size();
  check_tokens(packed.tokens);
  out.packed.logits.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg_.vocab_size));
  out.packed.hidden.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg_.d_model));
  for (std::size_t a = 0; a < n; ++a) {
    const auto tail = tail_for_node(cache, &guaranteed, packed, static_cast<int>(a));
    emit_row(tail, out.packed.logits, out.packed.hidden, static_cast<Eigen::Index>(a));
  }
  const BaseModelOutput root = forward_context(g, cache);
  out.guaranteed_logits = root.logits.row(0).transpose();
  out.guaranteed_hidden = root.hidden.row(0).transpose();
  return out;
}

SyntheticMarkovModel synthetic_markov_model(std::size_t order, std::size_t vocab_size,
                                            std::uint64_t seed, std::size_t d_model) {
  MarkovConfig cfg;
  cfg.order = order;
  cfg.vocab_size = vocab_size;
  cfg.seed = seed;
  cfg.d_model = d_model;
  return SyntheticMarkovModel(cfg);
}

}  // namespace redraft
