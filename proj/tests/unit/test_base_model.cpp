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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "redraft/beam_tree.hpp"
#include "redraft/markov_model.hpp"
#include "redraft/transformer.hpp"

namespace redraft {
namespace {

using testing::max_abs_diff;
using testing::random_tokens;
using testing::small_transformer_config;

constexpr float kTol = 1e-5f;

// Logits of every position of `tokens` computed in one causal forward.
BaseModelOutput replay(const BaseModel& model, std::span<const TokenId> tokens) {
  KvCache cache = model.new_cache();
  return model.forward_context(tokens, cache);
}

TEST(ModelConfig, RejectsInvalid) {
  ModelConfig cfg;
  cfg.n_heads = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.vocab_size = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(ModelConfig{}.validate());
}

TEST(Transformer, SingleTokenShape) {
  const auto model = TinyTransformer::random(ModelConfig{}, 1);
  KvCache cache = model.new_cache();
  const TokenId tok[] = {7};
  const auto out = model.forward_context(tok, cache);
  EXPECT_EQ(out.logits.rows(), 1);
  EXPECT_EQ(out.logits.cols(), 256);
  EXPECT_EQ(out.hidden.cols(), 64);
  EXPECT_EQ(cache.committed_len(), 1u);
}

TEST(Transformer, IncrementalEqualsBatch) {
  const auto model = TinyTransformer::random(small_transformer_config(), 2);
  const std::vector<TokenId> both = {5, 9};
  const auto batch = replay(model, both);
  KvCache cache = model.new_cache();
  const auto first = model.forward_context(std::span(both).first(1), cache);
  const auto second = model.forward_context(std::span(both).last(1), cache);
  EXPECT_LT(max_abs_diff(first.logits.row(0), batch.logits.row(0)), kTol);
  EXPECT_LT(max_abs_diff(second.logits.row(0), batch.logits.row(1)), kTol);
  // Row-independent kernels make this exact.
  EXPECT_EQ(second.logits.row(0), batch.logits.row(1));
}

TEST(Transformer, CachedForwardMatchesRecomputation) {
  const auto model = TinyTransformer::random(small_transformer_config(), 3);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto tokens = random_tokens(rng, 1 + rng() % 32, 64);
    const auto full = replay(model, tokens);
    KvCache cache = model.new_cache();
    std::size_t done = 0;
    while (done < tokens.size()) {
      const std::size_t chunk = std::min<std::size_t>(1 + rng() % 5, tokens.size() - done);
      const auto out = model.forward_context(std::span(tokens).subspan(done, chunk), cache);
      EXPECT_LT(max_abs_diff(out.logits, full.logits.middleRows(static_cast<Eigen::Index>(done),
                                                                 static_cast<Eigen::Index>(chunk))),
                kTol);
      done += chunk;
    }
  }
}

TEST(Transformer, SameSeedIsBitwiseDeterministic) {
  const auto a = TinyTransformer::random(small_transformer_config(), 9);
  const auto b = TinyTransformer::random(small_transformer_config(), 9);
  const std::vector<TokenId> t = {1, 2, 3, 4};
  EXPECT_EQ(replay(a, t).logits, replay(b, t).logits);
}

TEST(Transformer, CapacityOverflowThrows) {
  auto cfg = small_transformer_config();
  cfg.max_seq_len = 4;
  const auto model = TinyTransformer::random(cfg, 1);
  KvCache cache = model.new_cache();
  const std::vector<TokenId> t(5, 1);
  EXPECT_THROW(model.forward_context(t, cache), CapacityError);
}

TEST(Transformer, OutOfVocabThrows) {
  const auto model = TinyTransformer::random(small_transformer_config(), 1);
  KvCache cache = model.new_cache();
  const TokenId bad[] = {64};
  EXPECT_THROW(model.forward_context(bad, cache), VocabError);
}

TEST(ForwardPacked, LinearChainEqualsCausalDecoding) {
  const auto model = TinyTransformer::random(small_transformer_config(), 5);
  const std::vector<TokenId> prompt = {3, 14, 15, 9};
  const std::vector<TokenId> chain = {2, 6, 5, 3, 5};
  KvCache cache = model.new_cache();
  model.forward_context(prompt, cache);
  const auto packed = packed_from_tree(chain, {-1, 0, 1, 2, 3});
  const auto got = model.forward_packed(packed, cache);

  KvCache causal = model.new_cache();
  model.forward_context(prompt, causal);
  const auto want = model.forward_context(chain, causal);
  EXPECT_LT(max_abs_diff(got.logits, want.logits), kTol);
  EXPECT_EQ(got.logits, want.logits);
  EXPECT_EQ(got.hidden, want.hidden);
}

TEST(ForwardPacked, DisjointCandidatesMatchIndependentReplays) {
  const auto model = TinyTransformer::random(small_transformer_config(), 6);
  const std::vector<TokenId> prompt = {1, 2, 3};
  IndexMatrix beam(2, 3);
  beam << 10, 11, 12, 20, 21, 22;
  const auto packed = pack_beam(beam, dedup_prefix(beam));
  ASSERT_EQ(packed.size(), 6u);
  KvCache cache = model.new_cache();
  model.forward_context(prompt, cache);
  const auto got = model.forward_packed(packed, cache);
  for (Eigen::Index i = 0; i < 2; ++i) {
    std::vector<TokenId> path(prompt);
    for (Eigen::Index j = 0; j < 3; ++j) path.push_back(beam(i, j));
    const auto want = replay(model, path);
    for (Eigen::Index j = 0; j < 3; ++j) {
      const auto node = packed.candidate_node(i, j);
      EXPECT_LT(max_abs_diff(got.logits.row(node), want.logits.row(3 + j)), kTol);
    }
  }
}

TEST(ForwardPacked, EmptyBeamGivesEmptyOutput) {
  const auto model = TinyTransformer::random(small_transformer_config(), 1);
  KvCache cache = model.new_cache();
  const TokenId t[] = {1};
  model.forward_context(t, cache);
  const auto out = model.forward_packed(packed_from_tree({}, {}), cache);
  EXPECT_EQ(out.rows(), 0u);
}

TEST(ForwardPacked, LeavesCacheUntouched) {
  const auto model = TinyTransformer::random(small_transformer_config(), 1);
  KvCache cache = model.new_cache();
  const std::vector<TokenId> prompt = {1, 2, 3};
  model.forward_context(prompt, cache);
  const KvCache before = cache;
  model.forward_packed(packed_from_tree({4, 5, 6}, {-1, 0, 0}), cache);
  EXPECT_EQ(cache.tokens, before.tokens);
  for (std::size_t l = 0; l < cache.keys.size(); ++l) {
    EXPECT_EQ(cache.keys[l], before.keys[l]);
    EXPECT_EQ(cache.values[l], before.values[l]);
  }
}

TEST(ForwardPacked, MaskSizeMismatchThrows) {
  const auto model = TinyTransformer::random(small_transformer_config(), 1);
  KvCache cache = model.new_cache();
  auto packed = packed_from_tree({4, 5}, {-1, 0});
  packed.mask = make_tree_mask({-1});
  EXPECT_THROW(model.forward_packed(packed, cache), ShapeError);
}

// Tree-mask soundness on random beams for both model kinds.
void check_tree_soundness(const BaseModel& model, std::uint64_t seed, int trials) {
  std::mt19937_64 rng(seed);
  const std::size_t vocab = model.config().vocab_size;
  for (int trial = 0; trial < trials; ++trial) {
    const auto prompt = random_tokens(rng, 1 + rng() % 12, vocab);
    // Tokens from a tiny alphabet so candidates share prefixes.
    IndexMatrix beam = oracle::random_beam(rng, 8, 6, 3);
    beam = beam.unaryExpr([&](std::int32_t t) { return static_cast<std::int32_t>((t * 7 + 1) % vocab); });
    const auto packed = pack_beam(beam, dedup_prefix(beam));
    KvCache cache = model.new_cache();
    model.forward_context(prompt, cache);
    const auto got = model.forward_packed(packed, cache);
    for (Eigen::Index i = 0; i < beam.rows(); ++i) {
      std::vector<TokenId> path(prompt);
      for (Eigen::Index j = 0; j < beam.cols(); ++j) path.push_back(beam(i, j));
      const auto want = replay(model, path);
      for (Eigen::Index j = 0; j < beam.cols(); ++j) {
        const auto node = packed.candidate_node(i, j);
        ASSERT_LT(max_abs_diff(got.logits.row(node), want.logits.row(static_cast<Eigen::Index>(prompt.size()) + j)),
                  kTol)
            << "trial " << trial << " candidate " << i << " position " << j;
      }
    }
  }
}

TEST(ForwardPacked, TreeMaskSoundnessTransformer) {
  check_tree_soundness(TinyTransformer::random(small_transformer_config(), 8), 80, 40);
}

TEST(ForwardPacked, TreeMaskSoundnessMarkov) {
  check_tree_soundness(synthetic_markov_model(2, 32, 3), 81, 100);
}

TEST(ForwardVerify, EqualsCommitThenPacked) {
  for (int kind = 0; kind < 2; ++kind) {
    std::unique_ptr<BaseModel> model;
    if (kind == 0) {
      model = std::make_unique<TinyTransformer>(TinyTransformer::random(small_transformer_config(), 4));
    } else {
      model = std::make_unique<SyntheticMarkovModel>(synthetic_markov_model(2, 32, 4));
    }
    const std::vector<TokenId> prompt = {1, 2, 3, 4};
    const auto packed = packed_from_tree({5, 6, 7, 8}, {-1, 0, 0, 2});
    KvCache fused = model->new_cache();
    model->forward_context(prompt, fused);
    const auto got = model->forward_verify(9, packed, fused);

    KvCache split = model->new_cache();
    model->forward_context(prompt, split);
    const TokenId g[] = {9};
    const auto root = model->forward_context(g, split);
    const auto want = model->forward_packed(packed, split);
    EXPECT_EQ(fused.tokens, split.tokens);
    EXPECT_EQ(got.guaranteed_logits, Vector(root.logits.row(0).transpose()));
    EXPECT_EQ(got.packed.logits, want.logits);
    EXPECT_EQ(got.packed.hidden, want.hidden);
  }
}

TEST(CommitAccepted, ZeroAcceptanceKeepsOnlyGuaranteedToken) {
  const auto model = TinyTransformer::random(small_transformer_config(), 3);
  KvCache cache = model.new_cache();
  const std::vector<TokenId> prompt = {1, 2};
  model.forward_context(prompt, cache);
  const auto packed = packed_from_tree({4, 5}, {-1, 0});
  const auto v = model.forward_verify(3, packed, cache);
  model.commit_accepted(cache, packed, v.packed, {});
  EXPECT_EQ(cache.tokens, (std::vector<TokenId>{1, 2, 3}));
}

TEST(CommitAccepted, FullPathThenForwardMatchesRecomputation) {
  const auto model = TinyTransformer::random(small_transformer_config(), 12);
  IndexMatrix beam(3, 5);
  beam << 1, 2, 3, 4, 5, 1, 2, 9, 9, 9, 7, 7, 7, 7, 7;
  const auto packed = pack_beam(beam, dedup_prefix(beam));
  const std::vector<TokenId> prompt = {30, 31, 32};
  KvCache cache = model.new_cache();
  model.forward_context(prompt, cache);
  const auto v = model.forward_verify(40, packed, cache);
  std::vector<int> path;
  for (Eigen::Index j = 0; j < 5; ++j) path.push_back(packed.candidate_node(1, j));
  model.commit_accepted(cache, packed, v.packed, path);
  ASSERT_EQ(cache.committed_len(), 3u + 1u + 5u);
  const TokenId next[] = {11};
  const auto got = model.forward_context(next, cache);

  const std::vector<TokenId> all = {30, 31, 32, 40, 1, 2, 9, 9, 9, 11};
  const auto want = replay(model, all);
  EXPECT_LT(max_abs_diff(got.logits.row(0), want.logits.row(9)), kTol);
}

TEST(CommitAccepted, PartialPathGrowsByPathLength) {
  const auto model = TinyTransformer::random(small_transformer_config(), 12);
  IndexMatrix beam(4, 3);
  beam << 1, 2, 3, 1, 2, 4, 1, 5, 6, 7, 8, 9;
  const auto packed = pack_beam(beam, dedup_prefix(beam));
  KvCache cache = model.new_cache();
  const TokenId p[] = {1};
  model.forward_context(p, cache);
  const auto v = model.forward_verify(2, packed, cache);
  const std::size_t before = cache.committed_len();
  const std::vector<int> path = {packed.candidate_node(2, 0), packed.candidate_node(2, 1)};
  model.commit_accepted(cache, packed, v.packed, path);
  EXPECT_EQ(cache.committed_len(), before + 2);
}

TEST(CommitAccepted, NonPathRejected) {
  const auto model = synthetic_markov_model(1, 16, 1);
  KvCache cache = model.new_cache();
  const TokenId p[] = {1};
  model.forward_context(p, cache);
  const auto packed = packed_from_tree({4, 5, 6}, {-1, 0, 0});
  const auto v = model.forward_verify(2, packed, cache);
  const std::vector<int> siblings = {1, 2};
  EXPECT_THROW(model.commit_accepted(cache, packed, v.packed, siblings), ContractError);
  const std::vector<int> not_root = {1};
  EXPECT_THROW(model.commit_accepted(cache, packed, v.packed, not_root), ContractError);
}

TEST(KvCache, TruncateDropsLaterEntries) {
  const auto model = TinyTransformer::random(small_transformer_config(), 1);
  KvCache cache = model.new_cache();
  const std::vector<TokenId> t = {1, 2, 3, 4};
  model.forward_context(t, cache);
  cache.truncate(2);
  EXPECT_EQ(cache.committed_len(), 2u);
  for (const auto& k : cache.keys) EXPECT_TRUE(k.bottomRows(k.rows() - 2).isZero());
  EXPECT_THROW(cache.truncate(3), ContractError);
}

TEST(TreeMask, AncestorClosureMatchesReachability) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng() % 24;
    std::vector<int> parents(n);
    for (std::size_t i = 0; i < n; ++i) parents[i] = static_cast<int>(rng() % (i + 1)) - 1;
    const TreeMask mask = make_tree_mask(parents);
    EXPECT_EQ(mask.allowed, oracle::reachability(parents));
    for (std::size_t i = 0; i < n; ++i) {
      const int p = parents[i];
      EXPECT_EQ(mask.depths[i], p < 0 ? 1 : mask.depths[static_cast<std::size_t>(p)] + 1);
    }
    EXPECT_NO_THROW(validate_tree_mask(mask));
  }
}

TEST(TreeMask, RejectsForwardParents) {
  EXPECT_THROW(make_tree_mask({-1, 2, 0}), ContractError);
  TreeMask bad = make_tree_mask({-1, 0});
  bad.allowed(1, 0) = 0;
  EXPECT_THROW(validate_tree_mask(bad), ContractError);
}

TEST(Markov, SameSeedSameLogits) {
  const auto a = synthetic_markov_model(2, 32, 42);
  const auto b = synthetic_markov_model(2, 32, 42);
  EXPECT_EQ(a.table(), b.table());
  const auto c = synthetic_markov_model(2, 32, 43);
  EXPECT_NE(a.table(), c.table());
}

TEST(Markov, TopMarginExceedsHalf) {
  const auto model = synthetic_markov_model(2, 64, 5);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto ctx = random_tokens(rng, 1 + rng() % 6, 64);
    const auto out = replay(model, ctx);
    EXPECT_GT(top2_margin(out.logits.row(out.logits.rows() - 1).transpose()), 0.5f);
  }
}

TEST(Markov, GreedyGenerationIsEventuallyPeriodic) {
  const auto model = synthetic_markov_model(2, 32, 8);
  // The greedy chain lives on vocab^2 states, so after that many steps it is
  // inside its cycle and the cycle length is at most vocab^2.
  constexpr std::size_t kStates = 32 * 32;
  std::vector<TokenId> seq = {3, 4};
  while (seq.size() < 2 + 3 * kStates) {
    KvCache cache = model.new_cache();
    const auto out = model.forward_context(std::span(seq).last(2), cache);
    seq.push_back(greedy_token(out.logits, 1));
  }
  const std::size_t anchor = 2 + kStates;
  std::size_t cycle = 0;
  for (std::size_t p = 1; p <= kStates && cycle == 0; ++p) {
    if (seq[anchor + p] == seq[anchor] && seq[anchor + p + 1] == seq[anchor + 1]) cycle = p;
  }
  ASSERT_GT(cycle, 0u);
  for (std::size_t i = anchor; i + cycle < seq.size(); ++i) ASSERT_EQ(seq[i + cycle], seq[i]) << i;
}

TEST(Markov, HiddenIsSlotConcatenationOfEmbeddings) {
  const auto model = synthetic_markov_model(2, 16, 2, 8);
  const std::vector<TokenId> ctx = {5, 9};
  const auto out = replay(model, ctx);
  const auto& e = model.token_embeddings();
  EXPECT_EQ(out.hidden.row(1).head(4), e.row(5).head(4));
  EXPECT_EQ(out.hidden.row(1).tail(4), e.row(9).tail(4));
}

TEST(Markov, UnsupportedConfigRejected) {
  EXPECT_THROW(synthetic_markov_model(3, 16, 1), ConfigError);
  EXPECT_THROW(synthetic_markov_model(2, 300, 1), ConfigError);
}

}  // namespace
}  // namespace redraft
