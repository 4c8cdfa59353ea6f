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

#include <numeric>
#include <random>

#include "drafters.hpp"
#include "fixtures.hpp"
#include "redraft/decode.hpp"

namespace redraft {
namespace {

using testing::random_tokens;

DecodeConfig config(std::size_t width, std::size_t length, std::size_t max_new) {
  DecodeConfig cfg;
  cfg.beam_width = width;
  cfg.beam_length = length;
  cfg.max_new_tokens = max_new;
  return cfg;
}

TEST(Autoregressive, FollowsTableTopOneChain) {
  const auto base = synthetic_markov_model(2, 32, 11);
  const std::vector<TokenId> prompt = {4, 17};
  const auto out = autoregressive_generate(base, prompt, config(1, 1, 20));
  ASSERT_EQ(out.size(), 20u);
  TokenId a = 4, b = 17;
  for (TokenId t : out) {
    EXPECT_EQ(t, static_cast<TokenId>(argmax_tie_low(base.table().row(base.state_index(std::vector<TokenId>{a, b})))));
    a = b;
    b = t;
  }
}

TEST(Autoregressive, StopsAtStopToken) {
  const auto base = synthetic_markov_model(2, 32, 11);
  const std::vector<TokenId> prompt = {4, 17};
  const auto full = autoregressive_generate(base, prompt, config(1, 1, 30));
  auto cfg = config(1, 1, 30);
  cfg.stop_token = full[5];
  const auto cut = autoregressive_generate(base, prompt, cfg);
  const auto first = std::find(full.begin(), full.end(), full[5]) - full.begin();
  EXPECT_EQ(cut, std::vector<TokenId>(full.begin(), full.begin() + first + 1));
}

TEST(Autoregressive, Deterministic) {
  const auto base = TinyTransformer::random(testing::small_transformer_config(), 3);
  const std::vector<TokenId> prompt = {1, 2, 3};
  EXPECT_EQ(autoregressive_generate(base, prompt, config(1, 1, 16)),
            autoregressive_generate(base, prompt, config(1, 1, 16)));
}

TEST(Speculative, PerfectDrafterAcceptsEverything) {
  const auto base = synthetic_markov_model(2, 32, 5);
  const MirrorDrafter mirror(base, MirrorDrafter::Mode::kGreedy);
  const std::vector<TokenId> prompt = {1, 2, 3};
  const auto cfg = config(2, 5, 60);
  const auto out = speculative_generate(base, mirror, prompt, cfg);
  EXPECT_EQ(out.tokens, autoregressive_generate(base, prompt, cfg));
  ASSERT_EQ(out.steps.size(), 10u);
  for (const auto& s : out.steps) {
    EXPECT_EQ(s.accepted_draft_tokens, 5u);
    EXPECT_EQ(s.emitted, 6u);
    EXPECT_EQ(s.llm_calls, 1u);
  }
  EXPECT_DOUBLE_EQ(out.tokens_per_step(), 6.0);
}

TEST(Speculative, GreedyMirrorIsPerfectOnAFlatTransformer) {
  // An untrained transformer has flat next-token distributions, so a drafter
  // returning the soft distribution lets beam search rank a non-greedy path
  // above the greedy one. The greedy mirror never does.
  const auto base = TinyTransformer::random(testing::small_transformer_config(), 6);
  const MirrorDrafter greedy(base, MirrorDrafter::Mode::kGreedy);
  const MirrorDrafter soft(base);
  std::mt19937_64 rng(7);
  double soft_worst = 1e9;
  for (int trial = 0; trial < 6; ++trial) {
    const auto prompt = random_tokens(rng, 8, 64);
    for (std::size_t length : {1, 2, 3, 5}) {
      const auto cfg = config(4, length, 12 * (length + 1));
      const auto out = speculative_generate(base, greedy, prompt, cfg);
      EXPECT_EQ(out.tokens, autoregressive_generate(base, prompt, cfg));
      EXPECT_DOUBLE_EQ(out.tokens_per_step(), static_cast<double>(length + 1));
      const auto loose = speculative_generate(base, soft, prompt, cfg);
      EXPECT_EQ(loose.tokens, out.tokens);
      soft_worst = std::min(soft_worst, loose.tokens_per_step() / static_cast<double>(length + 1));
    }
  }
  EXPECT_LT(soft_worst, 1.0);
}

TEST(Speculative, AdversarialDrafterAcceptsNothing) {
  const auto base = synthetic_markov_model(2, 32, 5);
  const testing::AdversarialDrafter drafter(base);
  const std::vector<TokenId> prompt = {1, 2, 3};
  const auto cfg = config(4, 5, 25);
  const auto out = speculative_generate(base, drafter, prompt, cfg);
  EXPECT_EQ(out.tokens, autoregressive_generate(base, prompt, cfg));
  EXPECT_EQ(out.steps.size(), 25u);
  for (const auto& s : out.steps) EXPECT_EQ(s.accepted_draft_tokens, 0u);
  EXPECT_DOUBLE_EQ(out.tokens_per_step(), 1.0);
}

TEST(Speculative, UntrainedDrafterOnRandomTransformerStaysExact) {
  const auto base = TinyTransformer::random(testing::small_transformer_config(), 21);
  const auto params = init_drafter_params(drafter_dims_for(base), 22);
  const RnnDrafter drafter(params, base.token_embeddings());
  std::mt19937_64 rng(23);
  for (std::size_t width : {1, 2, 4, 8}) {
    for (std::size_t length : {2, 4, 5}) {
      const auto prompt = random_tokens(rng, 6, 64);
      const auto cfg = config(width, length, 24);
      const auto out = speculative_generate(base, drafter, prompt, cfg);
      EXPECT_EQ(out.tokens, autoregressive_generate(base, prompt, cfg)) << width << "x" << length;
    }
  }
}

TEST(Speculative, LongRunWithRandomDrafterMatchesAutoregressive) {
  const auto base = synthetic_markov_model(2, 32, 31);
  const auto params = init_drafter_params(drafter_dims_for(base), 32, 0.5f);
  const RnnDrafter drafter(params, base.token_embeddings());
  const std::vector<TokenId> prompt = {9, 8, 7};
  const auto cfg = config(4, 4, 200);
  const auto out = speculative_generate(base, drafter, prompt, cfg);
  EXPECT_GE(out.steps.size(), 40u);
  EXPECT_EQ(out.tokens, autoregressive_generate(base, prompt, cfg));
}

TEST(Speculative, MinimalConfiguration) {
  const auto base = synthetic_markov_model(1, 16, 2);
  const MirrorDrafter mirror(base);
  const std::vector<TokenId> prompt = {3};
  const auto cfg = config(1, 1, 31);
  const auto out = speculative_generate(base, mirror, prompt, cfg);
  EXPECT_EQ(out.tokens, autoregressive_generate(base, prompt, cfg));
  EXPECT_GE(out.tokens_per_step(), 1.0);
  EXPECT_LE(out.tokens_per_step(), 2.0);
}

TEST(Speculative, StopTokenTruncatesInsideAcceptedPrefix) {
  const auto base = synthetic_markov_model(2, 32, 5);
  const MirrorDrafter mirror(base);
  const std::vector<TokenId> prompt = {1, 2, 3};
  const auto full = autoregressive_generate(base, prompt, config(1, 1, 40));
  for (std::size_t at : {0, 2, 7, 13}) {
    auto cfg = config(3, 5, 40);
    cfg.stop_token = full[at];
    const auto out = speculative_generate(base, mirror, prompt, cfg);
    EXPECT_EQ(out.tokens, autoregressive_generate(base, prompt, cfg));
    EXPECT_EQ(out.tokens.back(), full[at]);
    std::size_t emitted = 0;
    for (const auto& s : out.steps) emitted += s.emitted;
    EXPECT_EQ(emitted, out.tokens.size());
  }
}

TEST(Speculative, TokensPerStepIsMeanOfAcceptedPlusOne) {
  const auto base = synthetic_markov_model(2, 32, 8);
  const auto params = init_drafter_params(drafter_dims_for(base), 9, 0.5f);
  const RnnDrafter drafter(params, base.token_embeddings());
  const std::vector<TokenId> prompt = {5, 6};
  const auto out = speculative_generate(base, drafter, prompt, config(4, 5, 64));
  double sum = 0.0;
  for (const auto& s : out.steps) {
    EXPECT_EQ(s.emitted, s.accepted_draft_tokens + 1);
    sum += static_cast<double>(s.accepted_draft_tokens + 1);
  }
  EXPECT_DOUBLE_EQ(out.tokens_per_step(), sum / static_cast<double>(out.steps.size()));
  EXPECT_EQ(out.tokens.size(), 64u);
}

TEST(Speculative, Deterministic) {
  const auto base = TinyTransformer::random(testing::small_transformer_config(), 4);
  const auto params = init_drafter_params(drafter_dims_for(base), 5);
  const RnnDrafter drafter(params, base.token_embeddings());
  const std::vector<TokenId> prompt = {10, 20, 30};
  const auto a = speculative_generate(base, drafter, prompt, config(4, 5, 20));
  const auto b = speculative_generate(base, drafter, prompt, config(4, 5, 20));
  EXPECT_EQ(a.tokens, b.tokens);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].accepted_draft_tokens, b.steps[i].accepted_draft_tokens);
  }
}

TEST(Speculative, DroppedGuaranteedTokenBreaksEquivalence) {
  const auto base = synthetic_markov_model(2, 32, 5);
  const MirrorDrafter mirror(base);
  const std::vector<TokenId> prompt = {1, 2, 3};
  auto cfg = config(2, 4, 30);
  cfg.debug_drop_guaranteed = true;
  EXPECT_NE(speculative_generate(base, mirror, prompt, cfg).tokens, autoregressive_generate(base, prompt, cfg));
}

TEST(Speculative, ContractsEnforced) {
  const auto base = synthetic_markov_model(2, 32, 5);
  const MirrorDrafter mirror(base);
  const std::vector<TokenId> prompt = {1, 2, 3};
  EXPECT_THROW(speculative_generate(base, mirror, {}, config(2, 2, 4)), ContractError);
  EXPECT_THROW(speculative_generate(base, mirror, prompt, config(2, 2, 510)), CapacityError);
  EXPECT_THROW(autoregressive_generate(base, prompt, config(2, 2, 510)), CapacityError);
  EXPECT_THROW(speculative_generate(base, mirror, prompt, config(33, 2, 4)), ConfigError);
  EXPECT_TRUE(speculative_generate(base, mirror, prompt, config(2, 2, 0)).tokens.empty());
}

TEST(Speculative, FillsContextExactlyToCapacity) {
  MarkovConfig mc;
  mc.vocab_size = 16;
  mc.max_seq_len = 20;
  mc.seed = 3;
  const SyntheticMarkovModel base(mc);
  const MirrorDrafter mirror(base);
  const std::vector<TokenId> prompt = {1, 2, 3, 4};
  const auto cfg = config(2, 5, 16);
  EXPECT_EQ(speculative_generate(base, mirror, prompt, cfg).tokens, autoregressive_generate(base, prompt, cfg));
}

TEST(VerifyGreedy, PicksLongestAcceptedPrefix) {
  IndexMatrix tokens(2, 2);
  tokens << 1, 2, 1, 3;
  Beam beam;
  beam.tokens = tokens;
  const auto packed = pack_beam(tokens, dedup_prefix(tokens));  // nodes: 1, 2, 3
  BaseModelOutput out;
  out.logits = Matrix::Zero(3, 4);
  out.hidden = Matrix::Zero(3, 2);
  out.logits(0, 3) = 1.0f;  // after token 1 the base model wants 3
  out.logits(1, 0) = 1.0f;
  out.logits(2, 2) = 1.0f;  // after 1, 3 it wants 2
  out.hidden(2, 0) = 7.0f;
  Vector g_logits = Vector::Zero(4);
  g_logits(1) = 1.0f;
  const auto r = verify_greedy(out, beam, packed, g_logits, Vector::Zero(2));
  EXPECT_EQ(r.chosen_candidate, 1u);
  EXPECT_EQ(r.accepted_len, 2u);
  EXPECT_EQ(r.next_token, 2);
  EXPECT_EQ(r.next_hidden(0), 7.0f);
  EXPECT_EQ(r.accepted_path, (std::vector<int>{0, 2}));
}

TEST(VerifyGreedy, NoMatchUsesGuaranteedPosition) {
  IndexMatrix tokens(1, 2);
  tokens << 0, 0;
  Beam beam;
  beam.tokens = tokens;
  const auto packed = pack_beam(tokens, dedup_prefix(tokens));
  BaseModelOutput out;
  out.logits = Matrix::Zero(2, 4);
  out.hidden = Matrix::Zero(2, 2);
  Vector g_logits = Vector::Zero(4);
  g_logits(2) = 1.0f;
  Vector g_hidden(2);
  g_hidden << 5.0f, 6.0f;
  const auto r = verify_greedy(out, beam, packed, g_logits, g_hidden);
  EXPECT_EQ(r.accepted_len, 0u);
  EXPECT_EQ(r.next_token, 2);
  EXPECT_EQ(r.next_hidden, g_hidden);
}

TEST(VerifyGreedy, MisalignedOutputRejected) {
  IndexMatrix tokens(1, 2);
  tokens << 0, 1;
  Beam beam;
  beam.tokens = tokens;
  const auto packed = pack_beam(tokens, dedup_prefix(tokens));
  BaseModelOutput out;
  out.logits = Matrix::Zero(3, 4);
  out.hidden = Matrix::Zero(3, 2);
  EXPECT_THROW(verify_greedy(out, beam, packed, Vector::Zero(4), Vector::Zero(2)), ContractError);
}

}  // namespace
}  // namespace redraft
