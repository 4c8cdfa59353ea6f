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
#include <optional>
#include <span>
#include <vector>

#include "redraft/base_model.hpp"
#include "redraft/beam_tree.hpp"
#include "redraft/drafter.hpp"

namespace redraft {

struct DecodeConfig {
  std::size_t beam_width = 4;
  // Draft horizon at inference. May exceed the drafter's training horizon.
  std::size_t beam_length = 5;
  std::size_t max_new_tokens = 64;
  std::optional<TokenId> stop_token;
  std::uint64_t seed = 0;
  // Harness self-test hook: drops the guaranteed token from the output on
  // steps that accepted at least one draft token. Never set in real runs.
  bool debug_drop_guaranteed = false;
};

struct StepReport {
  std::size_t accepted_draft_tokens = 0;
  std::size_t chosen_candidate = 0;
  std::size_t packed_size = 0;
  double compression_ratio = 1.0;
  std::size_t llm_calls = 1;
  // Tokens appended to the output this step (accepted + 1 unless truncated).
  std::size_t emitted = 0;
  // Verification rows whose top-1/top-2 logit gap fell below 1e-6.
  std::size_t near_ties = 0;
};

struct VerifyResult {
  std::size_t chosen_candidate = 0;
  std::size_t accepted_len = 0;
  TokenId next_token = 0;
  Vector next_hidden;
  // Flat packed indices of the accepted prefix, root first.
  std::vector<int> accepted_path;
  std::size_t near_ties = 0;
};

struct GenerationResult {
  std::vector<TokenId> tokens;
  std::vector<StepReport> steps;

  double tokens_per_step() const;
};

inline constexpr float kNearTieMargin = 1e-6f;

// Greedy token-match acceptance. Candidate i accepts its longest prefix whose
// every token equals the base model's argmax at the predecessor node (the
// guaranteed token for position 0). The longest acceptance wins; ties go to
// the lower beam row.
VerifyResult verify_greedy(const BaseModelOutput& verified, const Beam& beam, const PackedBeam& packed,
                           const Vector& guaranteed_logits, const Vector& guaranteed_hidden);

// Draft, pack, verify, accept; repeat. Output equals autoregressive_generate
// token for token.
GenerationResult speculative_generate(const BaseModel& base, const DraftModel& drafter,
                                      std::span<const TokenId> prompt, const DecodeConfig& cfg);

// Greedy (temperature 0) decoding with one base forward per token.
std::vector<TokenId> autoregressive_generate(const BaseModel& base, std::span<const TokenId> prompt,
                                             const DecodeConfig& cfg);

}  // namespace redraft
