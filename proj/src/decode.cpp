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

#include "redraft/decode.hpp"

#include <algorithm>
#include <string>

namespace redraft {
namespace {

void check_request(const BaseModel& base, std::span<const TokenId> prompt, const DecodeConfig& cfg) {
  if (prompt.empty()) throw ContractError("generate: prompt must be non-empty");
  if (prompt.size() + cfg.max_new_tokens > base.config().max_seq_len) {
    throw CapacityError("generate: prompt (" + std::to_string(prompt.size()) + ") + max_new_tokens (" +
                        std::to_string(cfg.max_new_tokens) + ") exceeds max_seq_len " +
                        std::to_string(base.config().max_seq_len));
  }
}

}  // namespace

double GenerationResult::tokens_per_step() const {
  if (steps.empty()) return 0.0;
  return static_cast<double>(tokens.size()) / static_cast<double>(steps.size());
}

VerifyResult verify_greedy(const BaseModelOutput& verified, const Beam& beam, const PackedBeam& packed,
                           const Vector& guaranteed_logits, const Vector& guaranteed_hidden) {
  if (verified.rows() != packed.size() || verified.hidden.rows() != verified.logits.rows()) {
    throw ContractError("verify_greedy: base output rows do not align with the packed beam");
  }
  if (packed.candidate_node.rows() != beam.tokens.rows() ||
      packed.candidate_node.cols() != beam.tokens.cols()) {
    throw ContractError("verify_greedy: packed beam does not match the beam");
  }
  VerifyResult result;
  const auto root_choice = static_cast<TokenId>(argmax_tie_low(guaranteed_logits));
  if (top2_margin(guaranteed_logits) < kNearTieMargin) ++result.near_ties;
  std::vector<TokenId> node_choice(packed.size());
  for (std::size_t a = 0; a < packed.size(); ++a) {
    const auto row = verified.logits.row(static_cast<Eigen::Index>(a)).transpose();
    node_choice[a] = static_cast<TokenId>(argmax_tie_low(row));
    if (top2_margin(row) < kNearTieMargin) ++result.near_ties;
  }

  for (Eigen::Index i = 0; i < beam.tokens.rows(); ++i) {
    std::size_t accepted = 0;
    TokenId expected = root_choice;
    for (Eigen::Index j = 0; j < beam.tokens.cols(); ++j) {
      if (beam.tokens(i, j) != expected) break;
      ++accepted;
      expected = node_choice[static_cast<std::size_t>(packed.candidate_node(i, j))];
    }
    if (accepted > result.accepted_len) {
      result.accepted_len = accepted;
      result.chosen_candidate = static_cast<std::size_t>(i);
    }
  }

  for (std::size_t j = 0; j < result.accepted_len; ++j) {
    result.accepted_path.push_back(packed.candidate_node(static_cast<Eigen::Index>(result.chosen_candidate),
                                                         static_cast<Eigen::Index>(j)));
  }
  if (result.accepted_path.empty()) {
    result.next_token = root_choice;
    result.next_hidden = guaranteed_hidden;
  } else {
    const int last = result.accepted_path.back();
    result.next_token = node_choice[static_cast<std::size_t>(last)];
    result.next_hidden = verified.hidden.row(last).transpose();
  }
  return result;
}

GenerationResult speculative_generate(const BaseModel& base, const DraftModel& drafter,
                                      std::span<const TokenId> prompt, const DecodeConfig& cfg) {
  check_request(base, prompt, cfg);
  if (cfg.beam_width < 1 || cfg.beam_length < 1) {
    throw ConfigError("beam_width and beam_length must be >= 1");
  }
  GenerationResult result;
  if (cfg.max_new_tokens == 0) return result;

  KvCache cache = base.new_cache();
  const BaseModelOutput prefill = base.forward_context(prompt, cache);
  const auto last_row = prefill.logits.rows() - 1;
  TokenId guaranteed = greedy_token(prefill.logits, last_row);
  Vector hidden = prefill.hidden.row(last_row).transpose();

  const std::size_t max_seq = base.config().max_seq_len;
  bool stopped = false;
  while (!stopped && result.tokens.size() < cfg.max_new_tokens) {
    // The guaranteed token is emitted this step; draft only what can still be used.
    const std::size_t budget = cfg.max_new_tokens - result.tokens.size() - 1;
    const std::size_t room = max_seq - cache.committed_len() - 1;
    const std::size_t length = std::min({cfg.beam_length, budget, room});

    Beam beam;
    PackedBeam packed;
    if (length > 0) {
      beam = beam_search(drafter, cache.tokens, hidden, guaranteed, cfg.beam_width, length);
      packed = pack_beam(beam, dedup_prefix(beam.tokens));
    } else {
      beam.tokens.resize(0, 0);
      packed.candidate_node.resize(0, 0);
    }

    const VerifyOutput verified = base.forward_verify(guaranteed, packed, cache);
    const VerifyResult accept = verify_greedy(verified.packed, beam, packed, verified.guaranteed_logits,
                                              verified.guaranteed_hidden);
    base.commit_accepted(cache, packed, verified.packed, accept.accepted_path);

    StepReport report;
    report.accepted_draft_tokens = accept.accepted_len;
    report.chosen_candidate = accept.chosen_candidate;
    report.packed_size = packed.size();
    report.compression_ratio = compression_ratio(beam, packed);
    report.near_ties = accept.near_ties;

    std::vector<TokenId> step_tokens;
    if (!(cfg.debug_drop_guaranteed && accept.accepted_len > 0)) step_tokens.push_back(guaranteed);
    for (int node : accept.accepted_path) step_tokens.push_back(packed.tokens[static_cast<std::size_t>(node)]);
    for (TokenId t : step_tokens) {
      result.tokens.push_back(t);
      ++report.emitted;
      if (cfg.stop_token && t == *cfg.stop_token) {
        stopped = true;
        break;
      }
    }
    result.steps.push_back(report);

    guaranteed = accept.next_token;
    hidden = accept.next_hidden;
  }
  return result;
}

std::vector<TokenId> autoregressive_generate(const BaseModel& base, std::span<const TokenId> prompt,
                                             const DecodeConfig& cfg) {
  check_request(base, prompt, cfg);
  std::vector<TokenId> out;
  if (cfg.max_new_tokens == 0) return out;
  KvCache cache = base.new_cache();
  BaseModelOutput step = base.forward_context(prompt, cache);
  TokenId next = greedy_token(step.logits, step.logits.rows() - 1);
  while (true) {
    out.push_back(next);
    if (out.size() >= cfg.max_new_tokens || (cfg.stop_token && next == *cfg.stop_token)) break;
    const TokenId feed[] = {next};
    step = base.forward_context(feed, cache);
    next = greedy_token(step.logits, 0);
  }
  return out;
}

}  // namespace redraft
