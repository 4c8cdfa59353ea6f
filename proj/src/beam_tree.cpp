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

#include "redraft/beam_tree.hpp"

#include <string>

namespace redraft {

Beam beam_search(const DraftModel& drafter, std::span<const TokenId> context, const Vector& h,
                 TokenId last_token, std::size_t width, std::size_t length) {
  if (width < 1 || length < 1) throw ConfigError("beam_search: width and length must be >= 1");
  const std::size_t vocab = drafter.vocab_size();
  if (width > vocab) {
    throw ConfigError("beam_search: beam width " + std::to_string(width) + " exceeds vocabulary " +
                      std::to_string(vocab));
  }

  struct Hypothesis {
    std::vector<TokenId> tokens;
    float logp = 0;
    DrafterState state;  // state to score the next token from
  };
  std::vector<Hypothesis> beam(1);
  beam[0].state = drafter.begin(context, h, last_token);

  for (std::size_t pos = 0; pos < length; ++pos) {
    if (pos > 0) {
      for (auto& hyp : beam) hyp.state = drafter.advance(hyp.state, hyp.tokens.back());
    }
    Vector scores(static_cast<Eigen::Index>(beam.size() * vocab));
    for (std::size_t b = 0; b < beam.size(); ++b) {
      const Vector logp = drafter.log_probs(beam[b].state);
      scores.segment(static_cast<Eigen::Index>(b * vocab), static_cast<Eigen::Index>(vocab)) =
          logp.array() + beam[b].logp;
    }
    const TopK best = top_k(scores, width);
    std::vector<Hypothesis> next;
    next.reserve(width);
    for (std::size_t r = 0; r < width; ++r) {
      const std::size_t parent = best.indices[r] / vocab;
      Hypothesis hyp;
      hyp.tokens = beam[parent].tokens;
      hyp.tokens.push_back(static_cast<TokenId>(best.indices[r] % vocab));
      hyp.logp = best.values[r];
      hyp.state = beam[parent].state;
      next.push_back(std::move(hyp));
    }
    beam = std::move(next);
  }

  Beam out;
  out.tokens.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(length));
  for (std::size_t r = 0; r < width; ++r) {
    for (std::size_t j = 0; j < length; ++j) {
      out.tokens(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = beam[r].tokens[j];
    }
    out.logp.push_back(beam[r].logp);
    out.states.push_back(std::move(beam[r].state));
  }
  return out;
}

PrefixTree dedup_prefix(const IndexMatrix& beam_tokens) {
  const Eigen::Index width = beam_tokens.rows();
  const Eigen::Index length = beam_tokens.cols();
  PrefixTree tree;
  tree.table = IndexMatrix::Zero(width, length);
  for (Eigen::Index i = 0; i < width; ++i) {
    // matches[k][j] for this candidate i; rows index the other candidate k.
    IndexMatrix matches(width, length);
    for (Eigen::Index k = 0; k < width; ++k) {
      matches.row(k) = (beam_tokens.row(i).array() == beam_tokens.row(k).array()).cast<std::int32_t>();
    }
    const IndexMatrix run = cumsum_rows(matches);
    for (Eigen::Index j = 0; j < length; ++j) {
      // First k whose cumulative match count equals j + 1; k == i always qualifies.
      for (Eigen::Index k = 0; k < width; ++k) {
        if (run(k, j) == j + 1) {
          tree.table(i, j) = static_cast<std::int32_t>(k);
          break;
        }
      }
    }
  }
  return tree;
}

PackedBeam pack_beam(const IndexMatrix& beam_tokens, const PrefixTree& prefix_tree) {
  const IndexMatrix& table = prefix_tree.table;
  const Eigen::Index width = beam_tokens.rows();
  const Eigen::Index length = beam_tokens.cols();
  if (table.rows() != width || table.cols() != length) {
    throw ContractError("pack_beam: prefix tree shape does not match the beam");
  }
  PackedBeam packed;
  packed.candidate_node = IndexMatrix::Constant(width, length, -1);
  for (Eigen::Index i = 0; i < width; ++i) {
    for (Eigen::Index j = 0; j < length; ++j) {
      const std::int32_t k = table(i, j);
      if (k < 0 || k > i) throw ContractError("pack_beam: prefix tree entry out of range");
      if (j > 0 && table(i, j - 1) == i && k != i) {
        throw ContractError("pack_beam: candidate re-joins an earlier prefix");
      }
      if (k == i) {
        const int parent = j == 0 ? -1 : packed.candidate_node(i, j - 1);
        packed.candidate_node(i, j) = static_cast<std::int32_t>(packed.tokens.size());
        packed.tokens.push_back(beam_tokens(i, j));
        packed.parents.push_back(parent);
        packed.owner.emplace_back(static_cast<int>(i), static_cast<int>(j));
      } else {
        if (beam_tokens(i, j) != beam_tokens(k, j) ||
            (j > 0 && packed.candidate_node(i, j - 1) != packed.candidate_node(k, j - 1))) {
          throw ContractError("pack_beam: prefix tree inconsistent with beam tokens at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
        }
        packed.candidate_node(i, j) = packed.candidate_node(k, j);
      }
    }
  }
  packed.mask = make_tree_mask(packed.parents);
  packed.depths = packed.mask.depths;
  return packed;
}

IndexMatrix unpack_beam(const PackedBeam& packed) {
  const IndexMatrix& nodes = packed.candidate_node;
  IndexMatrix out(nodes.rows(), nodes.cols());
  for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
    if (nodes.cols() == 0) continue;
    const auto path = path_to(packed, nodes(i, nodes.cols() - 1));
    if (static_cast<Eigen::Index>(path.size()) != nodes.cols()) {
      throw ContractError("unpack_beam: candidate path length mismatch");
    }
    for (Eigen::Index j = 0; j < nodes.cols(); ++j) {
      out(i, j) = packed.tokens[static_cast<std::size_t>(path[static_cast<std::size_t>(j)])];
    }
  }
  return out;
}

double compression_ratio(const IndexMatrix& beam_tokens, const PackedBeam& packed) {
  if (packed.empty()) return 1.0;
  return static_cast<double>(beam_tokens.size()) / static_cast<double>(packed.size());
}

}  // namespace redraft
