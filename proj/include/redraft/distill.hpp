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
#include <filesystem>
#include <span>
#include <vector>

#include "redraft/base_model.hpp"
#include "redraft/drafter.hpp"

namespace redraft {

// One training sequence for the drafter: after `context` (y_1..y_t) the
// drafter should produce `teacher` (T tokens). `h` is the base hidden state
// one position before the last context token (zero when t == 1), matching
// the inference-time pairing of h with the token that follows it.
struct DistillExample {
  std::vector<TokenId> context;
  std::vector<TokenId> teacher;
  Vector h;
};

struct DistillDataset {
  std::size_t horizon = 0;
  std::vector<DistillExample> examples;
  // Sequences (or positions) dropped for being too short.
  std::size_t skipped = 0;
};

struct TrainConfig {
  std::size_t horizon = 5;
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  DrafterParams params;
  double initial_loss = 0;
  // Mean per-token loss over the whole dataset after each epoch.
  std::vector<double> epoch_loss;
};

// Greedy T-token base-model rollouts from every prefix y_1..y_t (t < len).
DistillDataset build_distill_dataset(const BaseModel& base,
                                     std::span<const std::vector<TokenId>> corpus, std::size_t horizon);

// Control arm: the teacher is the corpus continuation itself; positions
// within T of the end are skipped, so a length-L sequence yields L - T.
DistillDataset ground_truth_dataset(const BaseModel& base,
                                    std::span<const std::vector<TokenId>> corpus, std::size_t horizon);

// Mean per-token loss of params over the dataset, in dataset order.
double dataset_loss(const DistillDataset& data, const DrafterParams& params, const Matrix& embeddings);

// Adam on the mean teacher-forced loss; deterministic given cfg.seed.
TrainResult train_drafter(const DistillDataset& data, const DrafterParams& init, const Matrix& embeddings,
                          const TrainConfig& cfg);

// Exact KL(base || drafter) of the next-token distributions at recurrence
// step k = 1..T, teacher-forced on the base model's greedy tokens and
// averaged over probes. Probe contexts must be non-empty.
std::vector<double> empirical_kl(const BaseModel& base, const DraftModel& drafter,
                                 std::span<const std::vector<TokenId>> probe_contexts, std::size_t horizon);

struct CorpusSpec {
  std::size_t vocab_size = 32;
  std::size_t sequences = 500;
  std::size_t length = 64;
  // Logit scale of the sampling chain's random transition table.
  float logit_scale = 2.0f;
  std::uint64_t seed = 7;
};

// Sequences sampled from a seeded order-2 Markov chain.
std::vector<std::vector<TokenId>> synthetic_corpus(const CorpusSpec& spec);

// Seeded uniform random token sequences.
std::vector<std::vector<TokenId>> random_prompts(std::size_t vocab_size, std::size_t count,
                                                 std::size_t length, std::uint64_t seed);

// Text dataset: one record per line, `context_len T context... teacher...`.
void write_dataset(const DistillDataset& data, const std::filesystem::path& path);
// Hidden states are recomputed with `base` on load.
DistillDataset read_dataset(const std::filesystem::path& path, const BaseModel& base);

}  // namespace redraft
