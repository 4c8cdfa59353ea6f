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
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "redraft/decode.hpp"

namespace redraft {

// Metrics of one speculative run over a prompt set, with the autoregressive
// baseline on the same prompts.
struct RunReport {
  std::string base_model;
  std::string drafter;
  std::size_t beam_width = 0;
  std::size_t beam_length = 0;
  std::size_t max_new_tokens = 0;
  std::uint64_t seed = 0;
  std::size_t prompts = 0;
  std::size_t tokens_generated = 0;
  std::size_t steps = 0;
  double tokens_per_step = 0;
  double wall_ms_spec = 0;
  double wall_ms_ar = 0;
  double speedup = 0;
  double compression_mean = 1;
  double compression_p99 = 1;
  std::size_t near_ties = 0;
  bool equivalence_ok = false;

  nlohmann::json to_json() const;
  // Same report with the timing fields zeroed.
  nlohmann::json to_json_without_timing() const;
};

struct RunOutputs {
  RunReport report;
  std::vector<std::vector<TokenId>> speculative;
  std::vector<std::vector<TokenId>> autoregressive;
};

// Runs AR and speculative decoding over every prompt (one discarded warm-up
// of each first) and fills in the report.
RunOutputs run_generation(const BaseModel& base, const DraftModel& drafter,
                          const std::vector<std::vector<TokenId>>& prompts, const DecodeConfig& cfg,
                          const std::string& base_id = "", const std::string& drafter_id = "");

struct BenchRow {
  std::size_t beam_width = 0;
  std::size_t beam_length = 0;
  std::size_t repeat = 0;
  std::size_t tokens = 0;
  std::size_t steps = 0;
  double tokens_per_step = 0;
  double compression_mean = 1;
  double compression_p99 = 1;
  double wall_ms_spec = 0;
  double wall_ms_ar = 0;
  double speedup = 0;
  bool equivalence_ok = false;
};

inline constexpr const char* kBenchCsvHeader =
    "beam_width,beam_length,repeat,tokens,steps,tokens_per_step,compression_mean,compression_p99,"
    "wall_ms_spec,wall_ms_ar,speedup,equivalence_ok";

struct BenchSpec {
  std::vector<std::size_t> widths;
  std::vector<std::size_t> lengths;
  std::size_t repeats = 1;
  std::size_t max_new_tokens = 64;
  std::uint64_t seed = 0;
};

// One row per (width, length, repeat), ordered by width, then length, then
// repeat. The AR baseline is timed once for the whole prompt set.
std::vector<BenchRow> run_bench(const BaseModel& base, const DraftModel& drafter,
                                const std::vector<std::vector<TokenId>>& prompts, const BenchSpec& spec);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

struct EquivalenceTarget {
  std::string name;
  const BaseModel* base = nullptr;
  const DraftModel* drafter = nullptr;
};

struct EquivalenceFailure {
  std::string model;
  std::size_t beam_width = 0;
  std::size_t beam_length = 0;
  std::size_t prompt_index = 0;
  std::uint64_t prompt_seed = 0;
  std::size_t position = 0;  // first diverging output index
  std::optional<TokenId> expected;
  std::optional<TokenId> got;

  std::string describe() const;
};

struct EquivalenceSummary {
  std::size_t total = 0;
  std::size_t passed = 0;
  std::optional<EquivalenceFailure> first_failure;

  bool ok() const { return passed == total; }
};

struct EquivalenceSpec {
  std::size_t prompts = 100;
  std::size_t prompt_length = 16;
  std::size_t max_new_tokens = 24;
  std::vector<std::size_t> widths{1, 2, 4, 8};
  std::vector<std::size_t> lengths{2, 4, 5};
  std::uint64_t seed = 0;
  bool debug_drop_guaranteed = false;
};

// Speculative vs autoregressive on seeded random prompts for every target and
// grid cell.
EquivalenceSummary verify_equivalence(const std::vector<EquivalenceTarget>& targets,
                                      const EquivalenceSpec& spec);

// Nearest-rank percentile (p in (0, 100]) of unsorted values; 1.0 when empty.
double percentile(std::vector<double> values, double p);

}  // namespace redraft
