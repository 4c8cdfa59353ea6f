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

#include "redraft/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "redraft/distill.hpp"

namespace redraft {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::optional<std::size_t> first_divergence(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) return i;
  }
  if (a.size() != b.size()) return n;
  return std::nullopt;
}

}  // namespace

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 1.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j = to_json_without_timing();
  j["wall_ms_spec"] = wall_ms_spec;
  j["wall_ms_ar"] = wall_ms_ar;
  j["speedup"] = speedup;
  return j;
}

nlohmann::json RunReport::to_json_without_timing() const {
  return {
      {"base_model", base_model},
      {"drafter", drafter},
      {"beam_width", beam_width},
      {"beam_length", beam_length},
      {"max_new_tokens", max_new_tokens},
      {"seed", seed},
      {"prompts", prompts},
      {"tokens_generated", tokens_generated},
      {"steps", steps},
      {"tokens_per_step", tokens_per_step},
      {"compression_mean", compression_mean},
      {"compression_p99", compression_p99},
      {"near_ties", near_ties},
      {"equivalence_ok", equivalence_ok},
  };
}

RunOutputs run_generation(const BaseModel& base, const DraftModel& drafter,
                          const std::vector<std::vector<TokenId>>& prompts, const DecodeConfig& cfg,
                          const std::string& base_id, const std::string& drafter_id) {
  RunOutputs out;
  RunReport& r = out.report;
  r.base_model = base_id.empty() ? base.kind() : base_id;
  r.drafter = drafter_id;
  r.beam_width = cfg.beam_width;
  r.beam_length = cfg.beam_length;
  r.max_new_tokens = cfg.max_new_tokens;
  r.seed = cfg.seed;
  r.prompts = prompts.size();

  if (!prompts.empty()) {
    (void)autoregressive_generate(base, prompts.front(), cfg);
    (void)speculative_generate(base, drafter, prompts.front(), cfg);
  }

  auto start = Clock::now();
  for (const auto& p : prompts) out.autoregressive.push_back(autoregressive_generate(base, p, cfg));
  r.wall_ms_ar = elapsed_ms(start);

  std::vector<double> ratios;
  start = Clock::now();
  for (const auto& p : prompts) {
    GenerationResult g = speculative_generate(base, drafter, p, cfg);
    r.steps += g.steps.size();
    for (const auto& s : g.steps) {
      ratios.push_back(s.compression_ratio);
      r.near_ties += s.near_ties;
    }
    out.speculative.push_back(std::move(g.tokens));
  }
  r.wall_ms_spec = elapsed_ms(start);

  for (const auto& s : out.speculative) r.tokens_generated += s.size();
  r.tokens_per_step = r.steps == 0 ? 0.0 : static_cast<double>(r.tokens_generated) / static_cast<double>(r.steps);
  r.speedup = r.wall_ms_spec > 0 ? r.wall_ms_ar / r.wall_ms_spec : 0.0;
  if (!ratios.empty()) {
    double sum = 0;
    for (double x : ratios) sum += x;
    r.compression_mean = sum / static_cast<double>(ratios.size());
  }
  r.compression_p99 = percentile(ratios, 99.0);
  r.equivalence_ok = out.speculative == out.autoregressive;
  return out;
}

std::vector<BenchRow> run_bench(const BaseModel& base, const DraftModel& drafter,
                                const std::vector<std::vector<TokenId>>& prompts, const BenchSpec& spec) {
  if (spec.widths.empty() || spec.lengths.empty()) throw ConfigError("bench: empty sweep list");
  if (spec.repeats < 1) throw ConfigError("bench: repeats must be >= 1");
  DecodeConfig base_cfg;
  base_cfg.max_new_tokens = spec.max_new_tokens;
  base_cfg.seed = spec.seed;

  std::vector<std::vector<TokenId>> reference;
  if (!prompts.empty()) (void)autoregressive_generate(base, prompts.front(), base_cfg);
  const auto start = Clock::now();
  for (const auto& p : prompts) reference.push_back(autoregressive_generate(base, p, base_cfg));
  const double wall_ms_ar = elapsed_ms(start);

  std::vector<BenchRow> rows;
  for (std::size_t width : spec.widths) {
    for (std::size_t length : spec.lengths) {
      DecodeConfig cfg = base_cfg;
      cfg.beam_width = width;
      cfg.beam_length = length;
      if (!prompts.empty()) (void)speculative_generate(base, drafter, prompts.front(), cfg);
      for (std::size_t rep = 0; rep < spec.repeats; ++rep) {
        BenchRow row;
        row.beam_width = width;
        row.beam_length = length;
        row.repeat = rep;
        row.wall_ms_ar = wall_ms_ar;
        std::vector<double> ratios;
        bool same = true;
        const auto t0 = Clock::now();
        for (std::size_t i = 0; i < prompts.size(); ++i) {
          const GenerationResult g = speculative_generate(base, drafter, prompts[i], cfg);
          row.tokens += g.tokens.size();
          row.steps += g.steps.size();
          for (const auto& s : g.steps) ratios.push_back(s.compression_ratio);
          same = same && g.tokens == reference[i];
        }
        row.wall_ms_spec = elapsed_ms(t0);
        row.tokens_per_step =
            row.steps == 0 ? 0.0 : static_cast<double>(row.tokens) / static_cast<double>(row.steps);
        double sum = 0;
        for (double x : ratios) sum += x;
        row.compression_mean = ratios.empty() ? 1.0 : sum / static_cast<double>(ratios.size());
        row.compression_p99 = percentile(ratios, 99.0);
        row.speedup = row.wall_ms_spec > 0 ? row.wall_ms_ar / row.wall_ms_spec : 0.0;
        row.equivalence_ok = same;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << kBenchCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.beam_width << ',' << r.beam_length << ',' << r.repeat << ',' << r.tokens << ',' << r.steps
        << ',' << r.tokens_per_step << ',' << r.compression_mean << ',' << r.compression_p99 << ','
        << r.wall_ms_spec << ',' << r.wall_ms_ar << ',' << r.speedup << ','
        << (r.equivalence_ok ? "true" : "false") << '\n';
  }
}

std::string EquivalenceFailure::describe() const {
  std::ostringstream os;
  os << "model=" << model << " beam_width=" << beam_width << " beam_length=" << beam_length
     << " prompt=" << prompt_index << " prompt_seed=" << prompt_seed << " first divergence at output position "
     << position << " (expected " << (expected ? std::to_string(*expected) : std::string("<end>")) << ", got "
     << (got ? std::to_string(*got) : std::string("<end>")) << ")";
  return os.str();
}

EquivalenceSummary verify_equivalence(const std::vector<EquivalenceTarget>& targets,
                                      const EquivalenceSpec& spec) {
  EquivalenceSummary summary;
  for (const auto& target : targets) {
    const auto prompts = random_prompts(target.base->config().vocab_size, spec.prompts, spec.prompt_length,
                                        spec.seed);
    DecodeConfig cfg;
    cfg.max_new_tokens = spec.max_new_tokens;
    cfg.seed = spec.seed;
    cfg.debug_drop_guaranteed = spec.debug_drop_guaranteed;
    std::vector<std::vector<TokenId>> reference;
    reference.reserve(prompts.size());
    for (const auto& p : prompts) reference.push_back(autoregressive_generate(*target.base, p, cfg));

    for (std::size_t width : spec.widths) {
      for (std::size_t length : spec.lengths) {
        cfg.beam_width = width;
        cfg.beam_length = length;
        for (std::size_t i = 0; i < prompts.size(); ++i) {
          ++summary.total;
          const auto got = speculative_generate(*target.base, *target.drafter, prompts[i], cfg).tokens;
          const auto diverge = first_divergence(reference[i], got);
          if (!diverge) {
            ++summary.passed;
            continue;
          }
          if (!summary.first_failure) {
            EquivalenceFailure f;
            f.model = target.name;
            f.beam_width = width;
            f.beam_length = length;
            f.prompt_index = i;
            f.prompt_seed = spec.seed;
            f.position = *diverge;
            if (*diverge < reference[i].size()) f.expected = reference[i][*diverge];
            if (*diverge < got.size()) f.got = got[*diverge];
            summary.first_failure = f;
          }
        }
      }
    }
  }
  return summary;
}

}  // namespace redraft
