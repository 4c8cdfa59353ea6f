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

#include "redraft/distill.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace redraft {
namespace {

// Hidden state that precedes the last context token (zero for a single token).
Vector preceding_hidden(const BaseModelOutput& out, std::size_t t, std::size_t d_model) {
  if (t < 2) return Vector::Zero(static_cast<Eigen::Index>(d_model));
  return out.hidden.row(static_cast<Eigen::Index>(t - 2)).transpose();
}

DrafterState example_state(const DistillExample& ex, const Matrix& embeddings) {
  return init_state(ex.h, ex.context.back(), embeddings);
}

}  // namespace

DistillDataset build_distill_dataset(const BaseModel& base, std::span<const std::vector<TokenId>> corpus,
                                     std::size_t horizon) {
  if (horizon < 1) throw ConfigError("distill: horizon must be >= 1");
  DistillDataset data;
  data.horizon = horizon;
  const std::size_t d_model = base.config().d_model;
  for (const auto& seq : corpus) {
    if (seq.size() < 2) {
      ++data.skipped;
      continue;
    }
    KvCache full_cache = base.new_cache();
    const BaseModelOutput full = base.forward_context(seq, full_cache);
    KvCache work = std::move(full_cache);
    for (std::size_t t = 1; t < seq.size(); ++t) {
      if (t + horizon - 1 > base.config().max_seq_len) {
        ++data.skipped;
        continue;
      }
      DistillExample ex;
      ex.context.assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(t));
      ex.h = preceding_hidden(full, t, d_model);
      // Earlier rollouts overwrote positions t-1 onward; rebuild from y_t.
      work.truncate(t - 1);
      const TokenId last[] = {seq[t - 1]};
      TokenId next = greedy_token(base.forward_context(last, work).logits, 0);
      for (std::size_t k = 0; k < horizon; ++k) {
        ex.teacher.push_back(next);
        if (k + 1 == horizon) break;
        const TokenId feed[] = {next};
        const BaseModelOutput o = base.forward_context(feed, work);
        next = greedy_token(o.logits, 0);
      }
      data.examples.push_back(std::move(ex));
    }
  }
  return data;
}

DistillDataset ground_truth_dataset(const BaseModel& base, std::span<const std::vector<TokenId>> corpus,
                                    std::size_t horizon) {
  if (horizon < 1) throw ConfigError("distill: horizon must be >= 1");
  DistillDataset data;
  data.horizon = horizon;
  const std::size_t d_model = base.config().d_model;
  for (const auto& seq : corpus) {
    if (seq.size() <= horizon) {
      ++data.skipped;
      continue;
    }
    KvCache cache = base.new_cache();
    const BaseModelOutput full = base.forward_context(seq, cache);
    for (std::size_t t = 1; t + horizon <= seq.size(); ++t) {
      DistillExample ex;
      ex.context.assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(t));
      ex.teacher.assign(seq.begin() + static_cast<std::ptrdiff_t>(t),
                        seq.begin() + static_cast<std::ptrdiff_t>(t + horizon));
      ex.h = preceding_hidden(full, t, d_model);
      data.examples.push_back(std::move(ex));
    }
  }
  return data;
}

double dataset_loss(const DistillDataset& data, const DrafterParams& params, const Matrix& embeddings) {
  if (data.examples.empty()) throw ContractError("dataset_loss: empty dataset");
  double total = 0;
  std::size_t tokens = 0;
  for (const auto& ex : data.examples) {
    total += static_cast<double>(sequence_loss<float>(ex.teacher, example_state(ex, embeddings), params,
                                                      embeddings));
    tokens += ex.teacher.size();
  }
  return total / static_cast<double>(tokens);
}

TrainResult train_drafter(const DistillDataset& data, const DrafterParams& init, const Matrix& embeddings,
                          const TrainConfig& cfg) {
  if (data.examples.empty()) throw ContractError("train_drafter: empty dataset");
  if (!(cfg.learning_rate >= 0.0f)) throw ConfigError("train_drafter: learning rate must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("train_drafter: batch size must be >= 1");
  check_drafter_shapes(init, embeddings);

  TrainResult result;
  result.params = init;
  result.initial_loss = dataset_loss(data, init, embeddings);
  DrafterParams& params = result.params;
  DrafterParams m = params.zeros_like();
  DrafterParams v = params.zeros_like();
  DrafterParams grad = params.zeros_like();

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t adam_step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the raw engine output keeps the order portable.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grad.for_each_tensor([](const std::string&, float* d, Eigen::Index n) { std::fill(d, d + n, 0.0f); });
      for (std::size_t idx = start; idx < end; ++idx) {
        const auto& ex = data.examples[order[idx]];
        const float weight = 1.0f / static_cast<float>((end - start) * ex.teacher.size());
        accumulate_gradients<float>(ex.teacher, example_state(ex, embeddings), params, embeddings, grad,
                                    weight);
      }
      ++adam_step;
      const float bias1 = 1.0f - std::pow(cfg.beta1, static_cast<float>(adam_step));
      const float bias2 = 1.0f - std::pow(cfg.beta2, static_cast<float>(adam_step));
      std::vector<float*> g_ptr, m_ptr, v_ptr;
      std::vector<Eigen::Index> sizes;
      grad.for_each_tensor([&](const std::string&, float* d, Eigen::Index n) {
        g_ptr.push_back(d);
        sizes.push_back(n);
      });
      m.for_each_tensor([&](const std::string&, float* d, Eigen::Index) { m_ptr.push_back(d); });
      v.for_each_tensor([&](const std::string&, float* d, Eigen::Index) { v_ptr.push_back(d); });
      std::size_t t = 0;
      params.for_each_tensor([&](const std::string&, float* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const float g = g_ptr[t][i];
          m_ptr[t][i] = cfg.beta1 * m_ptr[t][i] + (1.0f - cfg.beta1) * g;
          v_ptr[t][i] = cfg.beta2 * v_ptr[t][i] + (1.0f - cfg.beta2) * g * g;
          const float mhat = m_ptr[t][i] / bias1;
          const float vhat = v_ptr[t][i] / bias2;
          p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
        ++t;
      });
    }
    const double loss = dataset_loss(data, params, embeddings);
    if (!std::isfinite(loss)) {
      throw TrainingError("train_drafter: loss diverged at epoch " + std::to_string(epoch + 1));
    }
    result.epoch_loss.push_back(loss);
  }
  return result;
}

std::vector<double> empirical_kl(const BaseModel& base, const DraftModel& drafter,
                                 std::span<const std::vector<TokenId>> probe_contexts, std::size_t horizon) {
  std::vector<double> kl(horizon, 0.0);
  if (probe_contexts.empty()) return kl;
  const std::size_t d_model = base.config().d_model;
  for (const auto& ctx : probe_contexts) {
    if (ctx.empty()) throw ContractError("empirical_kl: empty probe context");
    KvCache cache = base.new_cache();
    BaseModelOutput out = base.forward_context(ctx, cache);
    const Vector h = preceding_hidden(out, ctx.size(), d_model);
    DrafterState state =
        drafter.begin(std::span<const TokenId>(ctx).first(ctx.size() - 1), h, ctx.back());
    Vector base_logits = out.logits.row(out.logits.rows() - 1).transpose();
    for (std::size_t k = 0; k < horizon; ++k) {
      if (k > 0) {
        const TokenId next = static_cast<TokenId>(argmax_tie_low(base_logits));
        state = drafter.advance(state, next);
        const TokenId feed[] = {next};
        out = base.forward_context(feed, cache);
        base_logits = out.logits.row(0).transpose();
      }
      const Vector base_logp = log_softmax(base_logits);
      const Vector draft_logp = drafter.log_probs(state);
      double sum = 0;
      for (Eigen::Index i = 0; i < base_logp.size(); ++i) {
        const double lp = base_logp(i);
        sum += std::exp(lp) * (lp - static_cast<double>(draft_logp(i)));
      }
      kl[k] += sum;
    }
  }
  for (double& v : kl) v /= static_cast<double>(probe_contexts.size());
  return kl;
}

std::vector<std::vector<TokenId>> synthetic_corpus(const CorpusSpec& spec) {
  if (spec.vocab_size < 2) throw ConfigError("synthetic_corpus: vocab too small");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t V = spec.vocab_size;
  // Cumulative transition distributions for every (prev, cur) pair.
  std::vector<double> cdf(V * V * V);
  for (std::size_t s = 0; s < V * V; ++s) {
    double total = 0;
    for (std::size_t j = 0; j < V; ++j) {
      total += std::exp(spec.logit_scale * normal(rng));
      cdf[s * V + j] = total;
    }
    for (std::size_t j = 0; j < V; ++j) cdf[s * V + j] /= total;
  }
  std::vector<std::vector<TokenId>> corpus;
  corpus.reserve(spec.sequences);
  for (std::size_t n = 0; n < spec.sequences; ++n) {
    std::vector<TokenId> seq;
    seq.reserve(spec.length);
    for (std::size_t i = 0; i < spec.length; ++i) {
      if (i < 2) {
        seq.push_back(static_cast<TokenId>(rng() % V));
        continue;
      }
      const std::size_t s = static_cast<std::size_t>(seq[i - 2]) * V + static_cast<std::size_t>(seq[i - 1]);
      const double u = unit(rng);
      std::size_t j = 0;
      while (j + 1 < V && cdf[s * V + j] < u) ++j;
      seq.push_back(static_cast<TokenId>(j));
    }
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

std::vector<std::vector<TokenId>> random_prompts(std::size_t vocab_size, std::size_t count,
                                                 std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<TokenId>> prompts(count);
  for (auto& p : prompts) {
    p.resize(length);
    for (auto& t : p) t = static_cast<TokenId>(rng() % vocab_size);
  }
  return prompts;
}

void write_dataset(const DistillDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write dataset " + path.string());
  for (const auto& ex : data.examples) {
    out << ex.context.size() << ' ' << ex.teacher.size();
    for (TokenId t : ex.context) out << ' ' << t;
    for (TokenId t : ex.teacher) out << ' ' << t;
    out << '\n';
  }
  if (!out) throw FormatError("failed writing dataset " + path.string());
}

DistillDataset read_dataset(const std::filesystem::path& path, const BaseModel& base) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset " + path.string());
  DistillDataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t ctx_len = 0, horizon = 0;
    if (!(fields >> ctx_len >> horizon) || ctx_len == 0 || horizon == 0) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": bad header");
    }
    if (data.horizon == 0) data.horizon = horizon;
    if (horizon != data.horizon) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": mixed horizons");
    }
    DistillExample ex;
    ex.context.resize(ctx_len);
    ex.teacher.resize(horizon);
    for (auto& t : ex.context) {
      if (!(fields >> t)) throw FormatError("dataset line " + std::to_string(line_no) + ": short record");
    }
    for (auto& t : ex.teacher) {
      if (!(fields >> t)) throw FormatError("dataset line " + std::to_string(line_no) + ": short record");
    }
    std::string extra;
    if (fields >> extra) throw FormatError("dataset line " + std::to_string(line_no) + ": trailing data");
    KvCache cache = base.new_cache();
    const BaseModelOutput out = base.forward_context(ex.context, cache);
    ex.h = preceding_hidden(out, ctx_len, base.config().d_model);
    data.examples.push_back(std::move(ex));
  }
  return data;
}

}  // namespace redraft
