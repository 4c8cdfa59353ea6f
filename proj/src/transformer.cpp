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

#include "redraft/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace redraft {
namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, float stddev) {
  std::normal_distribution<float> dist(0.0f, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, float stddev) {
  std::normal_distribution<float> dist(0.0f, stddev);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

void add_bias(Matrix& x, const Vector& bias) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) += bias(c);
  }
}

Matrix sinusoidal_table(std::size_t len, std::size_t d) {
  Matrix table(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(d));
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      table(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(i)) =
          static_cast<float>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return table;
}

void expect_shape(const char* name, Eigen::Index rows, Eigen::Index cols, std::size_t want_rows,
                  std::size_t want_cols) {
  if (rows != static_cast<Eigen::Index>(want_rows) || cols != static_cast<Eigen::Index>(want_cols)) {
    throw ShapeError(std::string("tensor ") + name + " has shape " + std::to_string(rows) + "," +
                     std::to_string(cols) + ", expected " + std::to_string(want_rows) + "," +
                     std::to_string(want_cols));
  }
}

}  // namespace

TransformerWeights random_transformer_weights(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto ff = static_cast<Eigen::Index>(cfg.d_ff);
  const auto vocab = static_cast<Eigen::Index>(cfg.vocab_size);
  const float proj_std = 1.0f / std::sqrt(static_cast<float>(d));
  TransformerWeights w;
  w.tok_embed = random_matrix(rng, vocab, d, 1.0f);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    TransformerLayer layer;
    layer.ln1_gain = Vector::Ones(d) + random_vector(rng, d, 0.1f);
    layer.ln1_bias = random_vector(rng, d, 0.1f);
    layer.wq = random_matrix(rng, d, d, proj_std);
    layer.wk = random_matrix(rng, d, d, proj_std);
    layer.wv = random_matrix(rng, d, d, proj_std);
    layer.wo = random_matrix(rng, d, d, proj_std);
    layer.bq = random_vector(rng, d, 0.02f);
    layer.bk = random_vector(rng, d, 0.02f);
    layer.bv = random_vector(rng, d, 0.02f);
    layer.bo = random_vector(rng, d, 0.02f);
    layer.ln2_gain = Vector::Ones(d) + random_vector(rng, d, 0.1f);
    layer.ln2_bias = random_vector(rng, d, 0.1f);
    layer.w1 = random_matrix(rng, d, ff, proj_std);
    layer.b1 = random_vector(rng, ff, 0.02f);
    layer.w2 = random_matrix(rng, ff, d, 1.0f / std::sqrt(static_cast<float>(ff)));
    layer.b2 = random_vector(rng, d, 0.02f);
    w.layers.push_back(std::move(layer));
  }
  w.lnf_gain = Vector::Ones(d);
  w.lnf_bias = Vector::Zero(d);
  w.lm_head = random_matrix(rng, d, vocab, proj_std * 2.0f);
  return w;
}

void check_transformer_shapes(const ModelConfig& cfg, const TransformerWeights& w) {
  const auto d = cfg.d_model, ff = cfg.d_ff, vocab = cfg.vocab_size;
  expect_shape("tok_embed", w.tok_embed.rows(), w.tok_embed.cols(), vocab, d);
  if (w.layers.size() != cfg.n_layers) throw ShapeError("layer count does not match n_layers");
  for (const auto& layer : w.layers) {
    expect_shape("ln1_gain", 1, layer.ln1_gain.size(), 1, d);
    expect_shape("ln1_bias", 1, layer.ln1_bias.size(), 1, d);
    expect_shape("wq", layer.wq.rows(), layer.wq.cols(), d, d);
    expect_shape("wk", layer.wk.rows(), layer.wk.cols(), d, d);
    expect_shape("wv", layer.wv.rows(), layer.wv.cols(), d, d);
    expect_shape("wo", layer.wo.rows(), layer.wo.cols(), d, d);
    expect_shape("bq", 1, layer.bq.size(), 1, d);
    expect_shape("bk", 1, layer.bk.size(), 1, d);
    expect_shape("bv", 1, layer.bv.size(), 1, d);
    expect_shape("bo", 1, layer.bo.size(), 1, d);
    expect_shape("ln2_gain", 1, layer.ln2_gain.size(), 1, d);
    expect_shape("ln2_bias", 1, layer.ln2_bias.size(), 1, d);
    expect_shape("w1", layer.w1.rows(), layer.w1.cols(), d, ff);
    expect_shape("b1", 1, layer.b1.size(), 1, ff);
    expect_shape("w2", layer.w2.rows(), layer.w2.cols(), ff, d);
    expect_shape("b2", 1, layer.b2.size(), 1, d);
  }
  expect_shape("lnf_gain", 1, w.lnf_gain.size(), 1, d);
  expect_shape("lnf_bias", 1, w.lnf_bias.size(), 1, d);
  expect_shape("lm_head", w.lm_head.rows(), w.lm_head.cols(), d, vocab);
}

TinyTransformer::TinyTransformer(ModelConfig cfg, TransformerWeights weights)
    : cfg_(cfg), w_(std::move(weights)) {
  cfg_.validate();
  check_transformer_shapes(cfg_, w_);
  position_table_ = sinusoidal_table(cfg_.max_seq_len, cfg_.d_model);
}

KvCache TinyTransformer::new_cache() const {
  KvCache cache;
  ensure_buffers(cache);
  return cache;
}

void TinyTransformer::ensure_buffers(KvCache& cache) const {
  if (cache.keys.size() == cfg_.n_layers) return;
  if (cache.committed_len() != 0) throw ContractError("cache has tokens but no key/value buffers");
  const auto rows = static_cast<Eigen::Index>(cfg_.max_seq_len);
  const auto d = static_cast<Eigen::Index>(cfg_.d_model);
  cache.keys.assign(cfg_.n_layers, Matrix::Zero(rows, d));
  cache.values.assign(cfg_.n_layers, Matrix::Zero(rows, d));
}

BaseModelOutput TinyTransformer::run(std::span<const TokenId> tokens,
                                     std::span<const std::size_t> positions,
                                     const std::vector<std::vector<int>>& visible,
                                     const KvCache& cache) const {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(cfg_.d_model);
  const auto head_dim = d / static_cast<Eigen::Index>(cfg_.n_heads);
  const auto ctx = static_cast<Eigen::Index>(cache.committed_len());
  const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));

  BaseModelOutput out;
  out.pending.keys.reserve(cfg_.n_layers);
  out.pending.values.reserve(cfg_.n_layers);

  Matrix x(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    x.row(r) = w_.tok_embed.row(tokens[static_cast<std::size_t>(r)]) +
               position_table_.row(static_cast<Eigen::Index>(positions[static_cast<std::size_t>(r)]));
  }

  std::vector<float> scores;
  for (std::size_t l = 0; l < w_.layers.size(); ++l) {
    const auto& layer = w_.layers[l];
    const Matrix a = layer_norm(x, layer.ln1_gain, layer.ln1_bias);
    Matrix q = matmul(a, layer.wq);
    add_bias(q, layer.bq);
    Matrix k = matmul(a, layer.wk);
    add_bias(k, layer.bk);
    Matrix v = matmul(a, layer.wv);
    add_bias(v, layer.bv);

    const Matrix* ctx_keys = cache.keys.empty() ? nullptr : &cache.keys[l];
    const Matrix* ctx_values = cache.values.empty() ? nullptr : &cache.values[l];
    Matrix attn = Matrix::Zero(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& rows = visible[static_cast<std::size_t>(r)];
      const auto n_heads = static_cast<Eigen::Index>(cfg_.n_heads);
      for (Eigen::Index h = 0; h < n_heads; ++h) {
        const Eigen::Index off = h * head_dim;
        const float* qr = q.data() + r * d + off;
        auto score = [&](const float* key) {
          float s = 0;
          for (Eigen::Index c = 0; c < head_dim; ++c) s += qr[c] * key[c];
          return s * scale;
        };
        scores.clear();
        for (Eigen::Index j = 0; j < ctx; ++j) scores.push_back(score(ctx_keys->data() + j * d + off));
        for (int j : rows) scores.push_back(score(k.data() + j * d + off));
        float mx = scores[0];
        for (float s : scores) mx = std::max(mx, s);
        float sum = 0;
        for (float& s : scores) {
          s = std::exp(s - mx);
          sum += s;
        }
        float* dst = attn.data() + r * d + off;
        std::size_t idx = 0;
        auto accumulate = [&](const float* value) {
          const float weight = scores[idx++] / sum;
          for (Eigen::Index c = 0; c < head_dim; ++c) dst[c] += weight * value[c];
        };
        for (Eigen::Index j = 0; j < ctx; ++j) accumulate(ctx_values->data() + j * d + off);
        for (int j : rows) accumulate(v.data() + j * d + off);
      }
    }
    Matrix o = matmul(attn, layer.wo);
    add_bias(o, layer.bo);
    x += o;

    const Matrix m = layer_norm(x, layer.ln2_gain, layer.ln2_bias);
    Matrix f = matmul(m, layer.w1);
    add_bias(f, layer.b1);
    f = f.unaryExpr([](float t) { return gelu(t); });
    Matrix g = matmul(f, layer.w2);
    add_bias(g, layer.b2);
    x += g;

    out.pending.keys.push_back(std::move(k));
    out.pending.values.push_back(std::move(v));
  }
  out.hidden = layer_norm(x, w_.lnf_gain, w_.lnf_bias);
  out.logits = matmul(out.hidden, w_.lm_head);
  return out;
}

void TinyTransformer::store_rows(KvCache& cache, const PendingKv& kv, Eigen::Index first_row,
                                 Eigen::Index count) const {
  const auto base = static_cast<Eigen::Index>(cache.committed_len());
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    cache.keys[l].middleRows(base, count) = kv.keys[l].middleRows(first_row, count);
    cache.values[l].middleRows(base, count) = kv.values[l].middleRows(first_row, count);
  }
}

BaseModelOutput TinyTransformer::forward_context(std::span<const TokenId> tokens,
                                                 KvCache& cache) const {
  check_tokens(tokens);
  check_capacity(cache.committed_len(), tokens.size());
  ensure_buffers(cache);
  const std::size_t ctx = cache.committed_len();
  std::vector<std::size_t> positions(tokens.size());
  std::vector<std::vector<int>> visible(tokens.size());
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    positions[r] = ctx + r;
    for (int j = 0; j <= static_cast<int>(r); ++j) visible[r].push_back(j);
  }
  BaseModelOutput out = run(tokens, positions, visible, cache);
  store_rows(cache, out.pending, 0, static_cast<Eigen::Index>(tokens.size()));
  cache.tokens.insert(cache.tokens.end(), tokens.begin(), tokens.end());
  out.pending = {};
  return out;
}

BaseModelOutput TinyTransformer::forward_packed(const PackedBeam& packed,
                                                const KvCache& cache) const {
  const std::size_t n = packed.size();
  if (packed.mask.n != n || packed.depths.size() != n || packed.parents.size() != n) {
    throw ShapeError("forward_packed: mask/packed size mismatch");
  }
  if (n == 0) {
    BaseModelOutput empty;
    empty.logits = Matrix(0, static_cast<Eigen::Index>(cfg_.vocab_size));
    empty.hidden = Matrix(0, static_cast<Eigen::Index>(cfg_.d_model));
    return empty;
  }
  if (cache.keys.size() != cfg_.n_layers) throw ContractError("forward_packed: cache not initialised");
  check_tokens(packed.tokens);
  const std::size_t ctx = cache.committed_len();
  const int max_depth = *std::max_element(packed.depths.begin(), packed.depths.end());
  check_capacity(ctx, static_cast<std::size_t>(max_depth));
  std::vector<std::size_t> positions(n);
  std::vector<std::vector<int>> visible(n);
  for (std::size_t a = 0; a < n; ++a) {
    positions[a] = ctx + static_cast<std::size_t>(packed.depths[a]) - 1;
    for (std::size_t b = 0; b <= a; ++b) {
      if (packed.mask.allowed(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) {
        visible[a].push_back(static_cast<int>(b));
      }
    }
  }
  return run(packed.tokens, positions, visible, cache);
}

VerifyOutput TinyTransformer::forward_verify(TokenId guaranteed, const PackedBeam& packed,
                                             KvCache& cache) const {
  const std::size_t n = packed.size();
  if (packed.mask.n != n || packed.depths.size() != n) {
    throw ShapeError("forward_verify: mask/packed size mismatch");
  }
  ensure_buffers(cache);
  const std::size_t ctx = cache.committed_len();
  int max_depth = 0;
  for (int dpt : packed.depths) max_depth = std::max(max_depth, dpt);
  check_capacity(ctx, 1 + static_cast<std::size_t>(max_depth));

  std::vector<TokenId> tokens;
  tokens.reserve(n + 1);
  tokens.push_back(guaranteed);
  tokens.insert(tokens.end(), packed.tokens.begin(), packed.tokens.end());
  check_tokens(tokens);

  std::vector<std::size_t> positions(n + 1);
  std::vector<std::vector<int>> visible(n + 1);
  positions[0] = ctx;
  visible[0] = {0};
  for (std::size_t a = 0; a < n; ++a) {
    positions[a + 1] = ctx + static_cast<std::size_t>(packed.depths[a]);
    visible[a + 1].push_back(0);
    for (std::size_t b = 0; b <= a; ++b) {
      if (packed.mask.allowed(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) {
        visible[a + 1].push_back(static_cast<int>(b + 1));
      }
    }
  }
  BaseModelOutput all = run(tokens, positions, visible, cache);

  VerifyOutput out;
  out.guaranteed_logits = all.logits.row(0).transpose();
  out.guaranteed_hidden = all.hidden.row(0).transpose();
  store_rows(cache, all.pending, 0, 1);
  cache.tokens.push_back(guaranteed);

  const auto rows = static_cast<Eigen::Index>(n);
  out.packed.logits = all.logits.bottomRows(rows);
  out.packed.hidden = all.hidden.bottomRows(rows);
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    out.packed.pending.keys.push_back(all.pending.keys[l].bottomRows(rows));
    out.packed.pending.values.push_back(all.pending.values[l].bottomRows(rows));
  }
  return out;
}

}  // namespace redraft
