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

#include "redraft/drafter.hpp"

#include <random>

#include "redraft/weights_io.hpp"

namespace redraft {

DrafterDims drafter_dims_for(const BaseModel& base, std::size_t mlp_layers) {
  DrafterDims dims;
  dims.vocab_size = base.config().vocab_size;
  dims.hidden_dim = base.config().d_model;
  dims.embed_dim = static_cast<std::size_t>(base.token_embeddings().cols());
  dims.state_dim = dims.embed_dim;
  dims.mlp_layers = mlp_layers;
  return dims;
}

DrafterParams init_drafter_params(const DrafterDims& dims, std::uint64_t seed, float init_std) {
  if (dims.state_dim != dims.embed_dim) {
    throw ShapeError("drafter state width " + std::to_string(dims.state_dim) +
                     " must equal embedding width " + std::to_string(dims.embed_dim) +
                     " (the first state is the last token's embedding)");
  }
  if (dims.vocab_size < 2 || dims.state_dim == 0) throw ConfigError("drafter: degenerate dims");
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, init_std);
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  };
  const auto ds = static_cast<Eigen::Index>(dims.state_dim);
  const auto dg = static_cast<Eigen::Index>(dims.state_dim + dims.hidden_dim);
  DrafterParams p;
  p.U.resize(ds, ds);
  p.W.resize(ds, static_cast<Eigen::Index>(dims.embed_dim));
  p.b = Vector::Zero(ds);
  fill(p.U);
  fill(p.W);
  for (std::size_t l = 0; l < dims.mlp_layers; ++l) {
    Matrix m(dg, dg);
    fill(m);
    p.mlp_weight.push_back(std::move(m));
    p.mlp_bias.push_back(Vector::Zero(dg));
  }
  p.out_proj.resize(static_cast<Eigen::Index>(dims.vocab_size), dg);
  fill(p.out_proj);
  return p;
}

void check_drafter_shapes(const DrafterParams& p, const Matrix& embeddings) {
  const auto ds = p.U.rows();
  if (p.U.cols() != ds || p.W.rows() != ds || p.b.size() != ds) {
    throw ShapeError("drafter: U, W, b disagree on the state width");
  }
  if (p.W.cols() != embeddings.cols() || ds != embeddings.cols()) {
    throw ShapeError("drafter: state/embedding width " + std::to_string(ds) + " vs embedding table width " +
                     std::to_string(embeddings.cols()));
  }
  if (p.out_proj.rows() != embeddings.rows()) throw ShapeError("drafter: vocab mismatch with embeddings");
  const auto dg = p.out_proj.cols();
  if (dg <= ds) throw ShapeError("drafter: head width must exceed the state width");
  if (p.mlp_weight.size() != p.mlp_bias.size()) throw ShapeError("drafter: mlp weight/bias count");
  for (std::size_t l = 0; l < p.mlp_weight.size(); ++l) {
    if (p.mlp_weight[l].rows() != dg || p.mlp_weight[l].cols() != dg || p.mlp_bias[l].size() != dg) {
      throw ShapeError("drafter: mlp layer " + std::to_string(l) + " shape");
    }
  }
}

RnnDrafter::RnnDrafter(const DrafterParams& params, const Matrix& embeddings)
    : params_(&params), embeddings_(&embeddings) {
  check_drafter_shapes(params, embeddings);
}

DrafterState RnnDrafter::begin(std::span<const TokenId>, const Vector& h, TokenId last_token) const {
  if (static_cast<std::size_t>(h.size()) != params_->hidden_dim()) {
    throw ShapeError("drafter: hidden state width " + std::to_string(h.size()) + ", expected " +
                     std::to_string(params_->hidden_dim()));
  }
  return init_state(h, last_token, *embeddings_);
}

DrafterState RnnDrafter::advance(const DrafterState& state, TokenId token) const {
  return step(state, token, *params_, *embeddings_);
}

Vector RnnDrafter::log_probs(const DrafterState& state) const { return head_logp(state, *params_); }

DrafterState MirrorDrafter::begin(std::span<const TokenId> context, const Vector& h,
                                  TokenId last_token) const {
  DrafterState st;
  st.h = h;
  st.history.assign(context.begin(), context.end());
  st.history.push_back(last_token);
  return st;
}

DrafterState MirrorDrafter::advance(const DrafterState& state, TokenId token) const {
  DrafterState next = state;
  next.history.push_back(token);
  return next;
}

Vector MirrorDrafter::log_probs(const DrafterState& state) const {
  KvCache cache = base_->new_cache();
  const BaseModelOutput out = base_->forward_context(state.history, cache);
  const Vector logits = out.logits.row(out.logits.rows() - 1).transpose();
  if (mode_ == Mode::kDistribution) return log_softmax(logits);
  Vector logp = Vector::Constant(logits.size(), kGreedyFloor);
  logp(static_cast<Eigen::Index>(argmax_tie_low(logits))) = 0.0f;
  return logp;
}

void save_drafter(const DrafterParams& params, std::size_t horizon, const std::filesystem::path& prefix) {
  WeightFile file;
  file.magic = kDrafterWeightsMagic;
  file.attributes["horizon"] = std::to_string(horizon);
  file.attributes["vocab_size"] = std::to_string(params.vocab_size());
  file.attributes["state_dim"] = std::to_string(params.state_dim());
  file.attributes["hidden_dim"] = std::to_string(params.hidden_dim());
  file.attributes["mlp_layers"] = std::to_string(params.mlp_layers());
  file.attributes["activation"] = "silu";
  file.add("U", params.U);
  file.add("W", params.W);
  file.add("b", params.b.transpose());
  for (std::size_t l = 0; l < params.mlp_layers(); ++l) {
    file.add("mlp." + std::to_string(l) + ".weight", params.mlp_weight[l]);
    file.add("mlp." + std::to_string(l) + ".bias", params.mlp_bias[l].transpose());
  }
  file.add("out_proj", params.out_proj);
  write_weight_file(prefix, file);
}

DrafterParams load_drafter(const std::filesystem::path& prefix, std::size_t* horizon) {
  const WeightFile file = read_weight_file(prefix, kDrafterWeightsMagic);
  const auto vocab = static_cast<Eigen::Index>(file.size_attribute("vocab_size"));
  const auto ds = static_cast<Eigen::Index>(file.size_attribute("state_dim"));
  const auto dh = static_cast<Eigen::Index>(file.size_attribute("hidden_dim"));
  const std::size_t layers = file.size_attribute("mlp_layers");
  if (horizon != nullptr) *horizon = file.size_attribute("horizon");
  DrafterParams p;
  p.U = file.tensor("U", ds, ds);
  p.W = file.tensor("W", ds, ds);
  p.b = file.tensor("b", 1, ds).transpose();
  for (std::size_t l = 0; l < layers; ++l) {
    p.mlp_weight.push_back(file.tensor("mlp." + std::to_string(l) + ".weight", ds + dh, ds + dh));
    p.mlp_bias.push_back(file.tensor("mlp." + std::to_string(l) + ".bias", 1, ds + dh).transpose());
  }
  p.out_proj = file.tensor("out_proj", vocab, ds + dh);
  return p;
}

}  // namespace redraft
