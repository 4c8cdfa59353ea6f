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
#include <string>
#include <vector>

#include "redraft/base_model.hpp"
#include "redraft/numerics.hpp"

namespace redraft {

// Recurrent draft head. The recurrent state is s; the head input is
// [s, h] with h the base model's last-layer hidden state for the decode step.
//   s_1     = embedding(last_token)
//   s_{k+1} = silu(U s_k + W embedding(token_k) + b)
//   x_0     = [s_k, h];  x_{l+1} = x_l + silu(M_l x_l + c_l)
//   logp    = log_softmax(out_proj x_L)
template <typename Scalar>
struct DrafterParamsT {
  MatrixX<Scalar> U;  // state_dim x state_dim
  MatrixX<Scalar> W;  // state_dim x embed_dim
  VectorX<Scalar> b;  // state_dim
  std::vector<MatrixX<Scalar>> mlp_weight;  // head_dim x head_dim each
  std::vector<VectorX<Scalar>> mlp_bias;    // head_dim each
  MatrixX<Scalar> out_proj;                 // vocab x head_dim

  std::size_t state_dim() const { return static_cast<std::size_t>(U.rows()); }
  std::size_t embed_dim() const { return static_cast<std::size_t>(W.cols()); }
  std::size_t head_dim() const { return static_cast<std::size_t>(out_proj.cols()); }
  std::size_t hidden_dim() const { return head_dim() - state_dim(); }
  std::size_t vocab_size() const { return static_cast<std::size_t>(out_proj.rows()); }
  std::size_t mlp_layers() const { return mlp_weight.size(); }

  template <typename T>
  DrafterParamsT<T> cast() const {
    DrafterParamsT<T> out;
    out.U = U.template cast<T>();
    out.W = W.template cast<T>();
    out.b = b.template cast<T>();
    for (const auto& m : mlp_weight) out.mlp_weight.push_back(m.template cast<T>());
    for (const auto& v : mlp_bias) out.mlp_bias.push_back(v.template cast<T>());
    out.out_proj = out_proj.template cast<T>();
    return out;
  }

  DrafterParamsT zeros_like() const {
    DrafterParamsT out = *this;
    out.for_each_tensor([](const std::string&, Scalar* data, Eigen::Index n) {
      std::fill(data, data + n, Scalar(0));
    });
    return out;
  }

  // Visits every trainable tensor as (name, flat data, size) in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) {
    f("U", U.data(), U.size());
    f("W", W.data(), W.size());
    f("b", b.data(), b.size());
    for (std::size_t l = 0; l < mlp_weight.size(); ++l) {
      f("mlp." + std::to_string(l) + ".weight", mlp_weight[l].data(), mlp_weight[l].size());
      f("mlp." + std::to_string(l) + ".bias", mlp_bias[l].data(), mlp_bias[l].size());
    }
    f("out_proj", out_proj.data(), out_proj.size());
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<DrafterParamsT*>(this)->for_each_tensor(
        [&f](const std::string& name, Scalar* data, Eigen::Index n) {
          f(name, static_cast<const Scalar*>(data), n);
        });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&n](const std::string&, const Scalar*, Eigen::Index size) {
      n += static_cast<std::size_t>(size);
    });
    return n;
  }

  bool operator==(const DrafterParamsT& o) const {
    if (mlp_weight.size() != o.mlp_weight.size()) return false;
    for (std::size_t l = 0; l < mlp_weight.size(); ++l) {
      if (mlp_weight[l] != o.mlp_weight[l] || mlp_bias[l] != o.mlp_bias[l]) return false;
    }
    return U == o.U && W == o.W && b == o.b && out_proj == o.out_proj;
  }
};

using DrafterParams = DrafterParamsT<float>;

struct DrafterDims {
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 0;  // base model d_model
  std::size_t state_dim = 0;   // must equal the embedding width
  std::size_t embed_dim = 0;
  std::size_t mlp_layers = 2;
};

// Dims for a drafter attached to `base` (state width = embedding width).
DrafterDims drafter_dims_for(const BaseModel& base, std::size_t mlp_layers = 2);

// Seeded N(0, init_std) initialisation. Rejects state_dim != embed_dim.
DrafterParams init_drafter_params(const DrafterDims& dims, std::uint64_t seed, float init_std = 0.05f);

// Throws ShapeError if params and the embedding table disagree.
void check_drafter_shapes(const DrafterParams& params, const Matrix& embeddings);

template <typename Scalar>
struct DrafterStateT {
  VectorX<Scalar> s;
  VectorX<Scalar> h;
  // Tokens seen since the start of the decode step; only used by drafters
  // that need the full context (see MirrorDrafter).
  std::vector<TokenId> history;
};

using DrafterState = DrafterStateT<float>;

namespace detail {
template <typename Scalar>
void check_token(TokenId token, const MatrixX<Scalar>& embeddings) {
  if (token < 0 || token >= embeddings.rows()) {
    throw VocabError("drafter: token " + std::to_string(token) + " outside vocabulary of " +
                     std::to_string(embeddings.rows()));
  }
}
}  // namespace detail

template <typename Scalar>
DrafterStateT<Scalar> init_state(const VectorX<Scalar>& h, TokenId last_token,
                                 const MatrixX<Scalar>& embeddings) {
  detail::check_token(last_token, embeddings);
  DrafterStateT<Scalar> st;
  st.s = embeddings.row(last_token).transpose();
  st.h = h;
  return st;
}

template <typename Scalar>
DrafterStateT<Scalar> step(const DrafterStateT<Scalar>& state, TokenId token,
                           const DrafterParamsT<Scalar>& params, const MatrixX<Scalar>& embeddings) {
  detail::check_token(token, embeddings);
  DrafterStateT<Scalar> next;
  const VectorX<Scalar> pre =
      params.U * state.s + params.W * embeddings.row(token).transpose() + params.b;
  next.s = silu(pre);
  next.h = state.h;
  return next;
}

// Raw logits of the head before normalisation.
template <typename Scalar>
VectorX<Scalar> head_logits(const DrafterStateT<Scalar>& state, const DrafterParamsT<Scalar>& params) {
  if (static_cast<std::size_t>(state.s.size()) != params.state_dim() ||
      static_cast<std::size_t>(state.s.size() + state.h.size()) != params.head_dim()) {
    throw ShapeError("drafter head: state [" + std::to_string(state.s.size()) + "+" +
                     std::to_string(state.h.size()) + "] does not match head width " +
                     std::to_string(params.head_dim()));
  }
  VectorX<Scalar> x(params.head_dim());
  x << state.s, state.h;
  for (std::size_t l = 0; l < params.mlp_layers(); ++l) {
    const VectorX<Scalar> pre = params.mlp_weight[l] * x + params.mlp_bias[l];
    x += silu(pre);
  }
  return params.out_proj * x;
}

template <typename Scalar>
VectorX<Scalar> head_logp(const DrafterStateT<Scalar>& state, const DrafterParamsT<Scalar>& params) {
  return log_softmax(head_logits(state, params));
}

template <typename Scalar>
struct DrafterGradT {
  Scalar loss = 0;
  DrafterParamsT<Scalar> grad;
};

// Teacher-forced loss sum_k -logp_k[teacher_k] over T = teacher.size()
// recurrence steps from state0 (step k feeds teacher[k-1]); reverse-mode
// gradients are added into `grad` scaled by `weight`. Embeddings are frozen.
// Returns the unscaled loss.
template <typename Scalar>
Scalar accumulate_gradients(std::span<const TokenId> teacher, const DrafterStateT<Scalar>& state0,
                            const DrafterParamsT<Scalar>& params, const MatrixX<Scalar>& embeddings,
                            DrafterParamsT<Scalar>& grad, Scalar weight) {
  if (teacher.empty()) throw ContractError("drafter backward: empty teacher sequence");
  for (TokenId t : teacher) detail::check_token(t, embeddings);
  if (static_cast<std::size_t>(state0.s.size()) != params.state_dim() ||
      static_cast<std::size_t>(state0.s.size() + state0.h.size()) != params.head_dim()) {
    throw ShapeError("drafter backward: initial state does not match params");
  }
  const std::size_t T = teacher.size();
  const std::size_t L = params.mlp_layers();
  const auto ds = static_cast<Eigen::Index>(params.state_dim());
  const auto dg = static_cast<Eigen::Index>(params.head_dim());

  // Forward pass, keeping everything the reverse sweep needs.
  std::vector<VectorX<Scalar>> s(T), rnn_pre(T);
  std::vector<std::vector<VectorX<Scalar>>> xs(T), mlp_pre(T);
  std::vector<VectorX<Scalar>> probs(T);
  Scalar loss = 0;
  s[0] = state0.s;
  for (std::size_t k = 0; k < T; ++k) {
    if (k > 0) {
      rnn_pre[k] = params.U * s[k - 1] + params.W * embeddings.row(teacher[k - 1]).transpose() +
                   params.b;
      s[k] = silu(rnn_pre[k]);
    }
    xs[k].resize(L + 1);
    mlp_pre[k].resize(L);
    xs[k][0].resize(dg);
    xs[k][0] << s[k], state0.h;
    for (std::size_t l = 0; l < L; ++l) {
      mlp_pre[k][l] = params.mlp_weight[l] * xs[k][l] + params.mlp_bias[l];
      xs[k][l + 1] = xs[k][l] + silu(mlp_pre[k][l]);
    }
    const VectorX<Scalar> logp = log_softmax(params.out_proj * xs[k][L]);
    loss -= logp(teacher[k]);
    probs[k] = logp.array().exp().matrix();
  }

  // Reverse sweep: head per step, then back through the recurrence.
  VectorX<Scalar> ds_carry = VectorX<Scalar>::Zero(ds);
  for (std::size_t kk = T; kk-- > 0;) {
    VectorX<Scalar> dz = probs[kk];
    dz(teacher[kk]) -= Scalar(1);
    dz *= weight;
    grad.out_proj.noalias() += dz * xs[kk][L].transpose();
    VectorX<Scalar> dx = params.out_proj.transpose() * dz;
    for (std::size_t l = L; l-- > 0;) {
      const VectorX<Scalar> dpre =
          dx.cwiseProduct(mlp_pre[kk][l].unaryExpr([](Scalar v) { return silu_grad(v); }));
      grad.mlp_weight[l].noalias() += dpre * xs[kk][l].transpose();
      grad.mlp_bias[l] += dpre;
      dx.noalias() += params.mlp_weight[l].transpose() * dpre;
    }
    // h is frozen; only the state half of the head input flows back.
    VectorX<Scalar> ds_k = ds_carry + dx.head(ds);
    if (kk == 0) break;  // s_1 is the frozen embedding of the last token.
    const VectorX<Scalar> dpre =
        ds_k.cwiseProduct(rnn_pre[kk].unaryExpr([](Scalar v) { return silu_grad(v); }));
    grad.U.noalias() += dpre * s[kk - 1].transpose();
    grad.W.noalias() += dpre * embeddings.row(teacher[kk - 1]);
    grad.b += dpre;
    ds_carry = params.U.transpose() * dpre;
  }
  return loss;
}

// Loss and gradients for one teacher sequence (unscaled sum over steps).
template <typename Scalar>
DrafterGradT<Scalar> backward(std::span<const TokenId> teacher, const DrafterStateT<Scalar>& state0,
                              const DrafterParamsT<Scalar>& params,
                              const MatrixX<Scalar>& embeddings) {
  DrafterGradT<Scalar> out;
  out.grad = params.zeros_like();
  out.loss = accumulate_gradients(teacher, state0, params, embeddings, out.grad, Scalar(1));
  return out;
}

// Forward-only version of the teacher-forced loss.
template <typename Scalar>
Scalar sequence_loss(std::span<const TokenId> teacher, const DrafterStateT<Scalar>& state0,
                     const DrafterParamsT<Scalar>& params, const MatrixX<Scalar>& embeddings) {
  if (teacher.empty()) throw ContractError("drafter loss: empty teacher sequence");
  Scalar loss = 0;
  DrafterStateT<Scalar> st = state0;
  for (std::size_t k = 0; k < teacher.size(); ++k) {
    if (k > 0) st = step(st, teacher[k - 1], params, embeddings);
    loss -= head_logp(st, params)(teacher[k]);
  }
  return loss;
}

// Anything beam search can query for next-token log-probabilities.
class DraftModel {
 public:
  virtual ~DraftModel() = default;
  virtual std::size_t vocab_size() const = 0;
  // `context` is the committed text, `h` the base hidden state at its last
  // position and `last_token` the base model's next (guaranteed) token.
  virtual DrafterState begin(std::span<const TokenId> context, const Vector& h,
                             TokenId last_token) const = 0;
  virtual DrafterState advance(const DrafterState& state, TokenId token) const = 0;
  virtual Vector log_probs(const DrafterState& state) const = 0;
};

// The recurrent head. Holds non-owning references; both must outlive it.
class RnnDrafter final : public DraftModel {
 public:
  RnnDrafter(const DrafterParams& params, const Matrix& embeddings);

  std::size_t vocab_size() const override { return params_->vocab_size(); }
  DrafterState begin(std::span<const TokenId> context, const Vector& h,
                     TokenId last_token) const override;
  DrafterState advance(const DrafterState& state, TokenId token) const override;
  Vector log_probs(const DrafterState& state) const override;

 private:
  const DrafterParams* params_;
  const Matrix* embeddings_;
};

// Test double that replays the full history through the base model.
//
// kDistribution returns the base model's own next-token distribution, which
// makes the drafter's KL to the base exactly zero. kGreedy puts all the mass
// on the base model's greedy token (every other token gets kGreedyFloor), so
// the greedy continuation is always the top beam and is accepted in full.
// Only kGreedy is a perfect drafter at beam_width > 1: with the soft
// distribution, beam search ranks by cumulative log-probability and can drop
// the greedy path when the base is not confident.
class MirrorDrafter final : public DraftModel {
 public:
  enum class Mode { kDistribution, kGreedy };
  static constexpr float kGreedyFloor = -1.0e4f;

  explicit MirrorDrafter(const BaseModel& base, Mode mode = Mode::kDistribution) : base_(&base), mode_(mode) {}

  std::size_t vocab_size() const override { return base_->config().vocab_size; }
  DrafterState begin(std::span<const TokenId> context, const Vector& h,
                     TokenId last_token) const override;
  DrafterState advance(const DrafterState& state, TokenId token) const override;
  Vector log_probs(const DrafterState& state) const override;

 private:
  const BaseModel* base_;
  Mode mode_;
};

// Drafter weights share the base manifest+blob format, with their own magic
// and the training horizon in the header.
void save_drafter(const DrafterParams& params, std::size_t horizon, const std::filesystem::path& prefix);
DrafterParams load_drafter(const std::filesystem::path& prefix, std::size_t* horizon = nullptr);

}  // namespace redraft
