// Copyright 2026 BiteNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "bitenet/graph.hpp"
#include "bitenet/mask.hpp"
#include "bitenet/ops.hpp"
#include "bitenet/random.hpp"

namespace bitenet {

/// How a parameter matrix should be initialized.
enum class ParamKind { kWeight, kBias, kGain, kTable };

/// Binds persistent parameter matrices into a graph, one leaf per matrix.
/// Re-binding the same matrix returns the same leaf, so gradients from every
/// use in the pass accumulate on it.
template <typename Scalar>
class ParamBinder {
 public:
  explicit ParamBinder(Graph<Scalar>& graph) : graph_(&graph) {}

  Tensor<Scalar> operator()(const DenseMatrix<Scalar>& storage) {
    auto it = cache_.find(&storage);
    if (it != cache_.end()) return it->second;
    Tensor<Scalar> t = graph_->variable(storage);
    cache_.emplace(&storage, t);
    return t;
  }

  /// Pre-associates a storage matrix with an existing tensor (used by the
  /// gradient checker to route leaves it perturbs).
  void preload(const DenseMatrix<Scalar>& storage, Tensor<Scalar> t) {
    cache_[&storage] = t;
  }

  bool bound(const DenseMatrix<Scalar>& storage) const {
    return cache_.count(&storage) > 0;
  }

  /// Gradient of the leaf bound to `storage`; zero if the parameter never
  /// participated in the pass.
  DenseMatrix<Scalar> grad_of(const DenseMatrix<Scalar>& storage) const {
    auto it = cache_.find(&storage);
    if (it == cache_.end())
      return DenseMatrix<Scalar>::Zero(storage.rows(), storage.cols());
    return it->second.grad();
  }

 private:
  Graph<Scalar>* graph_;
  std::unordered_map<const void*, Tensor<Scalar>> cache_;
};

/// Per-head query/key/value projections plus the output projection.
template <typename Scalar>
struct MultiHeadParams {
  struct Head {
    DenseMatrix<Scalar> Wq, Wk, Wv;  // d x d_head
  };
  std::vector<Head> heads;
  DenseMatrix<Scalar> Wo;  // (h * d_head) x d

  int head_count() const { return static_cast<int>(heads.size()); }
  Eigen::Index model_dim() const { return Wo.cols(); }
  Eigen::Index head_dim() const { return heads.empty() ? 0 : heads.front().Wq.cols(); }

  static MultiHeadParams sized(Eigen::Index d, int h) {
    if (h < 1 || d % h != 0)
      throw std::invalid_argument("multi-head: d must be divisible by h");
    MultiHeadParams p;
    const Eigen::Index dk = d / h;
    p.heads.resize(static_cast<std::size_t>(h));
    for (auto& head : p.heads) {
      head.Wq.setZero(d, dk);
      head.Wk.setZero(d, dk);
      head.Wv.setZero(d, dk);
    }
    p.Wo.setZero(d, d);
    return p;
  }

  template <typename Self, typename F>
  static void visit_impl(Self& self, const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < self.heads.size(); ++i) {
      const std::string h = prefix + ".head" + std::to_string(i);
      f(h + ".Wq", self.heads[i].Wq, ParamKind::kWeight);
      f(h + ".Wk", self.heads[i].Wk, ParamKind::kWeight);
      f(h + ".Wv", self.heads[i].Wv, ParamKind::kWeight);
    }
    f(prefix + ".Wo", self.Wo, ParamKind::kWeight);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    visit_impl(*this, prefix, f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    visit_impl(*this, prefix, f);
  }
};

/// Additive attention-pooling parameters: score(v) = w' tanh(W1 v + b1) + b.
template <typename Scalar>
struct PoolingParams {
  DenseMatrix<Scalar> W1;  // d x d
  DenseMatrix<Scalar> b1;  // 1 x d
  DenseMatrix<Scalar> w;   // d x 1
  DenseMatrix<Scalar> b;   // 1 x 1

  static PoolingParams sized(Eigen::Index d) {
    PoolingParams p;
    p.W1.setZero(d, d);
    p.b1.setZero(1, d);
    p.w.setZero(d, 1);
    p.b.setZero(1, 1);
    return p;
  }

  template <typename Self, typename F>
  static void visit_impl(Self& self, const std::string& prefix, F&& f) {
    f(prefix + ".W1", self.W1, ParamKind::kWeight);
    f(prefix + ".b1", self.b1, ParamKind::kBias);
    f(prefix + ".w", self.w, ParamKind::kWeight);
    f(prefix + ".b", self.b, ParamKind::kBias);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    visit_impl(*this, prefix, f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    visit_impl(*this, prefix, f);
  }
};

/// One masked encoder block: multi-head self-attention and a position-wise
/// feed-forward net, each wrapped in dropout + residual + layer norm.
template <typename Scalar>
struct MasEncParams {
  MultiHeadParams<Scalar> attention;
  DenseMatrix<Scalar> ffn_W1;  // d x d_ff
  DenseMatrix<Scalar> ffn_b1;  // 1 x d_ff
  DenseMatrix<Scalar> ffn_W2;  // d_ff x d
  DenseMatrix<Scalar> ffn_b2;  // 1 x d
  DenseMatrix<Scalar> ln1_gain, ln1_bias;  // 1 x d
  DenseMatrix<Scalar> ln2_gain, ln2_bias;  // 1 x d

  static MasEncParams sized(Eigen::Index d, int h, Eigen::Index d_ff) {
    MasEncParams p;
    p.attention = MultiHeadParams<Scalar>::sized(d, h);
    p.ffn_W1.setZero(d, d_ff);
    p.ffn_b1.setZero(1, d_ff);
    p.ffn_W2.setZero(d_ff, d);
    p.ffn_b2.setZero(1, d);
    p.ln1_gain.setOnes(1, d);
    p.ln1_bias.setZero(1, d);
    p.ln2_gain.setOnes(1, d);
    p.ln2_bias.setZero(1, d);
    return p;
  }

  template <typename Self, typename F>
  static void visit_impl(Self& self, const std::string& prefix, F&& f) {
    self.attention.visit(prefix + ".mha", f);
    f(prefix + ".ffn_W1", self.ffn_W1, ParamKind::kWeight);
    f(prefix + ".ffn_b1", self.ffn_b1, ParamKind::kBias);
    f(prefix + ".ffn_W2", self.ffn_W2, ParamKind::kWeight);
    f(prefix + ".ffn_b2", self.ffn_b2, ParamKind::kBias);
    f(prefix + ".ln1_gain", self.ln1_gain, ParamKind::kGain);
    f(prefix + ".ln1_bias", self.ln1_bias, ParamKind::kBias);
    f(prefix + ".ln2_gain", self.ln2_gain, ParamKind::kGain);
    f(prefix + ".ln2_bias", self.ln2_bias, ParamKind::kBias);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    visit_impl(*this, prefix, f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    visit_impl(*this, prefix, f);
  }
};

template <typename Scalar>
struct AttentionResult {
  Tensor<Scalar> output;   // m x d_v
  Tensor<Scalar> weights;  // m x m, rows sum to 1 (or 0 when fully masked)
};

/// Scaled dot-product attention with an additive temporal mask:
/// weights = softmax(Q K' / sqrt(d) + M), output = weights V.
/// The scale uses the width of Q/K as passed, so per-head calls scale by
/// sqrt(d_head).
template <typename Scalar>
AttentionResult<Scalar> masked_attention(const Tensor<Scalar>& Q,
                                         const Tensor<Scalar>& K,
                                         const Tensor<Scalar>& V,
                                         const AttentionMask<Scalar>* mask) {
  detail::check(Q.cols() == K.cols(), "masked_attention: Q/K width mismatch");
  detail::check(Q.rows() == K.rows() && K.rows() == V.rows(),
                "masked_attention: Q/K/V row mismatch");
  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(static_cast<Scalar>(Q.cols()));
  Tensor<Scalar> scores = scale(matmul(Q, transpose(K)), inv_sqrt_d);
  Tensor<Scalar> weights = row_softmax(scores, mask);
  return {matmul(weights, V), weights};
}

template <typename Scalar>
Tensor<Scalar> multi_head(const Tensor<Scalar>& x, const AttentionMask<Scalar>* mask,
                          const MultiHeadParams<Scalar>& p, ParamBinder<Scalar>& bind) {
  detail::check(!p.heads.empty(), "multi_head: no heads");
  detail::check(x.cols() == p.heads.front().Wq.rows(),
                "multi_head: input width does not match projections");
  std::vector<Tensor<Scalar>> outs;
  outs.reserve(p.heads.size());
  for (const auto& head : p.heads) {
    Tensor<Scalar> q = matmul(x, bind(head.Wq));
    Tensor<Scalar> k = matmul(x, bind(head.Wk));
    Tensor<Scalar> v = matmul(x, bind(head.Wv));
    outs.push_back(masked_attention(q, k, v, mask).output);
  }
  Tensor<Scalar> cat = outs.size() == 1 ? outs.front() : concat_cols(outs);
  return matmul(cat, bind(p.Wo));
}

template <typename Scalar>
struct PoolingResult {
  Tensor<Scalar> output;   // 1 x d
  Tensor<Scalar> weights;  // 1 x m, a distribution over valid positions
};

/// Query-free additive attention pooling over the valid rows of `seq`.
template <typename Scalar>
PoolingResult<Scalar> attention_pooling(const Tensor<Scalar>& seq,
                                        const std::vector<char>& valid,
                                        const PoolingParams<Scalar>& p,
                                        ParamBinder<Scalar>& bind) {
  detail::check(static_cast<Eigen::Index>(valid.size()) == seq.rows(),
                "attention_pooling: validity length mismatch");
  bool any = false;
  for (char v : valid) any = any || (v != 0);
  detail::check(any, "attention_pooling: all positions invalid");
  Tensor<Scalar> hidden = bitenet::tanh(affine(seq, bind(p.W1), bind(p.b1)));
  Tensor<Scalar> score = add_scalar(matmul(hidden, bind(p.w)), bind(p.b));  // m x 1
  AttentionMask<Scalar> vm = row_validity_mask<Scalar>(valid);
  Tensor<Scalar> weights = row_softmax(transpose(score), &vm);  // 1 x m
  return {matmul(weights, seq), weights};
}

/// MasEnc block: LayerNorm(x + Dropout(MultiHead(x))) then
/// LayerNorm(y + Dropout(FFN(y))).
template <typename Scalar>
Tensor<Scalar> masenc_block(const Tensor<Scalar>& x, const AttentionMask<Scalar>* mask,
                            const MasEncParams<Scalar>& p, ParamBinder<Scalar>& bind,
                            Scalar dropout_rate, bool training, Rng& rng) {
  Tensor<Scalar> attn = multi_head(x, mask, p.attention, bind);
  attn = dropout(attn, dropout_rate, training, rng);
  Tensor<Scalar> y1 =
      layer_norm(add(x, attn), bind(p.ln1_gain), bind(p.ln1_bias));
  Tensor<Scalar> f =
      affine(relu(affine(y1, bind(p.ffn_W1), bind(p.ffn_b1))), bind(p.ffn_W2),
             bind(p.ffn_b2));
  f = dropout(f, dropout_rate, training, rng);
  return layer_norm(add(y1, f), bind(p.ln2_gain), bind(p.ln2_bias));
}

}  // namespace bitenet
