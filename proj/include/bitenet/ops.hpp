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

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitenet/graph.hpp"
#include "bitenet/mask.hpp"
#include "bitenet/random.hpp"

namespace bitenet {

namespace detail {

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <typename Scalar>
bool same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check(detail::same_shape(a, b), "add: shape mismatch");
  Graph<Scalar>& g = a.graph();
  const int ia = a.id(), ib = b.id();
  return g.make(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                [ia, ib](Graph<Scalar>& g, int self) {
                  g.accumulate(ia, g.grad(self));
                  g.accumulate(ib, g.grad(self));
                });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check(detail::same_shape(a, b), "sub: shape mismatch");
  Graph<Scalar>& g = a.graph();
  const int ia = a.id(), ib = b.id();
  return g.make(a.value() - b.value(), a.requires_grad() || b.requires_grad(),
                [ia, ib](Graph<Scalar>& g, int self) {
                  g.accumulate(ia, g.grad(self));
                  g.accumulate_expr(ib, -g.grad(self));
                });
}

/// Hadamard product.
template <typename Scalar>
Tensor<Scalar> cmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check(detail::same_shape(a, b), "cmul: shape mismatch");
  Graph<Scalar>& g = a.graph();
  const int ia = a.id(), ib = b.id();
  return g.make(a.value().cwiseProduct(b.value()),
                a.requires_grad() || b.requires_grad(),
                [ia, ib](Graph<Scalar>& g, int self) {
                  g.accumulate_expr(ia, g.grad(self).cwiseProduct(g.value(ib)));
                  g.accumulate_expr(ib, g.grad(self).cwiseProduct(g.value(ia)));
                });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar c) {
  Graph<Scalar>& g = a.graph();
  const int ia = a.id();
  return g.make(a.value() * c, a.requires_grad(),
                [ia, c](Graph<Scalar>& g, int self) {
                  g.accumulate_expr(ia, g.grad(self) * c);
                });
}

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Graph<Scalar>& g = a.graph();
  const int ia = a.id(), ib = b.id();
  return g.make(a.value() * b.value(), a.requires_grad() || b.requires_grad(),
                [ia, ib](Graph<Scalar>& g, int self) {
                  g.accumulate_expr(ia, g.grad(self) * g.value(ib).transpose());
                  g.accumulate_expr(ib, g.value(ia).transpose() * g.grad(self));
                });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  Graph<Scalar>& g = a.graph();
  const int ia = a.id();
  return g.make(a.value().transpose(), a.requires_grad(),
                [ia](Graph<Scalar>& g, int self) {
                  g.accumulate_expr(ia, g.grad(self).transpose());
                });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  using Mat = typename Graph<Scalar>::Matrix;
  Graph<Scalar>& g = a.graph();
  const int ia = a.id();
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return g.make(std::move(v), a.requires_grad(),
                [ia, r, c](Graph<Scalar>& g, int self) {
                  g.accumulate_expr(ia, Mat::Constant(r, c, g.grad(self)(0, 0)));
                });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a) {
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  Graph<Scalar>& g = a.graph();
  const int ia = a.id();
  return g.make(a.value().cwiseMax(Scalar(0)), a.requires_grad(),
                [ia](Graph<Scalar>& g, int self) {
                  g.accumulate_expr(
                      ia, g.grad(self).cwiseProduct(
                              (g.value(ia).array() > Scalar(0))
                                  .template cast<Scalar>()
                                  .matrix()));
                });
}

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& a) {
  Graph<Scalar>& g = a.graph();
  const int ia = a.id();
  return g.make(a.value().array().tanh().matrix(), a.requires_grad(),
                [ia](Graph<Scalar>& g, int self) {
                  const auto& t = g.value(self).array();
                  g.accumulate_expr(
                      ia, (g.grad(self).array() * (Scalar(1) - t * t)).matrix());
                });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  Graph<Scalar>& g = a.graph();
  const int ia = a.id();
  typename Graph<Scalar>::Matrix v =
      (Scalar(1) / (Scalar(1) + (-a.value().array()).exp())).matrix();
  return g.make(std::move(v), a.requires_grad(),
                [ia](Graph<Scalar>& g, int self) {
                  const auto& s = g.value(self).array();
                  g.accumulate_expr(
                      ia, (g.grad(self).array() * s * (Scalar(1) - s)).matrix());
                });
}

/// Adds a 1xd row vector to every row of x.
template <typename Scalar>
Tensor<Scalar> add_rowvec(const Tensor<Scalar>& x, const Tensor<Scalar>& b) {
  detail::check(b.rows() == 1 && b.cols() == x.cols(), "add_rowvec: bias must be 1 x cols(x)");
  Graph<Scalar>& g = x.graph();
  const int ix = x.id(), ib = b.id();
  typename Graph<Scalar>::Matrix v = x.value();
  v.rowwise() += b.value().row(0);
  return g.make(std::move(v), x.requires_grad() || b.requires_grad(),
                [ix, ib](Graph<Scalar>& g, int self) {
                  g.accumulate(ix, g.grad(self));
                  g.accumulate_expr(ib, g.grad(self).colwise().sum());
                });
}

/// Adds a 1x1 tensor to every entry of x.
template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& x, const Tensor<Scalar>& b) {
  detail::check(b.rows() == 1 && b.cols() == 1, "add_scalar: b must be 1x1");
  Graph<Scalar>& g = x.graph();
  const int ix = x.id(), ib = b.id();
  return g.make((x.value().array() + b.value()(0, 0)).matrix(),
                x.requires_grad() || b.requires_grad(),
                [ix, ib](Graph<Scalar>& g, int self) {
                  g.accumulate(ix, g.grad(self));
                  typename Graph<Scalar>::Matrix s(1, 1);
                  s(0, 0) = g.grad(self).sum();
                  g.accumulate(ib, s);
                });
}

/// x @ W + b with b broadcast over rows.
template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, const Tensor<Scalar>& W,
                      const Tensor<Scalar>& b) {
  return add_rowvec(matmul(x, W), b);
}

template <typename Scalar>
Tensor<Scalar> concat_rows(const std::vector<Tensor<Scalar>>& parts) {
  detail::check(!parts.empty(), "concat_rows: no parts");
  Graph<Scalar>& g = parts.front().graph();
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  bool rg = false;
  for (const auto& p : parts) {
    detail::check(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  typename Graph<Scalar>::Matrix v(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offs;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    ids.push_back(p.id());
    offs.push_back(at);
    at += p.rows();
  }
  return g.make(std::move(v), rg,
                [ids, offs](Graph<Scalar>& g, int self) {
                  for (std::size_t i = 0; i < ids.size(); ++i) {
                    const Eigen::Index n = g.value(ids[i]).rows();
                    g.accumulate_expr(ids[i], g.grad(self).middleRows(offs[i], n));
                  }
                });
}

template <typename Scalar>
Tensor<Scalar> concat_cols(const std::vector<Tensor<Scalar>>& parts) {
  detail::check(!parts.empty(), "concat_cols: no parts");
  Graph<Scalar>& g = parts.front().graph();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    detail::check(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  typename Graph<Scalar>::Matrix v(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offs;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    ids.push_back(p.id());
    offs.push_back(at);
    at += p.cols();
  }
  return g.make(std::move(v), rg,
                [ids, offs](Graph<Scalar>& g, int self) {
                  for (std::size_t i = 0; i < ids.size(); ++i) {
                    const Eigen::Index n = g.value(ids[i]).cols();
                    g.accumulate_expr(ids[i], g.grad(self).middleCols(offs[i], n));
                  }
                });
}

/// Gathers rows of an embedding matrix; the backward pass scatter-adds into
/// only the looked-up rows.
template <typename Scalar>
Tensor<Scalar> rows_lookup(const Tensor<Scalar>& table, std::vector<int> ids) {
  using Mat = typename Graph<Scalar>::Matrix;
  Graph<Scalar>& g = table.graph();
  const int it = table.id();
  for (int id : ids)
    detail::check(id >= 0 && id < table.rows(), "rows_lookup: id out of range");
  Mat v(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    v.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  return g.make(std::move(v), table.requires_grad(),
                [it, ids = std::move(ids)](Graph<Scalar>& g, int self) {
                  Mat acc = Mat::Zero(g.value(it).rows(), g.value(it).cols());
                  for (std::size_t i = 0; i < ids.size(); ++i)
                    acc.row(ids[i]) += g.grad(self).row(static_cast<Eigen::Index>(i));
                  g.accumulate(it, acc);
                });
}

/// Row-wise softmax with an optional additive mask. Masked entries get
/// exactly zero weight; a fully masked row yields an all-zero weight row.
template <typename Scalar>
Tensor<Scalar> row_softmax(const Tensor<Scalar>& scores,
                           const AttentionMask<Scalar>* mask) {
  Graph<Scalar>& g = scores.graph();
  if (mask != nullptr)
    detail::check(mask->matrix.rows() == scores.rows() &&
                      mask->matrix.cols() == scores.cols(),
                  "row_softmax: mask shape mismatch");
  const int is = scores.id();
  const Eigen::Index m = scores.rows(), n = scores.cols();
  typename Graph<Scalar>::Matrix w(m, n);
  for (Eigen::Index r = 0; r < m; ++r) {
    bool any_open = true;
    if (mask != nullptr) {
      any_open = (mask->matrix.row(r).array() == Scalar(0)).any();
    }
    if (!any_open) {
      w.row(r).setZero();
      continue;
    }
    Eigen::Array<Scalar, 1, Eigen::Dynamic> s = scores.value().row(r).array();
    if (mask != nullptr) s += mask->matrix.row(r).array();
    const Scalar mx = s.maxCoeff();
    Eigen::Array<Scalar, 1, Eigen::Dynamic> e = (s - mx).exp();
    if (mask != nullptr) {
      // Vectorized exp saturates instead of underflowing; pin disabled
      // entries to an exact zero weight.
      e = (mask->matrix.row(r).array() == Scalar(0)).select(e, Scalar(0));
    }
    w.row(r) = (e / e.sum()).matrix();
  }
  using Mat = typename Graph<Scalar>::Matrix;
  return g.make(std::move(w), scores.requires_grad(),
                [is](Graph<Scalar>& g, int self) {
                  const auto& w = g.value(self);
                  const auto& gw = g.grad(self);
                  Mat ds(w.rows(), w.cols());
                  for (Eigen::Index r = 0; r < w.rows(); ++r) {
                    const Scalar dot = gw.row(r).dot(w.row(r));
                    ds.row(r) =
                        (w.row(r).array() * (gw.row(r).array() - dot)).matrix();
                  }
                  g.accumulate(is, ds);
                });
}

/// Row-wise layer normalization (population variance) with learned gain and
/// bias, both 1xd.
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                          const Tensor<Scalar>& bias, Scalar eps = Scalar(1e-5)) {
  detail::check(eps > Scalar(0), "layer_norm: eps must be positive");
  detail::check(gain.rows() == 1 && gain.cols() == x.cols() && bias.rows() == 1 &&
                    bias.cols() == x.cols(),
                "layer_norm: gain/bias must be 1 x cols(x)");
  Graph<Scalar>& g = x.graph();
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  const Eigen::Index m = x.rows(), d = x.cols();

  // Keep the normalized rows and inverse stddevs for the backward pass.
  auto xhat = std::make_shared<typename Graph<Scalar>::Matrix>(m, d);
  auto inv = std::make_shared<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(m);
  typename Graph<Scalar>::Matrix y(m, d);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto row = x.value().row(r).array();
    const Scalar mu = row.mean();
    const Scalar var = (row - mu).square().mean();
    const Scalar iv = Scalar(1) / std::sqrt(var + eps);
    (*inv)(r) = iv;
    xhat->row(r) = ((row - mu) * iv).matrix();
    y.row(r) = (xhat->row(r).array() * gain.value().row(0).array() +
                bias.value().row(0).array())
                   .matrix();
  }
  const bool rg = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  return g.make(std::move(y), rg,
                [ix, ig, ib, xhat, inv](Graph<Scalar>& g, int self) {
                  const auto& gy = g.grad(self);
                  const auto& gainv = g.value(ig);
                  typename Graph<Scalar>::Matrix dx(gy.rows(), gy.cols());
                  for (Eigen::Index r = 0; r < gy.rows(); ++r) {
                    const auto dxhat =
                        (gy.row(r).array() * gainv.row(0).array()).eval();
                    const Scalar m1 = dxhat.mean();
                    const Scalar m2 = (dxhat * xhat->row(r).array()).mean();
                    dx.row(r) = ((dxhat - m1 - xhat->row(r).array() * m2) *
                                 (*inv)(r))
                                    .matrix();
                  }
                  g.accumulate(ix, dx);
                  g.accumulate_expr(ig, gy.cwiseProduct(*xhat).colwise().sum());
                  g.accumulate_expr(ib, gy.colwise().sum());
                });
}

/// Inverted dropout. With training=false (or rate 0) this is the identity.
/// The keep mask is drawn from `rng`, so a fixed seed fixes the mask.
template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, Scalar rate, bool training,
                       Rng& rng) {
  detail::check(rate >= Scalar(0) && rate < Scalar(1), "dropout: rate must be in [0,1)");
  if (!training || rate == Scalar(0)) return x;
  Graph<Scalar>& g = x.graph();
  const int ix = x.id();
  auto keep = std::make_shared<typename Graph<Scalar>::Matrix>(x.rows(), x.cols());
  const Scalar inv_keep = Scalar(1) / (Scalar(1) - rate);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      (*keep)(r, c) = rng.uniform() < static_cast<double>(rate) ? Scalar(0) : inv_keep;
  return g.make(x.value().cwiseProduct(*keep), x.requires_grad(),
                [ix, keep](Graph<Scalar>& g, int self) {
                  g.accumulate_expr(ix, g.grad(self).cwiseProduct(*keep));
                });
}

/// Mean binary cross-entropy over the slots where `valid` is nonzero.
/// Probabilities are clamped to [1e-7, 1-1e-7]; the clamp saturates the
/// gradient outside that range.
template <typename Scalar>
Tensor<Scalar> bce_loss(const Tensor<Scalar>& p,
                        const typename Graph<Scalar>::Matrix& labels,
                        const typename Graph<Scalar>::Matrix& valid) {
  detail::check(p.rows() == labels.rows() && p.cols() == labels.cols(),
                "bce_loss: label shape mismatch");
  detail::check(p.rows() == valid.rows() && p.cols() == valid.cols(),
                "bce_loss: valid-mask shape mismatch");
  Graph<Scalar>& g = p.graph();
  const int ip = p.id();
  const Scalar lo = Scalar(1e-7), hi = Scalar(1) - Scalar(1e-7);
  const Scalar n_valid = valid.sum();
  detail::check(n_valid > Scalar(0), "bce_loss: no valid slots");

  auto clamped = std::make_shared<typename Graph<Scalar>::Matrix>(
      p.value().cwiseMax(lo).cwiseMin(hi));
  auto in_range = std::make_shared<typename Graph<Scalar>::Matrix>(
      ((p.value().array() > lo) && (p.value().array() < hi))
          .template cast<Scalar>()
          .matrix());
  Scalar total = 0;
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      if (valid(r, c) != Scalar(0))
        total -= labels(r, c) * std::log((*clamped)(r, c)) +
                 (Scalar(1) - labels(r, c)) * std::log(Scalar(1) - (*clamped)(r, c));
  typename Graph<Scalar>::Matrix v(1, 1);
  v(0, 0) = total / n_valid;
  return g.make(std::move(v), p.requires_grad(),
                [ip, labels, valid, clamped, in_range, n_valid](Graph<Scalar>& g,
                                                                int self) {
                  const Scalar go = g.grad(self)(0, 0);
                  typename Graph<Scalar>::Matrix dp =
                      ((clamped->array() - labels.array()) /
                       (clamped->array() * (Scalar(1) - clamped->array())))
                          .matrix();
                  dp = dp.cwiseProduct(*in_range).cwiseProduct(valid) *
                       (go / n_valid);
                  g.accumulate(ip, dp);
                });
}

}  // namespace bitenet
