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

#include <doctest.h>

#include <cmath>

#include "bitenet/attention.hpp"
#include "bitenet/grad_check.hpp"
#include "bitenet/graph.hpp"
#include "bitenet/mask.hpp"
#include "bitenet/ops.hpp"

using namespace bitenet;

namespace {

DenseMatrix<double> random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng,
                                  double scale = 1.0) {
  DenseMatrix<double> m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

// Fully random parameters, gains and biases included; gain-1/bias-0 blocks
// make sum-readouts of layer norm degenerate (normalized rows sum to zero).
MasEncParams<double> random_masenc(Eigen::Index d, int h, Rng& rng) {
  MasEncParams<double> p = MasEncParams<double>::sized(d, h, 4 * d);
  p.visit("m", [&rng](const std::string&, DenseMatrix<double>& m, ParamKind) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-0.5, 0.5);
  });
  return p;
}

constexpr double kNeg = -1e9;
constexpr const AttentionMask<double>* kNoMask = nullptr;

}  // namespace

TEST_CASE("build_mask: diagonal-disabled layout") {
  const auto m = build_mask<double>(MaskKind::kDiagonal, 3);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      CHECK(m.matrix(i, j) == (i == j ? kNeg : 0.0));
}

TEST_CASE("build_mask: forward keeps only columns after the row index") {
  const auto m = build_mask<double>(MaskKind::kForward, 3);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      CHECK(m.matrix(i, j) == (i < j ? 0.0 : kNeg));
}

TEST_CASE("build_mask: backward on two positions") {
  const auto m = build_mask<double>(MaskKind::kBackward, 2);
  CHECK(m.matrix(0, 0) == kNeg);
  CHECK(m.matrix(0, 1) == kNeg);
  CHECK(m.matrix(1, 0) == 0.0);
  CHECK(m.matrix(1, 1) == kNeg);
}

TEST_CASE("build_mask: rejects kinds that need validity data") {
  CHECK_THROWS(build_mask<double>(MaskKind::kPadding, 3));
  CHECK_THROWS(build_mask<double>(MaskKind::kCombined, 3));
  CHECK_THROWS(build_mask<double>(MaskKind::kNone, 0));
}

TEST_CASE("masked_attention: singleton softmax") {
  Graph<double> g;
  DenseMatrix<double> q(1, 1), v(1, 1);
  q << 1.0;
  v << 5.0;
  auto tq = g.constant(q), tv = g.constant(v);
  auto r = masked_attention(tq, tq, tv, static_cast<const AttentionMask<double>*>(nullptr));
  CHECK(r.weights.value()(0, 0) == doctest::Approx(1.0));
  CHECK(r.output.value()(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("masked_attention: diagonal mask swaps the two rows") {
  Graph<double> g;
  Rng rng(7);
  auto x = g.constant(random_matrix(2, 3, rng));
  const auto mask = build_mask<double>(MaskKind::kDiagonal, 2);
  auto r = masked_attention(x, x, x, &mask);
  CHECK((r.output.value().row(0) - x.value().row(1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.output.value().row(1) - x.value().row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("masked_attention: hand-computed softmax on identity inputs") {
  Graph<double> g;
  DenseMatrix<double> x(2, 2);
  x << 1, 0, 0, 1;
  auto t = g.constant(x);
  auto r = masked_attention(t, t, t, static_cast<const AttentionMask<double>*>(nullptr));
  // scores: diag 1/sqrt(2), off-diag 0
  const double s1 = std::exp(1.0 / std::sqrt(2.0)) /
                    (std::exp(1.0 / std::sqrt(2.0)) + std::exp(0.0));
  CHECK(r.weights.value()(0, 0) == doctest::Approx(s1).epsilon(1e-12));
  CHECK(r.weights.value()(0, 1) == doctest::Approx(1.0 - s1).epsilon(1e-12));
  CHECK(r.weights.value()(1, 1) == doctest::Approx(s1).epsilon(1e-12));
  CHECK(r.weights.value()(1, 0) == doctest::Approx(1.0 - s1).epsilon(1e-12));
}

TEST_CASE("multi_head: one identity head reduces to plain attention") {
  Rng rng(3);
  Graph<double> g;
  const Eigen::Index d = 4;
  auto x = g.constant(random_matrix(3, d, rng));
  MultiHeadParams<double> p = MultiHeadParams<double>::sized(d, 1);
  p.heads[0].Wq.setIdentity();
  p.heads[0].Wk.setIdentity();
  p.heads[0].Wv.setIdentity();
  p.Wo.setIdentity();
  const auto mask = build_mask<double>(MaskKind::kDiagonal, 3);
  ParamBinder<double> bind(g);
  auto mh = multi_head(x, &mask, p, bind);
  auto direct = masked_attention(x, x, x, &mask);
  CHECK((mh.value() - direct.output.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("multi_head: output shape m x d") {
  Rng rng(4);
  Graph<double> g;
  auto x = g.constant(random_matrix(4, 8, rng));
  MultiHeadParams<double> p = MultiHeadParams<double>::sized(8, 2);
  p.visit("p", [&rng](const std::string&, DenseMatrix<double>& m, ParamKind) {
    m = random_matrix(m.rows(), m.cols(), rng);
  });
  ParamBinder<double> bind(g);
  auto y = multi_head(x, kNoMask, p, bind);
  CHECK(y.rows() == 4);
  CHECK(y.cols() == 8);
}

TEST_CASE("multi_head: divisibility is enforced at construction") {
  CHECK_THROWS(MultiHeadParams<double>::sized(6, 4));
}

TEST_CASE("multi_head: block-identity heads equal two independent half-width attentions") {
  Rng rng(5);
  const Eigen::Index d = 4, dk = 2, m = 3;
  Graph<double> g;
  const DenseMatrix<double> xv = random_matrix(m, d, rng);
  auto x = g.constant(xv);
  MultiHeadParams<double> p = MultiHeadParams<double>::sized(d, 2);
  // head 0 selects features 0..1, head 1 selects features 2..3
  for (int h = 0; h < 2; ++h) {
    auto& head = p.heads[static_cast<std::size_t>(h)];
    head.Wq.setZero();
    head.Wk.setZero();
    head.Wv.setZero();
    for (Eigen::Index c = 0; c < dk; ++c) {
      head.Wq(h * dk + c, c) = 1.0;
      head.Wk(h * dk + c, c) = 1.0;
      head.Wv(h * dk + c, c) = 1.0;
    }
  }
  p.Wo.setIdentity();
  const auto mask = build_mask<double>(MaskKind::kForward, m);
  ParamBinder<double> bind(g);
  auto mh = multi_head(x, &mask, p, bind);

  for (int h = 0; h < 2; ++h) {
    Graph<double> gh;
    auto xh = gh.constant(xv.middleCols(h * dk, dk).eval());
    auto expected = masked_attention(xh, xh, xh, &mask);
    CHECK((mh.value().middleCols(h * dk, dk) - expected.output.value())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("attention_pooling: constant scores give the mean of valid rows") {
  Rng rng(6);
  Graph<double> g;
  const DenseMatrix<double> xv = random_matrix(4, 3, rng);
  auto x = g.constant(xv);
  PoolingParams<double> p = PoolingParams<double>::sized(3);  // W1 = 0
  p.b1 = random_matrix(1, 3, rng);
  p.w = random_matrix(3, 1, rng);
  p.b(0, 0) = rng.uniform(-1, 1);
  ParamBinder<double> bind(g);
  const std::vector<char> valid{1, 1, 0, 1};
  auto pooled = attention_pooling(x, valid, p, bind);
  CHECK(pooled.weights.value()(0, 0) == doctest::Approx(1.0 / 3));
  CHECK(pooled.weights.value()(0, 2) == 0.0);
  const DenseMatrix<double> mean_rows =
      ((xv.row(0) + xv.row(1) + xv.row(3)) / 3.0).eval();
  CHECK((pooled.output.value() - mean_rows).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention_pooling: single row passes through with weight one") {
  Rng rng(8);
  Graph<double> g;
  auto x = g.constant(random_matrix(1, 5, rng));
  PoolingParams<double> p = PoolingParams<double>::sized(5);
  p.W1 = random_matrix(5, 5, rng);
  p.w = random_matrix(5, 1, rng);
  ParamBinder<double> bind(g);
  auto pooled = attention_pooling(x, {1}, p, bind);
  CHECK(pooled.weights.value()(0, 0) == doctest::Approx(1.0));
  CHECK((pooled.output.value() - x.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention_pooling: matches a scalar-by-scalar reimplementation") {
  Rng rng(9);
  const int m = 3, d = 2;
  Graph<double> g;
  const DenseMatrix<double> xv = random_matrix(m, d, rng);
  auto x = g.constant(xv);
  PoolingParams<double> p = PoolingParams<double>::sized(d);
  p.W1 = random_matrix(d, d, rng);
  p.b1 = random_matrix(1, d, rng);
  p.w = random_matrix(d, 1, rng);
  p.b(0, 0) = 0.3;
  ParamBinder<double> bind(g);
  auto pooled = attention_pooling(x, {1, 1, 1}, p, bind);

  // Independent arithmetic: loops and scalars only.
  double scores[3];
  for (int i = 0; i < m; ++i) {
    double s = p.b(0, 0);
    for (int a = 0; a < d; ++a) {
      double pre = p.b1(0, a);
      for (int b = 0; b < d; ++b) pre += xv(i, b) * p.W1(b, a);
      s += std::tanh(pre) * p.w(a, 0);
    }
    scores[i] = s;
  }
  const double mx = std::max({scores[0], scores[1], scores[2]});
  double z = 0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    z += s;
  }
  for (int i = 0; i < m; ++i)
    CHECK(pooled.weights.value()(0, i) == doctest::Approx(scores[i] / z).epsilon(1e-12));
  for (int a = 0; a < d; ++a) {
    double out = 0;
    for (int i = 0; i < m; ++i) out += scores[i] / z * xv(i, a);
    CHECK(pooled.output.value()(0, a) == doctest::Approx(out).epsilon(1e-12));
  }
}

TEST_CASE("attention_pooling: rejects an all-invalid sequence") {
  Graph<double> g;
  Rng rng(10);
  auto x = g.constant(random_matrix(2, 2, rng));
  PoolingParams<double> p = PoolingParams<double>::sized(2);
  ParamBinder<double> bind(g);
  CHECK_THROWS(attention_pooling(x, {0, 0}, p, bind));
}

TEST_CASE("layer_norm: constant, standardized and hand-checked rows") {
  Graph<double> g;
  DenseMatrix<double> x(2, 3);
  x << 2, 2, 2, 1, 2, 3;
  auto gain = g.constant(DenseMatrix<double>::Ones(1, 3));
  auto bias = g.constant(DenseMatrix<double>::Zero(1, 3));
  auto y = layer_norm(g.constant(x), gain, bias, 1e-12);
  CHECK(y.value().row(0).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(y.value()(1, 0) == doctest::Approx(-1.224744871).epsilon(1e-8));
  CHECK(y.value()(1, 1) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(y.value()(1, 2) == doctest::Approx(1.224744871).epsilon(1e-8));

  Graph<double> g2;
  DenseMatrix<double> x2(1, 2);
  x2 << 1, -1;
  auto y2 = layer_norm(g2.constant(x2), g2.constant(DenseMatrix<double>::Ones(1, 2)),
                       g2.constant(DenseMatrix<double>::Zero(1, 2)), 1e-12);
  CHECK(y2.value()(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(y2.value()(0, 1) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("masenc_block: zero sublayers reduce to double layer norm") {
  Rng rng(11);
  const Eigen::Index d = 4;
  Graph<double> g;
  const DenseMatrix<double> xv = random_matrix(3, d, rng);
  auto x = g.constant(xv);
  MasEncParams<double> p = MasEncParams<double>::sized(d, 2, 4 * d);  // all maps zero
  ParamBinder<double> bind(g);
  Rng drop(0);
  auto y = masenc_block(x, kNoMask, p, bind, 0.1, false, drop);

  auto ln_row = [](Eigen::RowVectorXd row) {
    const double mu = row.mean();
    const double var = (row.array() - mu).square().mean();
    return ((row.array() - mu) / std::sqrt(var + 1e-5)).matrix().eval();
  };
  for (Eigen::Index r = 0; r < 3; ++r) {
    const Eigen::RowVectorXd expected = ln_row(ln_row(xv.row(r)));
    CHECK((y.value().row(r) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("masenc_block: output shape matches input") {
  Rng rng(12);
  Graph<double> g;
  auto x = g.constant(random_matrix(5, 8, rng));
  MasEncParams<double> p = random_masenc(8, 2, rng);
  ParamBinder<double> bind(g);
  Rng drop(0);
  auto y = masenc_block(x, kNoMask, p, bind, 0.0, false, drop);
  CHECK(y.rows() == 5);
  CHECK(y.cols() == 8);
}

TEST_CASE("dropout: identity in evaluation mode, seeded mask in training") {
  Rng rng(30);
  Graph<double> g;
  const DenseMatrix<double> xv = random_matrix(3, 3, rng);
  auto x = g.constant(xv);
  Rng d1(42);
  auto eval_out = dropout(x, 0.5, false, d1);
  CHECK((eval_out.value() - xv).cwiseAbs().maxCoeff() == 0.0);

  Rng d2(42), d3(42);
  auto a = dropout(x, 0.5, true, d2);
  auto b = dropout(x, 0.5, true, d3);
  CHECK((a.value() - b.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mask invariant: exhaustive weight zeroing and row stochasticity, n <= 8") {
  Rng rng(13);
  for (const MaskKind kind :
       {MaskKind::kNone, MaskKind::kDiagonal, MaskKind::kForward, MaskKind::kBackward}) {
    for (int n = 1; n <= 8; ++n) {
      Graph<double> g;
      auto x = g.constant(random_matrix(n, 3, rng, 2.0));
      const auto mask = build_mask<double>(kind, n);
      auto r = masked_attention(x, x, x, &mask);
      const auto& w = r.weights.value();
      for (int i = 0; i < n; ++i) {
        bool any_open = false;
        for (int j = 0; j < n; ++j) {
          if (mask.matrix(i, j) == kNeg) {
            CHECK(w(i, j) < 1e-12);
          } else {
            any_open = true;
          }
        }
        const double row_sum = w.row(i).sum();
        if (any_open) {
          CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-6));
        } else {
          CHECK(row_sum == 0.0);
          CHECK(r.output.value().row(i).cwiseAbs().maxCoeff() == 0.0);
        }
      }
    }
  }
}

TEST_CASE("mask invariant: combining with a padding mask stays exact") {
  Rng rng(14);
  Graph<double> g;
  const int n = 5;
  auto x = g.constant(random_matrix(n, 4, rng));
  const std::vector<char> valid{1, 1, 1, 0, 0};
  const auto mask =
      combine(build_mask<double>(MaskKind::kForward, n), key_padding_mask<double>(valid));
  auto r = masked_attention(x, x, x, &mask);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i >= j || !valid[static_cast<std::size_t>(j)])
        CHECK(r.weights.value()(i, j) == 0.0);
}

TEST_CASE("causality: perturbations cannot cross the forward mask") {
  Rng rng(15);
  const int n = 6, d = 4;
  const DenseMatrix<double> base = random_matrix(n, d, rng);
  const auto mask = build_mask<double>(MaskKind::kForward, n);

  auto attend = [&](const DenseMatrix<double>& input) {
    Graph<double> g;
    auto x = g.constant(input);
    return masked_attention(x, x, x, &mask).output.value().eval();
  };
  const DenseMatrix<double> ref = attend(base);
  for (int k = 0; k < n; ++k) {
    DenseMatrix<double> perturbed = base;
    perturbed.row(k).array() += 0.37;
    const DenseMatrix<double> out = attend(perturbed);
    // Row i attends to j > i only, so rows after k never see the change.
    for (int i = k + 1; i < n; ++i)
      CHECK((out.row(i) - ref.row(i)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("causality: backward mask is the mirror image") {
  Rng rng(16);
  const int n = 6, d = 4;
  const DenseMatrix<double> base = random_matrix(n, d, rng);
  const auto mask = build_mask<double>(MaskKind::kBackward, n);
  auto attend = [&](const DenseMatrix<double>& input) {
    Graph<double> g;
    auto x = g.constant(input);
    return masked_attention(x, x, x, &mask).output.value().eval();
  };
  const DenseMatrix<double> ref = attend(base);
  for (int k = 0; k < n; ++k) {
    DenseMatrix<double> perturbed = base;
    perturbed.row(k).array() -= 0.21;
    const DenseMatrix<double> out = attend(perturbed);
    for (int i = 0; i < k; ++i)
      CHECK((out.row(i) - ref.row(i)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("causality: full block respects the mask past the perturbed row") {
  Rng rng(17);
  const int n = 5, d = 4;
  const DenseMatrix<double> base = random_matrix(n, d, rng);
  MasEncParams<double> p = random_masenc(d, 2, rng);
  const auto mask = build_mask<double>(MaskKind::kForward, n);
  auto run = [&](const DenseMatrix<double>& input) {
    Graph<double> g;
    ParamBinder<double> bind(g);
    Rng drop(0);
    auto x = g.constant(input);
    return masenc_block(x, &mask, p, bind, 0.0, false, drop).value().eval();
  };
  const DenseMatrix<double> ref = run(base);
  for (int k = 0; k < n; ++k) {
    DenseMatrix<double> perturbed = base;
    perturbed.row(k).array() += 0.11;
    const DenseMatrix<double> out = run(perturbed);
    for (int i = k + 1; i < n; ++i)
      CHECK((out.row(i) - ref.row(i)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pooling invariant: weights form a distribution and commute with permutation") {
  Rng rng(18);
  const int m = 5, d = 3;
  const DenseMatrix<double> xv = random_matrix(m, d, rng);
  PoolingParams<double> p = PoolingParams<double>::sized(d);
  p.W1 = random_matrix(d, d, rng);
  p.b1 = random_matrix(1, d, rng);
  p.w = random_matrix(d, 1, rng);

  Graph<double> g;
  ParamBinder<double> bind(g);
  auto pooled = attention_pooling(g.constant(xv), {1, 1, 1, 1, 1}, p, bind);
  CHECK(pooled.weights.value().sum() == doctest::Approx(1.0).epsilon(1e-9));
  for (int i = 0; i < m; ++i) CHECK(pooled.weights.value()(0, i) > 0.0);

  DenseMatrix<double> shuffled(m, d);
  const int perm[5] = {3, 0, 4, 1, 2};
  for (int i = 0; i < m; ++i) shuffled.row(i) = xv.row(perm[i]);
  Graph<double> g2;
  ParamBinder<double> bind2(g2);
  auto pooled2 = attention_pooling(g2.constant(shuffled), {1, 1, 1, 1, 1}, p, bind2);
  CHECK((pooled.output.value() - pooled2.output.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax shift invariance on unmasked scores") {
  Rng rng(19);
  Graph<double> g;
  const DenseMatrix<double> s = random_matrix(3, 6, rng, 3.0);
  AttentionMask<double> m3;
  m3.kind = MaskKind::kCombined;
  m3.matrix = build_mask<double>(MaskKind::kDiagonal, 6).matrix.topRows(3);
  auto w1 = row_softmax(g.constant(s), &m3);
  auto w2 = row_softmax(g.constant((s.array() + 17.25).matrix()), &m3);
  CHECK((w1.value() - w2.value()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("backward: sum gradient is all ones; accumulation persists") {
  Graph<double> g;
  Rng rng(20);
  auto x = g.variable(random_matrix(3, 2, rng));
  auto loss = sum(x);
  g.backward(loss);
  CHECK((x.grad().array() == 1.0).all());
  g.backward(loss);
  CHECK((x.grad().array() == 2.0).all());
  g.zero_grad();
  CHECK(x.grad().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: product-sum gradient matches the transpose pattern") {
  Graph<double> g;
  Rng rng(21);
  const DenseMatrix<double> av = random_matrix(2, 3, rng);
  const DenseMatrix<double> bv = random_matrix(3, 4, rng);
  auto a = g.variable(av);
  auto b = g.variable(bv);
  g.backward(sum(matmul(a, b)));
  const DenseMatrix<double> expected = DenseMatrix<double>::Ones(2, 4) * bv.transpose();
  CHECK((a.grad() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward: unreachable variable keeps a zero gradient") {
  Graph<double> g;
  Rng rng(22);
  auto x = g.variable(random_matrix(2, 2, rng));
  auto orphan = g.variable(random_matrix(2, 2, rng));
  g.backward(sum(x));
  CHECK(orphan.grad().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: rejects non-scalar losses") {
  Graph<double> g;
  Rng rng(23);
  auto x = g.variable(random_matrix(2, 2, rng));
  CHECK_THROWS(g.backward(x));
}

TEST_CASE("grad_check: linear functions are exact to 1e-9") {
  Rng rng(24);
  const double err = grad_check(
      [](Graph<double>&, const std::vector<Tensor<double>>& in) {
        return sum(scale(in[0], 3.5));
      },
      {random_matrix(3, 3, rng)});
  CHECK(err < 1e-9);
}

TEST_CASE("grad_check: softmax rows") {
  Rng rng(25);
  const double err = grad_check(
      [](Graph<double>&, const std::vector<Tensor<double>>& in) {
        auto w = row_softmax(in[0], static_cast<const AttentionMask<double>*>(nullptr));
        return sum(cmul(w, in[1]));
      },
      {random_matrix(3, 4, rng), random_matrix(3, 4, rng)});
  CHECK(err < 1e-5);
}

TEST_CASE("grad_check: every primitive op") {
  Rng rng(26);
  auto check = [](const char* name, const GradCheckFn& f,
                  std::vector<DenseMatrix<double>> inputs, double tol = 1e-6) {
    INFO(name);
    CHECK(grad_check(f, std::move(inputs)) < tol);
  };

  check("add/sub/cmul",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          return sum(cmul(add(in[0], in[1]), sub(in[0], in[1])));
        },
        {random_matrix(3, 3, rng), random_matrix(3, 3, rng)});
  check("matmul+transpose",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          return sum(matmul(in[0], transpose(in[1])));
        },
        {random_matrix(2, 3, rng), random_matrix(4, 3, rng)});
  check("relu",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          return sum(relu(in[0]));
        },
        {random_matrix(3, 3, rng) + DenseMatrix<double>::Constant(3, 3, 1.3)});
  check("tanh/sigmoid",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          return sum(cmul(bitenet::tanh(in[0]), sigmoid(in[0])));
        },
        {random_matrix(3, 3, rng)}, 1e-5);
  check("mean+add_rowvec+add_scalar",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          return mean(add_scalar(add_rowvec(in[0], in[1]), in[2]));
        },
        {random_matrix(3, 3, rng), random_matrix(1, 3, rng), random_matrix(1, 1, rng)});
  check("concat_rows/cols",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          auto r = concat_rows<double>({in[0], in[1]});
          auto c = concat_cols<double>({r, r});
          return sum(cmul(c, c));
        },
        {random_matrix(2, 3, rng), random_matrix(1, 3, rng)});
  check("rows_lookup",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          return sum(cmul(rows_lookup(in[0], {0, 2, 2, 1}), in[1]));
        },
        {random_matrix(3, 4, rng), random_matrix(4, 4, rng)});
  check("layer_norm",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          return sum(cmul(layer_norm(in[0], in[1], in[2]), in[3]));
        },
        {random_matrix(3, 4, rng), random_matrix(1, 4, rng), random_matrix(1, 4, rng),
         random_matrix(3, 4, rng)},
        1e-5);
  check("masked softmax with a fully masked row",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          AttentionMask<double> m = build_mask<double>(MaskKind::kForward, 3);
          auto w = row_softmax(in[0], &m);
          return sum(cmul(w, in[1]));
        },
        {random_matrix(3, 3, rng), random_matrix(3, 3, rng)}, 1e-5);
  check("bce_loss",
        [](Graph<double>&, const std::vector<Tensor<double>>& in) {
          DenseMatrix<double> labels(2, 2);
          labels << 1, 0, 0, 1;
          return bce_loss(sigmoid(in[0]), labels, DenseMatrix<double>::Ones(2, 2));
        },
        {random_matrix(2, 2, rng)}, 1e-5);
}

TEST_CASE("grad_check: dropout with a fixed seed is a fixed linear map") {
  Rng rng(27);
  const double err = grad_check(
      [](Graph<double>&, const std::vector<Tensor<double>>& in) {
        Rng drop(99);
        return sum(dropout(in[0], 0.4, true, drop));
      },
      {random_matrix(4, 4, rng)});
  CHECK(err < 1e-9);
}

TEST_CASE("grad_check: attention pooling and masked attention composites") {
  Rng rng(28);
  PoolingParams<double> pool = PoolingParams<double>::sized(3);
  const double err_pool = grad_check(
      [&pool](Graph<double>& g, const std::vector<Tensor<double>>& in) {
        ParamBinder<double> bind(g);
        bind.preload(pool.W1, in[1]);
        bind.preload(pool.b1, in[2]);
        bind.preload(pool.w, in[3]);
        bind.preload(pool.b, in[4]);
        return sum(attention_pooling(in[0], {1, 1, 0, 1}, pool, bind).output);
      },
      {random_matrix(4, 3, rng), random_matrix(3, 3, rng), random_matrix(1, 3, rng),
       random_matrix(3, 1, rng), random_matrix(1, 1, rng)});
  CHECK(err_pool < 1e-5);

  const double err_attn = grad_check(
      [](Graph<double>&, const std::vector<Tensor<double>>& in) {
        AttentionMask<double> m = build_mask<double>(MaskKind::kDiagonal, 4);
        return sum(masked_attention(in[0], in[1], in[2], &m).output);
      },
      {random_matrix(4, 3, rng), random_matrix(4, 3, rng), random_matrix(4, 3, rng)});
  CHECK(err_attn < 1e-5);
}

TEST_CASE("grad_check: full MasEnc block within 1e-4") {
  Rng rng(29);
  MasEncParams<double> p = random_masenc(4, 2, rng);
  std::vector<DenseMatrix<double>*> slots;
  p.visit("p", [&slots](const std::string&, DenseMatrix<double>& m, ParamKind) {
    slots.push_back(&m);
  });
  std::vector<DenseMatrix<double>> inputs;
  inputs.push_back(random_matrix(3, 4, rng, 0.5));
  for (auto* m : slots) inputs.push_back(*m);

  const double err = grad_check(
      [&p, &slots](Graph<double>& g, const std::vector<Tensor<double>>& in) {
        ParamBinder<double> bind(g);
        for (std::size_t i = 0; i < slots.size(); ++i)
          bind.preload(*slots[i], in[i + 1]);
        AttentionMask<double> m = build_mask<double>(MaskKind::kDiagonal, 3);
        Rng drop(0);
        return sum(masenc_block(in[0], &m, p, bind, 0.0, false, drop));
      },
      inputs, 1e-6);
  CHECK(err < 1e-4);
}
