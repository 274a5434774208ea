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

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitenet/attention.hpp"
#include "bitenet/ehr.hpp"
#include "bitenet/graph.hpp"
#include "bitenet/mask.hpp"
#include "bitenet/ops.hpp"
#include "bitenet/random.hpp"

namespace bitenet {

enum class Variant { kFull, kAttention, kDireMask, kInterval };
enum class Task { kReadmission, kDiagnosis };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kAttention: return "attention";
    case Variant::kDireMask: return "diremask";
    case Variant::kInterval: return "interval";
  }
  return "?";
}

inline const char* to_string(Task t) {
  return t == Task::kReadmission ? "readmission" : "diagnosis";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "attention") return Variant::kAttention;
  if (s == "diremask") return Variant::kDireMask;
  if (s == "interval") return Variant::kInterval;
  throw std::invalid_argument("unknown variant: " + s);
}

inline Task task_from_string(const std::string& s) {
  if (s == "readmission") return Task::kReadmission;
  if (s == "diagnosis") return Task::kDiagnosis;
  throw std::invalid_argument("unknown task: " + s);
}

struct ModelConfig {
  int d = 128;                     // embedding dimension
  int stack_depth = 2;             // N, MasEnc blocks per stack
  int heads = 4;                   // h
  double dropout = 0.1;
  int interval_table_days = 4015;  // lookup-table rows (dataset span in days)
  Variant variant = Variant::kFull;
  Task task = Task::kReadmission;
  int num_categories = 0;  // diagnosis only
  bool direction_swap = false;

  int output_width() const {
    return task == Task::kReadmission ? 1 : num_categories;
  }
  int ffn_width() const { return 4 * d; }

  void validate() const {
    if (d < 1 || heads < 1 || d % heads != 0)
      throw std::invalid_argument("model config: d must be a positive multiple of heads");
    if (stack_depth < 1)
      throw std::invalid_argument("model config: stack depth must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("model config: dropout must be in [0,1)");
    if (variant != Variant::kInterval && interval_table_days < 1)
      throw std::invalid_argument("model config: interval_table_days must be >= 1");
    if (task == Task::kDiagnosis && num_categories < 1)
      throw std::invalid_argument("model config: diagnosis task needs num_categories");
  }
};

/// All learnable state. The code stack is allocated for every variant (the
/// attention variant bypasses it at the code level but its parameter count
/// must differ from the full model by the pooling layers only); the pooling
/// layers are absent in the attention variant and the interval table is
/// absent in the interval variant.
template <typename Scalar>
struct BiteNetParams {
  DenseMatrix<Scalar> code_embedding;  // (num_codes+1) x d; row 0 is padding, pinned to zero
  std::vector<MasEncParams<Scalar>> code_stack;
  std::optional<PoolingParams<Scalar>> code_pool;
  DenseMatrix<Scalar> interval_table;  // m_days x d; 0x0 when absent
  std::vector<MasEncParams<Scalar>> fw_stack, bw_stack;  // parameter-untied
  std::optional<PoolingParams<Scalar>> fw_pool, bw_pool;
  DenseMatrix<Scalar> head_W;  // 2d x output_width
  DenseMatrix<Scalar> head_b;  // 1 x output_width

  template <typename Self, typename F>
  static void visit_impl(Self& self, F&& f) {
    f("code_embedding", self.code_embedding, ParamKind::kWeight);
    for (std::size_t i = 0; i < self.code_stack.size(); ++i)
      self.code_stack[i].visit("code_stack" + std::to_string(i), f);
    if (self.code_pool) self.code_pool->visit("code_pool", f);
    if (self.interval_table.size() > 0)
      f("interval_table", self.interval_table, ParamKind::kTable);
    for (std::size_t i = 0; i < self.fw_stack.size(); ++i)
      self.fw_stack[i].visit("fw_stack" + std::to_string(i), f);
    if (self.fw_pool) self.fw_pool->visit("fw_pool", f);
    for (std::size_t i = 0; i < self.bw_stack.size(); ++i)
      self.bw_stack[i].visit("bw_stack" + std::to_string(i), f);
    if (self.bw_pool) self.bw_pool->visit("bw_pool", f);
    f("head_W", self.head_W, ParamKind::kWeight);
    f("head_b", self.head_b, ParamKind::kBias);
  }
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&n](const std::string&, const DenseMatrix<Scalar>& m, ParamKind) {
      n += static_cast<std::size_t>(m.size());
    });
    return n;
  }

  void freeze_padding_row() { code_embedding.row(0).setZero(); }
};

/// Glorot-uniform for weights, zeros for biases and the interval table, ones
/// for layer-norm gains; the padding embedding row is zeroed last.
/// Deterministic in `seed` (draws follow visit order).
template <typename Scalar>
BiteNetParams<Scalar> init_params(const ModelConfig& config, int num_codes,
                                  std::uint64_t seed) {
  config.validate();
  if (num_codes < 1) throw std::invalid_argument("init_params: empty vocabulary");
  BiteNetParams<Scalar> p;
  const Eigen::Index d = config.d;
  p.code_embedding.setZero(num_codes + 1, d);
  p.code_stack.assign(static_cast<std::size_t>(config.stack_depth),
                      MasEncParams<Scalar>::sized(d, config.heads, config.ffn_width()));
  p.fw_stack = p.code_stack;
  p.bw_stack = p.code_stack;
  if (config.variant != Variant::kAttention) {
    p.code_pool = PoolingParams<Scalar>::sized(d);
    p.fw_pool = PoolingParams<Scalar>::sized(d);
    p.bw_pool = PoolingParams<Scalar>::sized(d);
  }
  if (config.variant != Variant::kInterval)
    p.interval_table.setZero(config.interval_table_days, d);
  p.head_W.setZero(2 * d, config.output_width());
  p.head_b.setZero(1, config.output_width());

  Rng rng(seed);
  p.visit([&rng](const std::string&, DenseMatrix<Scalar>& m, ParamKind kind) {
    switch (kind) {
      case ParamKind::kWeight: {
        const double limit =
            std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
          for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = static_cast<Scalar>(rng.uniform(-limit, limit));
        break;
      }
      case ParamKind::kBias:
        m.setZero();
        break;
      case ParamKind::kGain:
        m.setOnes();
        break;
      case ParamKind::kTable:
        m.setZero();
        break;
    }
  });
  p.freeze_padding_row();
  return p;
}

/// Attention weights recorded during a forward pass, plus outputs, one entry
/// per sample. Weight vectors cover only the valid positions.
struct SampleTrace {
  std::vector<std::vector<double>> code_weights;  // per visit, over its codes
  std::vector<double> visit_weights_fw, visit_weights_bw;
  std::vector<double> u_fw, u_bw;  // directional journey embeddings
  std::vector<double> logits, probabilities;
};

template <typename Scalar>
struct ForwardOutput {
  Tensor<Scalar> logits;  // batch_size x output_width
  std::vector<SampleTrace> traces;
};

namespace detail {

template <typename Scalar>
std::vector<char> slice_code_valid(const PaddedBatch& batch, int b, int v) {
  std::vector<char> valid(static_cast<std::size_t>(batch.max_codes));
  for (int k = 0; k < batch.max_codes; ++k)
    valid[static_cast<std::size_t>(k)] = batch.code_valid[batch.code_index(b, v, k)];
  return valid;
}

template <typename Scalar>
Tensor<Scalar> sum_valid_rows(Graph<Scalar>& g, const Tensor<Scalar>& x,
                              const std::vector<char>& valid) {
  DenseMatrix<Scalar> ind = DenseMatrix<Scalar>::Zero(1, x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (valid[static_cast<std::size_t>(i)]) ind(0, i) = Scalar(1);
  return matmul(g.constant(ind), x);
}

}  // namespace detail

/// Embedding lookup for one (sample, visit) cell of a batch: a
/// max_codes x d tensor whose padded rows are the frozen zero row.
template <typename Scalar>
Tensor<Scalar> embed_codes([[maybe_unused]] Graph<Scalar>& g, ParamBinder<Scalar>& bind,
                           const BiteNetParams<Scalar>& params,
                           const PaddedBatch& batch, int b, int v) {
  std::vector<int> ids(static_cast<std::size_t>(batch.max_codes));
  for (int k = 0; k < batch.max_codes; ++k) {
    const std::int32_t id = batch.code_ids[batch.code_index(b, v, k)];
    if (id < 0 || id >= params.code_embedding.rows())
      throw std::out_of_range("embed_codes: code id " + std::to_string(id) +
                              " out of range");
    ids[static_cast<std::size_t>(k)] = id;
  }
  return rows_lookup(bind(params.code_embedding), ids);
}

template <typename Scalar>
struct VisitEncoding {
  Tensor<Scalar> vector;   // 1 x d
  std::vector<double> code_weights;  // over valid codes
};

/// Code-set -> visit vector. Full/interval: diagonal-masked MasEnc stack then
/// attention pooling. DireMask: unmasked stack then pooling. Attention: the
/// plain embedding sum, reported with uniform weights.
template <typename Scalar>
VisitEncoding<Scalar> encode_visit(Graph<Scalar>& g, ParamBinder<Scalar>& bind,
                                   const Tensor<Scalar>& code_embs,
                                   const std::vector<char>& code_valid,
                                   const BiteNetParams<Scalar>& params,
                                   const ModelConfig& config, bool training,
                                   Rng& rng) {
  int n_valid = 0;
  for (char c : code_valid) n_valid += c != 0;
  if (n_valid == 0)
    throw std::invalid_argument("encode_visit: all codes padded");

  VisitEncoding<Scalar> out;
  if (config.variant == Variant::kAttention) {
    out.vector = detail::sum_valid_rows(g, code_embs, code_valid);
    out.code_weights.assign(static_cast<std::size_t>(n_valid), 1.0 / n_valid);
    return out;
  }

  AttentionMask<Scalar> pad = key_padding_mask<Scalar>(code_valid);
  AttentionMask<Scalar> mask =
      config.variant == Variant::kDireMask
          ? pad
          : combine(build_mask<Scalar>(MaskKind::kDiagonal, code_embs.rows()), pad);
  Tensor<Scalar> x = code_embs;
  for (const auto& block : params.code_stack)
    x = masenc_block(x, &mask, block, bind, static_cast<Scalar>(config.dropout),
                     training, rng);
  PoolingResult<Scalar> pooled = attention_pooling(x, code_valid, *params.code_pool, bind);
  out.vector = pooled.output;
  for (Eigen::Index k = 0; k < pooled.weights.cols(); ++k)
    if (code_valid[static_cast<std::size_t>(k)])
      out.code_weights.push_back(static_cast<double>(pooled.weights.value()(0, k)));
  return out;
}

/// Interval-encoding rows for one sample: table row p_i (clamped to the last
/// row) for each valid visit, zero rows for padding. Returns an invalid
/// tensor when the variant ablates interval encodings.
template <typename Scalar>
Tensor<Scalar> interval_encode(Graph<Scalar>& g, ParamBinder<Scalar>& bind,
                               const BiteNetParams<Scalar>& params,
                               const ModelConfig& config,
                               const std::vector<int>& days, int pad_to) {
  if (config.variant == Variant::kInterval) return Tensor<Scalar>();
  std::vector<int> ids;
  ids.reserve(days.size());
  for (int p : days) {
    if (p < 0) throw std::invalid_argument("interval_encode: negative interval");
    ids.push_back(std::min(p, config.interval_table_days - 1));
  }
  Tensor<Scalar> rows = rows_lookup(bind(params.interval_table), ids);
  const int missing = pad_to - static_cast<int>(days.size());
  if (missing > 0) {
    Tensor<Scalar> zeros =
        g.constant(DenseMatrix<Scalar>::Zero(missing, config.d));
    return concat_rows<Scalar>({rows, zeros});
  }
  return rows;
}

/// Full hierarchical forward pass over a padded batch.
template <typename Scalar>
ForwardOutput<Scalar> forward(Graph<Scalar>& g, ParamBinder<Scalar>& bind,
                              const PaddedBatch& batch,
                              const BiteNetParams<Scalar>& params,
                              const ModelConfig& config, bool training,
                              Rng& rng) {
  config.validate();
  const MaskKind fw_kind =
      config.direction_swap ? MaskKind::kBackward : MaskKind::kForward;
  const MaskKind bw_kind =
      config.direction_swap ? MaskKind::kForward : MaskKind::kBackward;

  ForwardOutput<Scalar> out;
  std::vector<Tensor<Scalar>> logit_rows;
  logit_rows.reserve(static_cast<std::size_t>(batch.batch_size));

  for (int b = 0; b < batch.batch_size; ++b) {
    SampleTrace trace;
    std::vector<char> visit_valid(static_cast<std::size_t>(batch.max_visits));
    int n_visits = 0;
    for (int v = 0; v < batch.max_visits; ++v) {
      visit_valid[static_cast<std::size_t>(v)] = batch.visit_valid[batch.visit_index(b, v)];
      n_visits += visit_valid[static_cast<std::size_t>(v)] != 0;
    }
    if (n_visits == 0) throw std::invalid_argument("forward: sample has no valid visits");

    std::vector<Tensor<Scalar>> rows;
    rows.reserve(static_cast<std::size_t>(batch.max_visits));
    for (int v = 0; v < batch.max_visits; ++v) {
      if (!visit_valid[static_cast<std::size_t>(v)]) {
        rows.push_back(g.constant(DenseMatrix<Scalar>::Zero(1, config.d)));
        continue;
      }
      Tensor<Scalar> embs = embed_codes(g, bind, params, batch, b, v);
      VisitEncoding<Scalar> enc =
          encode_visit(g, bind, embs, detail::slice_code_valid<Scalar>(batch, b, v),
                       params, config, training, rng);
      rows.push_back(enc.vector);
      trace.code_weights.push_back(std::move(enc.code_weights));
    }
    Tensor<Scalar> visits =
        rows.size() == 1 ? rows.front() : concat_rows(rows);

    std::vector<int> days;
    for (int v = 0; v < n_visits; ++v)
      days.push_back(batch.intervals[batch.visit_index(b, v)]);
    Tensor<Scalar> intervals =
        interval_encode(g, bind, params, config, days, batch.max_visits);
    if (intervals.valid()) visits = add(visits, intervals);

    AttentionMask<Scalar> pad = key_padding_mask<Scalar>(visit_valid);
    AttentionMask<Scalar> fw_mask =
        config.variant == Variant::kDireMask
            ? pad
            : combine(build_mask<Scalar>(fw_kind, batch.max_visits), pad);
    AttentionMask<Scalar> bw_mask =
        config.variant == Variant::kDireMask
            ? pad
            : combine(build_mask<Scalar>(bw_kind, batch.max_visits), pad);

    auto run_direction = [&](const std::vector<MasEncParams<Scalar>>& stack,
                             const AttentionMask<Scalar>& mask,
                             const std::optional<PoolingParams<Scalar>>& pool,
                             std::vector<double>* weights_out) {
      Tensor<Scalar> x = visits;
      for (const auto& block : stack)
        x = masenc_block(x, &mask, block, bind,
                         static_cast<Scalar>(config.dropout), training, rng);
      if (config.variant == Variant::kAttention) {
        weights_out->assign(static_cast<std::size_t>(n_visits), 1.0 / n_visits);
        return detail::sum_valid_rows(g, x, visit_valid);
      }
      PoolingResult<Scalar> p = attention_pooling(x, visit_valid, *pool, bind);
      for (Eigen::Index i = 0; i < p.weights.cols(); ++i)
        if (visit_valid[static_cast<std::size_t>(i)])
          weights_out->push_back(static_cast<double>(p.weights.value()(0, i)));
      return p.output;
    };

    Tensor<Scalar> u_fw =
        run_direction(params.fw_stack, fw_mask, params.fw_pool, &trace.visit_weights_fw);
    Tensor<Scalar> u_bw =
        run_direction(params.bw_stack, bw_mask, params.bw_pool, &trace.visit_weights_bw);
    Tensor<Scalar> u_bi = concat_cols<Scalar>({u_fw, u_bw});
    Tensor<Scalar> logit_row = affine(u_bi, bind(params.head_W), bind(params.head_b));

    for (Eigen::Index c = 0; c < u_fw.cols(); ++c) {
      trace.u_fw.push_back(static_cast<double>(u_fw.value()(0, c)));
      trace.u_bw.push_back(static_cast<double>(u_bw.value()(0, c)));
    }
    for (Eigen::Index c = 0; c < logit_row.cols(); ++c) {
      const double z = static_cast<double>(logit_row.value()(0, c));
      trace.logits.push_back(z);
      trace.probabilities.push_back(1.0 / (1.0 + std::exp(-z)));
    }
    out.traces.push_back(std::move(trace));
    logit_rows.push_back(logit_row);
  }

  out.logits = logit_rows.size() == 1 ? logit_rows.front() : concat_rows(logit_rows);
  return out;
}

/// Logistic sigmoid per slot: the readmission head has one slot, the
/// diagnosis head one independent slot per category (multi-label).
template <typename Scalar>
DenseMatrix<Scalar> predict_proba(const DenseMatrix<Scalar>& logits, Task) {
  return (Scalar(1) / (Scalar(1) + (-logits.array()).exp())).matrix();
}

}  // namespace bitenet
