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

#include "bitenet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace bitenet {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (learning_rate < 0) throw std::invalid_argument("train config: negative learning rate");
  for (double r : split_ratios)
    if (r <= 0) throw std::invalid_argument("train config: split ratios must be positive");
  const double sum = split_ratios[0] + split_ratios[1] + split_ratios[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("train config: split ratios must sum to 1");
}

SplitResult split(const std::vector<LabeledSample>& samples,
                  const std::array<double, 3>& ratios, std::uint64_t seed) {
  for (double r : ratios)
    if (r <= 0) throw std::invalid_argument("split: ratios must be positive");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw std::invalid_argument("split: ratios must sum to 1");

  // Patients in first-appearance order, then a seeded shuffle.
  std::vector<int> patients;
  {
    std::vector<char> seen;
    for (const auto& s : samples) {
      if (s.journey >= static_cast<int>(seen.size()))
        seen.resize(static_cast<std::size_t>(s.journey) + 1, 0);
      if (!seen[static_cast<std::size_t>(s.journey)]) {
        seen[static_cast<std::size_t>(s.journey)] = 1;
        patients.push_back(s.journey);
      }
    }
  }
  const int n = static_cast<int>(patients.size());
  if (n < 3) throw std::invalid_argument("split: need at least 3 patients");
  Rng rng(seed);
  rng.shuffle(patients);

  int b1 = static_cast<int>(std::llround(ratios[0] * n));
  int b2 = static_cast<int>(std::llround((ratios[0] + ratios[1]) * n));
  b1 = std::clamp(b1, 1, n - 2);
  b2 = std::clamp(b2, b1 + 1, n - 1);

  std::vector<int> part(static_cast<std::size_t>(n), 0);
  std::vector<int> bucket_of;
  {
    int max_j = 0;
    for (int p : patients) max_j = std::max(max_j, p);
    bucket_of.assign(static_cast<std::size_t>(max_j) + 1, 0);
    for (int i = 0; i < n; ++i)
      bucket_of[static_cast<std::size_t>(patients[static_cast<std::size_t>(i)])] =
          i < b1 ? 0 : (i < b2 ? 1 : 2);
  }

  SplitResult out;
  for (const auto& s : samples) {
    switch (bucket_of[static_cast<std::size_t>(s.journey)]) {
      case 0: out.train.push_back(s); break;
      case 1: out.valid.push_back(s); break;
      default: out.test.push_back(s); break;
    }
  }
  return out;
}

void rmsprop_update(DenseMatrix<float>& param, const DenseMatrix<float>& grad,
                    DenseMatrix<float>& accum, float lr, float decay, float eps) {
  if (accum.size() == 0) accum.setZero(param.rows(), param.cols());
  accum = decay * accum + (1.0f - decay) * grad.cwiseProduct(grad);
  param -= lr * grad.cwiseQuotient((accum.array() + eps).sqrt().matrix());
}

void rmsprop_step(BiteNetParams<float>& params, const ParamBinder<float>& binder,
                  RmsPropState& state, float lr, float decay, float eps) {
  std::size_t count = 0;
  params.visit([&count](const std::string&, const DenseMatrix<float>&, ParamKind) {
    ++count;
  });
  if (state.accum.size() != count) state.accum.assign(count, DenseMatrix<float>());

  std::size_t slot = 0;
  params.visit([&](const std::string&, DenseMatrix<float>& m, ParamKind) {
    const DenseMatrix<float> grad = binder.grad_of(m);
    rmsprop_update(m, grad, state.accum[slot], lr, decay, eps);
    ++slot;
  });
  params.freeze_padding_row();
}

namespace {

/// Builds the label and validity matrices for a batch.
void batch_labels(const PaddedBatch& b, const ModelConfig& config,
                  DenseMatrix<float>* labels, DenseMatrix<float>* valid) {
  const int out = config.output_width();
  labels->setZero(b.batch_size, out);
  valid->setOnes(b.batch_size, out);
  if (config.task == Task::kReadmission) {
    if (static_cast<int>(b.readm_labels.size()) != b.batch_size)
      throw std::invalid_argument("batch lacks readmission labels");
    for (int i = 0; i < b.batch_size; ++i) (*labels)(i, 0) = b.readm_labels[static_cast<std::size_t>(i)];
  } else {
    if (static_cast<int>(b.dx_labels.size()) != b.batch_size)
      throw std::invalid_argument("batch lacks diagnosis labels");
    for (int i = 0; i < b.batch_size; ++i)
      for (int c : b.dx_labels[static_cast<std::size_t>(i)]) {
        if (c < 0 || c >= out)
          throw std::out_of_range("diagnosis label out of range");
        (*labels)(i, c) = 1.0f;
      }
  }
}

double validation_metric(const std::vector<PatientJourney>& journeys,
                         const std::vector<LabeledSample>& samples,
                         const BiteNetParams<float>& params,
                         const ModelConfig& config, int batch_size) {
  const auto scores = score_samples(journeys, samples, params, config, batch_size);
  if (config.task == Task::kReadmission) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      s.push_back(scores[i][0]);
      y.push_back(samples[i].readm_label);
    }
    return pr_auc(s, y);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    total += precision_at_k(ranked_from_scores(scores[i]), samples[i].dx_labels, 20);
  return total / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train(const std::vector<PatientJourney>& journeys,
                  const Vocabulary& vocab,
                  const std::vector<LabeledSample>& train_samples,
                  const std::vector<LabeledSample>& valid_samples,
                  const ModelConfig& model_config, const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (train_samples.empty()) throw std::invalid_argument("train: empty training split");

  Rng run_rng(train_config.seed);
  BiteNetParams<float> params =
      init_params<float>(model_config, vocab.num_codes(), run_rng.derive(1).next_u64());
  Rng dropout_rng = run_rng.derive(2);

  RmsPropState state;
  TrainResult result;
  result.params = params;
  double best_metric = -1.0;

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    const std::uint64_t shuffle_seed =
        run_rng.derive(3 + static_cast<std::uint64_t>(epoch)).next_u64();
    const auto batches =
        batch(train_samples, journeys, train_config.batch_size, shuffle_seed);

    double loss_sum = 0.0;
    std::size_t n_samples = 0;
    for (const PaddedBatch& b : batches) {
      Graph<float> graph;
      ParamBinder<float> bind(graph);
      ForwardOutput<float> fwd =
          forward(graph, bind, b, params, model_config, true, dropout_rng);
      Tensor<float> probs = sigmoid(fwd.logits);
      DenseMatrix<float> labels, valid;
      batch_labels(b, model_config, &labels, &valid);
      Tensor<float> loss = bce_loss(probs, labels, valid);
      const double loss_value = static_cast<double>(loss.scalar());
      if (!std::isfinite(loss_value))
        throw std::runtime_error(
            "train: loss diverged (NaN/inf) at epoch " + std::to_string(epoch + 1) +
            "; lower the learning rate");
      graph.backward(loss);
      rmsprop_step(params, bind, state,
                   static_cast<float>(train_config.learning_rate),
                   static_cast<float>(train_config.rmsprop_decay),
                   static_cast<float>(train_config.rmsprop_eps));
      loss_sum += loss_value * b.batch_size;
      n_samples += static_cast<std::size_t>(b.batch_size);
    }

    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.train_loss = loss_sum / static_cast<double>(n_samples);
    entry.val_metric =
        valid_samples.empty()
            ? 0.0
            : validation_metric(journeys, valid_samples, params, model_config,
                                train_config.batch_size);
    result.log.push_back(entry);

    if (entry.val_metric > best_metric || valid_samples.empty()) {
      best_metric = entry.val_metric;
      result.params = params;
      result.best_epoch = entry.epoch;
    }
  }
  return result;
}

std::vector<std::vector<double>> score_samples(
    const std::vector<PatientJourney>& journeys,
    const std::vector<LabeledSample>& samples, const BiteNetParams<float>& params,
    const ModelConfig& config, int batch_size) {
  std::vector<std::vector<double>> scores(samples.size());
  const auto batches = batch(samples, journeys, batch_size, 0);
  Rng unused(0);
  for (const PaddedBatch& b : batches) {
    Graph<float> graph;
    ParamBinder<float> bind(graph);
    ForwardOutput<float> fwd = forward(graph, bind, b, params, config, false, unused);
    const DenseMatrix<float> probs =
        predict_proba<float>(fwd.logits.value(), config.task);
    for (int i = 0; i < b.batch_size; ++i) {
      std::vector<double> row(static_cast<std::size_t>(probs.cols()));
      for (Eigen::Index c = 0; c < probs.cols(); ++c)
        row[static_cast<std::size_t>(c)] = static_cast<double>(probs(i, c));
      scores[static_cast<std::size_t>(b.sample_indices[static_cast<std::size_t>(i)])] =
          std::move(row);
    }
  }
  return scores;
}

MetricReport evaluate_supervised(const std::vector<PatientJourney>& journeys,
                                 const std::vector<LabeledSample>& samples,
                                 const BiteNetParams<float>& params,
                                 const ModelConfig& config, int batch_size,
                                 const std::vector<int>& k_list) {
  MetricReport report;
  report.task = to_string(config.task);
  const auto scores = score_samples(journeys, samples, params, config, batch_size);
  if (config.task == Task::kReadmission) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      s.push_back(scores[i][0]);
      y.push_back(samples[i].readm_label);
    }
    report.pr_auc = pr_auc(s, y);
    return report;
  }
  for (int k : k_list) {
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
      total += precision_at_k(ranked_from_scores(scores[i]), samples[i].dx_labels, k);
    report.precision_at_k[k] = total / static_cast<double>(samples.size());
  }
  return report;
}

Eigen::MatrixXd extract_code_embeddings(const BiteNetParams<float>& params) {
  const Eigen::Index n = params.code_embedding.rows() - 1;
  return params.code_embedding.bottomRows(n).cast<double>();
}

void export_embeddings(const BiteNetParams<float>& params, const Vocabulary& vocab,
                       const std::string& path) {
  if (params.code_embedding.rows() != vocab.size())
    throw std::invalid_argument("export_embeddings: vocabulary size mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  const Eigen::Index d = params.code_embedding.cols();
  out << "code\t" << d << "\n";
  char buf[64];
  for (int id = 1; id <= vocab.num_codes(); ++id) {
    out << vocab.code_of(id) << '\t';
    for (Eigen::Index c = 0; c < d; ++c) {
      // max_digits10 so the text round-trips to the stored float exactly
      std::snprintf(buf, sizeof(buf), "%.9g",
                    static_cast<double>(params.code_embedding(id, c)));
      out << buf;
      if (c + 1 < d) out << ',';
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::string epoch_log_to_json(const std::vector<EpochLog>& log) {
  std::string out;
  for (const auto& e : log) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"val_metric", e.val_metric}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace bitenet
