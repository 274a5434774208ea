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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bitenet/ehr.hpp"
#include "bitenet/metrics.hpp"
#include "bitenet/model.hpp"

namespace bitenet {

struct TrainConfig {
  int batch_size = 32;
  int epochs = 10;
  double learning_rate = 1e-3;
  double rmsprop_decay = 0.9;
  double rmsprop_eps = 1e-8;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
  std::uint64_t seed = 1;

  void validate() const;
};

struct SplitResult {
  std::vector<LabeledSample> train, valid, test;
};

/// Patient-level split: every sample of one patient lands in exactly one of
/// the three parts. Sizes follow the ratios to within one patient; each part
/// is non-empty whenever there are at least three patients.
SplitResult split(const std::vector<LabeledSample>& samples,
                  const std::array<double, 3>& ratios, std::uint64_t seed);

/// One RMSprop accumulator per parameter element:
/// state <- decay * state + (1-decay) * grad^2,
/// param <- param - lr * grad / sqrt(state + eps).
void rmsprop_update(DenseMatrix<float>& param, const DenseMatrix<float>& grad,
                    DenseMatrix<float>& accum, float lr, float decay, float eps);

struct RmsPropState {
  std::vector<DenseMatrix<float>> accum;  // aligned with BiteNetParams visit order
};

/// Applies RMSprop over every parameter using the gradients collected by the
/// binder, then re-zeroes the padding embedding row.
void rmsprop_step(BiteNetParams<float>& params, const ParamBinder<float>& binder,
                  RmsPropState& state, float lr, float decay = 0.9f,
                  float eps = 1e-8f);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainResult {
  BiteNetParams<float> params;  // parameters of the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

/// Seeded training loop. The validation metric is PR-AUC for readmission and
/// precision@20 for diagnosis; the best-validation parameters are returned.
/// Aborts with a diagnostic if the loss diverges to NaN.
TrainResult train(const std::vector<PatientJourney>& journeys,
                  const Vocabulary& vocab,
                  const std::vector<LabeledSample>& train_samples,
                  const std::vector<LabeledSample>& valid_samples,
                  const ModelConfig& model_config, const TrainConfig& train_config);

/// Per-sample probabilities in sample order: one per sample (readmission) or
/// one row of num_categories per sample (diagnosis).
std::vector<std::vector<double>> score_samples(
    const std::vector<PatientJourney>& journeys,
    const std::vector<LabeledSample>& samples, const BiteNetParams<float>& params,
    const ModelConfig& config, int batch_size);

/// Supervised metrics on a sample set (PR-AUC or precision@k over `k_list`).
MetricReport evaluate_supervised(const std::vector<PatientJourney>& journeys,
                                 const std::vector<LabeledSample>& samples,
                                 const BiteNetParams<float>& params,
                                 const ModelConfig& config, int batch_size,
                                 const std::vector<int>& k_list = {5, 10, 15, 20,
                                                                   25, 30});

/// Rows 1..num_codes of the embedding matrix (padding row excluded),
/// keyed by vocabulary order.
Eigen::MatrixXd extract_code_embeddings(const BiteNetParams<float>& params);

/// Writes "code<TAB>d" then one "code<TAB>v1,...,vd" line per code in
/// vocabulary (lexicographic) order; values round-trip exactly.
void export_embeddings(const BiteNetParams<float>& params, const Vocabulary& vocab,
                       const std::string& path);

std::string epoch_log_to_json(const std::vector<EpochLog>& log);

}  // namespace bitenet
