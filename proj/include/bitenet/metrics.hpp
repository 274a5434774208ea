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

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bitenet {

/// Average precision: scores sorted descending with ties broken by stable
/// input order; AP = sum over positive ranks of precision-at-rank divided by
/// the number of positives. Requires at least one positive and one negative.
double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// |top-k of `ranked`  intersected with `truth`| / min(k, |truth|).
double precision_at_k(const std::vector<int>& ranked, const std::vector<int>& truth,
                      int k);

/// Index order of descending scores, ties broken by lower index.
std::vector<int> ranked_from_scores(const std::vector<double>& scores);

enum class NnsMetric { kEuclidean, kCosine };

/// Mean over queries (rows with at least one true neighbor) of
/// |k nearest (self excluded, distance ties by lower id) ∩ true neighbors| / k.
double nns_accuracy_at_k(const Eigen::MatrixXd& embeddings,
                         const std::vector<std::pair<int, int>>& pairs, int k,
                         NnsMetric metric = NnsMetric::kEuclidean);

/// Lloyd's algorithm with k-means++ seeding; runs to an assignment fixpoint
/// or max_iters. An emptied cluster is refilled with the point farthest from
/// its assigned centroid.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                        int max_iters = 100);

/// Normalized mutual information I(A;B)/sqrt(H(A)H(B)). Both entropies zero:
/// 1.0 when the partitions coincide as label patterns, else 0.0; exactly one
/// zero: 0.0.
double nmi(const std::vector<int>& assign_a, const std::vector<int>& assign_b);

struct MetricReport {
  std::string task;
  std::optional<double> pr_auc;
  std::map<int, double> precision_at_k;     // k in {5,10,15,20,25,30}
  std::map<int, double> nns_accuracy_at_k;  // k in {1,5,10}
  std::optional<double> nmi;
};

std::string metric_report_to_json(const MetricReport& report);

/// Mean and sample standard deviation per metric over per-seed reports.
std::string metric_reports_to_json(const std::vector<MetricReport>& reports,
                                   const std::vector<std::uint64_t>& seeds);

}  // namespace bitenet
