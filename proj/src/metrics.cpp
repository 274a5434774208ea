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

#include "bitenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "bitenet/random.hpp"

namespace bitenet {

double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("pr_auc: size mismatch");
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (int y : labels) positives += y != 0;
  if (positives == 0 || positives == n)
    throw std::invalid_argument("pr_auc: labels are degenerate (single class)");

  std::vector<int> order = ranked_from_scores(scores);
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    if (labels[static_cast<std::size_t>(order[rank])] != 0) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(positives);
}

std::vector<int> ranked_from_scores(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&scores](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return order;
}

double precision_at_k(const std::vector<int>& ranked, const std::vector<int>& truth,
                      int k) {
  if (k < 1) throw std::invalid_argument("precision_at_k: k must be >= 1");
  if (truth.empty()) throw std::invalid_argument("precision_at_k: empty truth set");
  const std::set<int> truth_set(truth.begin(), truth.end());
  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  int hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += truth_set.count(ranked[i]) > 0;
  const int denom = std::min<int>(k, static_cast<int>(truth_set.size()));
  return static_cast<double>(hits) / static_cast<double>(denom);
}

namespace {

double pair_distance(const Eigen::MatrixXd& e, int a, int b, NnsMetric metric) {
  if (metric == NnsMetric::kEuclidean) return (e.row(a) - e.row(b)).norm();
  const double na = e.row(a).norm(), nb = e.row(b).norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - e.row(a).dot(e.row(b)) / (na * nb);
}

}  // namespace

double nns_accuracy_at_k(const Eigen::MatrixXd& embeddings,
                         const std::vector<std::pair<int, int>>& pairs, int k,
                         NnsMetric metric) {
  const int n = static_cast<int>(embeddings.rows());
  if (k < 1 || k >= n)
    throw std::invalid_argument("nns_accuracy_at_k: need 1 <= k < number of codes");
  std::vector<std::set<int>> neighbors(static_cast<std::size_t>(n));
  for (const auto& [a, b] : pairs) {
    if (a < 0 || a >= n || b < 0 || b >= n || a == b)
      throw std::invalid_argument("nns_accuracy_at_k: bad pair");
    neighbors[static_cast<std::size_t>(a)].insert(b);
    neighbors[static_cast<std::size_t>(b)].insert(a);
  }

  double total = 0.0;
  int queries = 0;
  std::vector<std::pair<double, int>> dist;
  for (int q = 0; q < n; ++q) {
    if (neighbors[static_cast<std::size_t>(q)].empty()) continue;
    dist.clear();
    for (int j = 0; j < n; ++j) {
      if (j == q) continue;
      dist.emplace_back(pair_distance(embeddings, q, j, metric), j);
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    int hits = 0;
    for (int i = 0; i < k; ++i)
      hits += neighbors[static_cast<std::size_t>(q)].count(dist[static_cast<std::size_t>(i)].second) > 0;
    total += static_cast<double>(hits) / static_cast<double>(k);
    ++queries;
  }
  if (queries == 0)
    throw std::invalid_argument("nns_accuracy_at_k: no query has a true neighbor");
  return total / queries;
}

std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                        int max_iters) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k > n)
    throw std::invalid_argument("kmeans: need 1 <= k <= number of points");

  Rng rng(seed);
  Eigen::MatrixXd centroids(k, points.cols());

  // k-means++ seeding: each next centroid drawn with probability
  // proportional to squared distance from the nearest chosen one.
  std::vector<double> d2(static_cast<std::size_t>(n),
                         std::numeric_limits<double>::infinity());
  int first = static_cast<int>(rng.uniform_int(0, n - 1));
  centroids.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = (points.row(i) - centroids.row(c - 1)).squaredNorm();
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], d);
      sum += d2[static_cast<std::size_t>(i)];
    }
    int chosen = n - 1;
    if (sum > 0.0) {
      const double target = rng.uniform() * sum;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<int>(rng.uniform_int(0, n - 1));
    }
    centroids.row(c) = points.row(chosen);
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: hand it the point farthest from its own centroid.
      int farthest = 0;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        const double d =
            (points.row(i) - centroids.row(assign[static_cast<std::size_t>(i)]))
                .squaredNorm();
        if (d > far_d) {
          far_d = d;
          farthest = i;
        }
      }
      centroids.row(c) = points.row(farthest);
      assign[static_cast<std::size_t>(farthest)] = c;
    }
  }
  return assign;
}

namespace {

double entropy(const std::vector<int>& labels) {
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  const double n = static_cast<double>(labels.size());
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = c / n;
    h -= p * std::log(p);
  }
  return h;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> a_to_b;
  std::map<int, int> b_to_a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [ita, oka] = a_to_b.emplace(a[i], b[i]);
    auto [itb, okb] = b_to_a.emplace(b[i], a[i]);
    if (ita->second != b[i] || itb->second != a[i]) return false;
  }
  return true;
}

}  // namespace

double nmi(const std::vector<int>& assign_a, const std::vector<int>& assign_b) {
  if (assign_a.empty() || assign_a.size() != assign_b.size())
    throw std::invalid_argument("nmi: inputs must be non-empty and equal length");
  const double ha = entropy(assign_a);
  const double hb = entropy(assign_b);
  if (ha == 0.0 && hb == 0.0) return same_partition(assign_a, assign_b) ? 1.0 : 0.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;

  std::map<std::pair<int, int>, int> joint;
  std::map<int, int> ca, cb;
  for (std::size_t i = 0; i < assign_a.size(); ++i) {
    ++joint[{assign_a[i], assign_b[i]}];
    ++ca[assign_a[i]];
    ++cb[assign_b[i]];
  }
  const double n = static_cast<double>(assign_a.size());
  double mi = 0.0;
  for (const auto& [ab, c] : joint) {
    const double p_ab = c / n;
    const double p_a = ca[ab.first] / n;
    const double p_b = cb[ab.second] / n;
    mi += p_ab * std::log(p_ab / (p_a * p_b));
  }
  return mi / std::sqrt(ha * hb);
}

namespace {

using nlohmann::json;

json report_body(const MetricReport& r) {
  json j;
  j["task"] = r.task;
  if (r.pr_auc) j["pr_auc"] = *r.pr_auc;
  if (!r.precision_at_k.empty()) {
    json p;
    for (const auto& [k, v] : r.precision_at_k) p[std::to_string(k)] = v;
    j["precision_at_k"] = p;
  }
  if (!r.nns_accuracy_at_k.empty()) {
    json p;
    for (const auto& [k, v] : r.nns_accuracy_at_k) p[std::to_string(k)] = v;
    j["nns_accuracy_at_k"] = p;
  }
  if (r.nmi) j["nmi"] = *r.nmi;
  return j;
}

/// Flattens a report into name -> value for mean/std aggregation.
std::map<std::string, double> report_values(const MetricReport& r) {
  std::map<std::string, double> out;
  if (r.pr_auc) out["pr_auc"] = *r.pr_auc;
  for (const auto& [k, v] : r.precision_at_k)
    out["precision_at_" + std::to_string(k)] = v;
  for (const auto& [k, v] : r.nns_accuracy_at_k)
    out["nns_accuracy_at_" + std::to_string(k)] = v;
  if (r.nmi) out["nmi"] = *r.nmi;
  return out;
}

}  // namespace

std::string metric_report_to_json(const MetricReport& report) {
  json j = report_body(report);
  j["version"] = 1;
  return j.dump(2) + "\n";
}

std::string metric_reports_to_json(const std::vector<MetricReport>& reports,
                                   const std::vector<std::uint64_t>& seeds) {
  if (reports.empty()) throw std::invalid_argument("no reports to aggregate");
  json j;
  j["version"] = 1;
  j["task"] = reports.front().task;
  j["seeds"] = seeds;
  json per_seed = json::array();
  for (const auto& r : reports) per_seed.push_back(report_body(r));
  j["per_seed"] = per_seed;

  std::map<std::string, std::vector<double>> series;
  for (const auto& r : reports)
    for (const auto& [name, v] : report_values(r)) series[name].push_back(v);
  json mean_j, std_j;
  for (const auto& [name, values] : series) {
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    mean_j[name] = mean;
    std_j[name] = sd;
  }
  j["mean"] = mean_j;
  j["std"] = std_j;
  return j.dump(2) + "\n";
}

}  // namespace bitenet
