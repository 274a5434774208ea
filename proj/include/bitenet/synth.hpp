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

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace bitenet {

/// Synthetic EHR generator configuration. The generator plants recoverable
/// structure: code co-occurrence clusters tied to categories, a deterministic
/// cluster-transition rule driving next-visit diagnoses, and trigger codes
/// driving 30-day readmissions.
struct SynthConfig {
  int num_patients = 5000;
  int vocab_dx = 100;
  int vocab_px = 40;
  int num_categories = 10;
  int visits_min = 2, visits_max = 4;
  int codes_min = 2, codes_max = 4;  // non-trigger dx codes per visit
  int trigger_codes = 5;
  int cluster_count = 10;
  double readm_base_rate = 0.02;
  bool interval_effect = false;
  std::uint64_t seed = 1;

  void validate() const;
};

namespace synthdist {

// Distribution constants. They are part of the generator's contract: the
// acceptance oracles (closed-form Bayes ranking, planted readmission rates)
// are computed from these numbers.

/// Probability that visit t+1's dominant cluster is next(dom_t) rather than
/// uniform.
constexpr double kClusterTransitionProb = 0.85;
/// Probability that a code draw comes from the dominant cluster rather than
/// the uniform noise pool.
constexpr double kInClusterDrawProb = 0.85;
/// Probability a visit receives trigger-code insertions at all.
constexpr double kTriggerVisitRate = 0.4;
/// Probability that an insertion event inserts two distinct triggers.
constexpr double kSecondTriggerProb = 0.5;
/// Forced-readmission probabilities by trigger count; their 50/50 mixture
/// keeps the marginal rate over trigger-bearing visits at 0.9.
constexpr double kForceSingleTrigger = 0.81;
constexpr double kForceMultiTrigger = 0.99;
/// With interval_effect, triggers only fire once the indexed visit is this
/// many days past the first admission.
constexpr int kIntervalGateDays = 60;

constexpr int kLosMaxDays = 7;
constexpr int kReadmGapMin = 1, kReadmGapMax = 30;
constexpr int kNoReadmGapMin = 31, kNoReadmGapMax = 120;
constexpr int kFirstAdmissionMaxDay = 180;
constexpr int kPxPerVisitMin = 1, kPxPerVisitMax = 2;

inline int next_cluster(int cluster, int cluster_count) {
  return (cluster + 1) % cluster_count;
}

}  // namespace synthdist

struct SynthOutput {
  std::string journeys_path;
  std::string categories_path;
  std::string truth_path;
};

/// Writes journeys.jsonl, categories.tsv and truth.json under `out_dir`
/// (created if missing). Bytewise deterministic in the config.
SynthOutput generate(const SynthConfig& config, const std::string& out_dir);

struct PlantedTruth {
  std::vector<std::string> trigger_codes;
  std::map<std::string, int> cluster_of;                     // dx code -> cluster
  std::vector<std::pair<std::string, std::string>> pairs;    // within-cluster, a < b
};

/// Reads a truth.json emitted by generate(); pairs are undirected and
/// self-free, labels cover every dx code exactly once.
PlantedTruth planted_pairs(const std::string& truth_path);

}  // namespace bitenet
