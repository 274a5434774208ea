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

#include "bitenet/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "bitenet/random.hpp"

namespace bitenet {

namespace {

using nlohmann::json;
namespace dist = synthdist;

std::string dx_code(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "dx:D%04d", i);
  return buf;
}

std::string px_code(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "px:P%04d", i);
  return buf;
}

std::string category_name(int c) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "C%02d", c);
  return buf;
}

/// Day index -> ISO date, anchored at 2018-01-01.
std::string day_to_date(int day) {
  using namespace std::chrono;
  const sys_days date = sys_days{year{2018} / January / 1} + days{day};
  const year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_patients < 1) throw std::invalid_argument("synth: num_patients must be >= 1");
  if (vocab_dx < 2 || vocab_px < 1) throw std::invalid_argument("synth: vocabulary too small");
  if (num_categories < 1 || cluster_count < 1)
    throw std::invalid_argument("synth: need categories and clusters");
  if (visits_min < 2 || visits_min > visits_max)
    throw std::invalid_argument("synth: need 2 <= visits_min <= visits_max");
  if (codes_min < 1 || codes_min > codes_max)
    throw std::invalid_argument("synth: need 1 <= codes_min <= codes_max");
  if (readm_base_rate <= 0.0 || readm_base_rate >= 1.0)
    throw std::invalid_argument("synth: readm_base_rate must be in (0,1)");
  if (trigger_codes < 2 || trigger_codes >= vocab_dx)
    throw std::invalid_argument("synth: need 2 <= trigger_codes < vocab_dx");
  // Round-robin cluster membership must leave each cluster a non-trigger pool
  // at least codes_max deep, so visits can always draw distinct codes.
  const int min_pool = vocab_dx / cluster_count - (trigger_codes / cluster_count + 1);
  if (min_pool < codes_max)
    throw std::invalid_argument(
        "synth: infeasible bounds: clusters too small for codes_max after "
        "reserving trigger codes");
}

SynthOutput generate(const SynthConfig& config, const std::string& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  SynthOutput out;
  out.journeys_path = out_dir + "/journeys.jsonl";
  out.categories_path = out_dir + "/categories.tsv";
  out.truth_path = out_dir + "/truth.json";

  // Cluster membership is round-robin; trigger codes are the first
  // `trigger_codes` dx codes. They keep their nominal cluster in the truth
  // file but are excluded from the draw pools, so they appear in visits only
  // through explicit insertion and carry a pure readmission signal.
  const auto cluster_of_code = [&](int code) { return code % config.cluster_count; };
  std::vector<std::vector<int>> pool(static_cast<std::size_t>(config.cluster_count));
  std::vector<int> noise_pool;
  for (int c = config.trigger_codes; c < config.vocab_dx; ++c) {
    pool[static_cast<std::size_t>(cluster_of_code(c))].push_back(c);
    noise_pool.push_back(c);
  }

  Rng root(config.seed);

  std::ofstream journeys(out.journeys_path, std::ios::trunc | std::ios::binary);
  if (!journeys) throw std::runtime_error(out.journeys_path + ": cannot open for writing");

  for (int p = 0; p < config.num_patients; ++p) {
    Rng rng = root.derive(static_cast<std::uint64_t>(p));
    const int n_visits = static_cast<int>(rng.uniform_int(config.visits_min, config.visits_max));

    json visits = json::array();
    int dominant = static_cast<int>(rng.uniform_int(0, config.cluster_count - 1));
    int admission = static_cast<int>(rng.uniform_int(0, dist::kFirstAdmissionMaxDay));
    int first_admission = admission;

    for (int v = 0; v < n_visits; ++v) {
      if (v > 0) {
        dominant = rng.bernoulli(dist::kClusterTransitionProb)
                       ? dist::next_cluster(dominant, config.cluster_count)
                       : static_cast<int>(rng.uniform_int(0, config.cluster_count - 1));
      }
      const int discharge = admission + static_cast<int>(rng.uniform_int(0, dist::kLosMaxDays));

      // Distinct non-trigger dx codes from the dominant-cluster/noise mixture.
      const int k = static_cast<int>(rng.uniform_int(config.codes_min, config.codes_max));
      std::set<int> dx;
      while (static_cast<int>(dx.size()) < k) {
        if (rng.bernoulli(dist::kInClusterDrawProb)) {
          const auto& cp = pool[static_cast<std::size_t>(dominant)];
          dx.insert(cp[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(cp.size()) - 1))]);
        } else {
          dx.insert(noise_pool[static_cast<std::size_t>(
              rng.uniform_int(0, static_cast<int>(noise_pool.size()) - 1))]);
        }
      }

      int n_triggers = 0;
      if (rng.bernoulli(dist::kTriggerVisitRate)) {
        n_triggers = rng.bernoulli(dist::kSecondTriggerProb) ? 2 : 1;
      }
      std::set<int> triggers;
      while (static_cast<int>(triggers.size()) < n_triggers)
        triggers.insert(static_cast<int>(rng.uniform_int(0, config.trigger_codes - 1)));

      json codes = json::array();
      for (int t : triggers) codes.push_back(dx_code(t));
      for (int c : dx) codes.push_back(dx_code(c));
      const int n_px = static_cast<int>(rng.uniform_int(dist::kPxPerVisitMin, dist::kPxPerVisitMax));
      std::set<int> px;
      while (static_cast<int>(px.size()) < n_px)
        px.insert(static_cast<int>(rng.uniform_int(0, config.vocab_px - 1)));
      for (int c : px) codes.push_back(px_code(c));

      visits.push_back(json{{"admission_date", day_to_date(admission)},
                            {"discharge_date", day_to_date(discharge)},
                            {"codes", codes}});

      if (v + 1 < n_visits) {
        // Readmission decision for this (indexed) visit drives the next gap.
        bool rule_active = n_triggers > 0;
        if (config.interval_effect)
          rule_active = rule_active &&
                        (admission - first_admission >= dist::kIntervalGateDays);
        double p_readm = config.readm_base_rate;
        if (rule_active)
          p_readm = n_triggers >= 2 ? dist::kForceMultiTrigger : dist::kForceSingleTrigger;
        const bool readmit = rng.bernoulli(p_readm);
        const int gap = readmit
                            ? static_cast<int>(rng.uniform_int(dist::kReadmGapMin, dist::kReadmGapMax))
                            : static_cast<int>(rng.uniform_int(dist::kNoReadmGapMin, dist::kNoReadmGapMax));
        admission = discharge + gap;
      }
    }

    char pid[16];
    std::snprintf(pid, sizeof(pid), "P%06d", p);
    journeys << json{{"patient_id", pid}, {"visits", visits}}.dump() << "\n";
  }
  journeys.close();
  if (!journeys) throw std::runtime_error(out.journeys_path + ": write failed");

  std::ofstream categories(out.categories_path, std::ios::trunc | std::ios::binary);
  if (!categories) throw std::runtime_error(out.categories_path + ": cannot open for writing");
  for (int c = 0; c < config.vocab_dx; ++c)
    categories << dx_code(c) << '\t'
               << category_name(cluster_of_code(c) % config.num_categories) << "\n";
  categories.close();
  if (!categories) throw std::runtime_error(out.categories_path + ": write failed");

  json truth;
  truth["version"] = 1;
  json trig = json::array();
  for (int t = 0; t < config.trigger_codes; ++t) trig.push_back(dx_code(t));
  truth["trigger_codes"] = trig;
  json clusters;
  for (int c = 0; c < config.vocab_dx; ++c) clusters[dx_code(c)] = cluster_of_code(c);
  truth["clusters"] = clusters;
  json pairs = json::array();
  for (int a = 0; a < config.vocab_dx; ++a)
    for (int b = a + 1; b < config.vocab_dx; ++b)
      if (cluster_of_code(a) == cluster_of_code(b))
        pairs.push_back(json::array({dx_code(a), dx_code(b)}));
  truth["pairs"] = pairs;

  std::ofstream truth_out(out.truth_path, std::ios::trunc | std::ios::binary);
  if (!truth_out) throw std::runtime_error(out.truth_path + ": cannot open for writing");
  truth_out << truth.dump(2) << "\n";
  truth_out.close();
  if (!truth_out) throw std::runtime_error(out.truth_path + ": write failed");

  return out;
}

PlantedTruth planted_pairs(const std::string& truth_path) {
  std::ifstream in(truth_path);
  if (!in) throw std::runtime_error(truth_path + ": cannot open truth file");
  json truth;
  try {
    in >> truth;
  } catch (const json::exception& e) {
    throw std::runtime_error(truth_path + ": corrupt truth file: " + e.what());
  }
  PlantedTruth out;
  for (const auto& t : truth.at("trigger_codes"))
    out.trigger_codes.push_back(t.get<std::string>());
  for (const auto& [code, cluster] : truth.at("clusters").items())
    out.cluster_of[code] = cluster.get<int>();
  for (const auto& pr : truth.at("pairs")) {
    std::string a = pr.at(0).get<std::string>();
    std::string b = pr.at(1).get<std::string>();
    if (a == b) throw std::runtime_error(truth_path + ": self pair in truth file");
    if (b < a) std::swap(a, b);
    out.pairs.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

}  // namespace bitenet
