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

#include "bitenet/cli_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bitenet {

namespace {

std::map<std::string, RunConfig::KeyDoc> build_schema() {
  std::map<std::string, RunConfig::KeyDoc> s;
  s["data.journeys"] = {"", "journey line file (one JSON patient record per line)"};
  s["data.categories"] = {"", "code<TAB>category map file (diagnosis task)"};
  s["data.mode"] = {"dxtx", "dx (diagnosis codes only) or dxtx (diagnoses and procedures)"};
  s["data.min_visits"] = {"2", "drop patients with fewer remaining visits"};
  s["data.min_code_freq"] = {"5", "drop codes rarer than this corpus-wide"};
  s["data.window_days"] = {"30", "readmission window (inclusive)"};
  s["model.d"] = {"128", "embedding dimension (divisible by model.heads)"};
  s["model.stack_depth"] = {"2", "MasEnc blocks per stack"};
  s["model.heads"] = {"4", "attention heads"};
  s["model.dropout"] = {"0.1", "dropout rate"};
  s["model.interval_days"] = {"4015", "interval lookup-table rows (dataset span in days)"};
  s["model.variant"] = {"full", "full | attention | diremask | interval"};
  s["model.task"] = {"readmission", "readmission | diagnosis"};
  s["model.direction_swap"] = {"false", "swap the forward/backward mask orientations"};
  s["train.batch_size"] = {"32", "minibatch size"};
  s["train.epochs"] = {"10", "training epochs"};
  s["train.learning_rate"] = {"0.001", "RMSprop learning rate"};
  s["train.rmsprop_decay"] = {"0.9", "RMSprop decay"};
  s["train.rmsprop_eps"] = {"1e-8", "RMSprop epsilon"};
  s["train.split"] = {"0.8,0.1,0.1", "train/valid/test ratios (patient level)"};
  s["seeds"] = {"1", "comma-separated run seeds; multi-seed runs report mean and std"};
  s["out.dir"] = {"out", "output directory"};
  s["eval.params"] = {"", "parameter file to evaluate/embed/explain"};
  s["eval.pairs"] = {"", "planted-truth JSON for NNS/NMI evaluation"};
  s["explain.patients"] = {"", "comma-separated patient ids to explain"};
  s["synth.num_patients"] = {"5000", "patients to generate"};
  s["synth.vocab_dx"] = {"100", "distinct diagnosis codes"};
  s["synth.vocab_px"] = {"40", "distinct procedure codes"};
  s["synth.num_categories"] = {"10", "diagnosis categories"};
  s["synth.visits_min"] = {"2", "minimum visits per patient"};
  s["synth.visits_max"] = {"4", "maximum visits per patient"};
  s["synth.codes_min"] = {"2", "minimum non-trigger dx codes per visit"};
  s["synth.codes_max"] = {"4", "maximum non-trigger dx codes per visit"};
  s["synth.trigger_codes"] = {"5", "readmission-driving dx codes"};
  s["synth.cluster_count"] = {"10", "planted co-occurrence clusters"};
  s["synth.readm_base_rate"] = {"0.02", "readmission rate without a trigger"};
  s["synth.interval_effect"] = {"false", "gate the trigger rule on elapsed days"};
  s["synth.seed"] = {"1", "generator seed"};
  return s;
}

}  // namespace

const std::map<std::string, RunConfig::KeyDoc>& RunConfig::schema() {
  static const std::map<std::string, KeyDoc> s = build_schema();
  return s;
}

RunConfig::RunConfig() {
  for (const auto& [key, doc] : schema()) values_[key] = doc.default_value;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open config file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    try {
      set(line.substr(first, last - first + 1));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("expected key=value, got '" + assignment + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!schema().count(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(get(key), &pos);
    if (pos != get(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': '" + get(key) +
                                "' is not an integer");
  }
}

double RunConfig::get_double(const std::string& key) const {
  try {
    std::size_t pos = 0;
    const double v = std::stod(get(key), &pos);
    if (pos != get(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': '" + get(key) +
                                "' is not a number");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + key + "': '" + v + "' is not a boolean");
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(get(key), &pos);
    if (pos != get(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': '" + get(key) +
                                "' is not an unsigned integer");
  }
}

std::array<double, 3> RunConfig::get_ratios(const std::string& key) const {
  std::array<double, 3> out{};
  std::stringstream ss(get(key));
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw std::invalid_argument("config key '" + key + "': expected 3 ratios");
    out[static_cast<std::size_t>(i++)] = std::stod(part);
  }
  if (i != 3) throw std::invalid_argument("config key '" + key + "': expected 3 ratios");
  return out;
}

std::vector<std::uint64_t> RunConfig::get_u64_list(const std::string& key) const {
  std::vector<std::uint64_t> out;
  std::stringstream ss(get(key));
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      out.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw std::invalid_argument("config key '" + key + "': '" + part +
                                  "' is not an unsigned integer");
    }
  }
  if (out.empty())
    throw std::invalid_argument("config key '" + key + "': empty list");
  return out;
}

}  // namespace bitenet
