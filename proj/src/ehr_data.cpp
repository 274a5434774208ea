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

#include "bitenet/ehr.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bitenet/random.hpp"

namespace bitenet {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::runtime_error(where + ": " + what);
}

bool has_code_namespace(const std::string& code) {
  return code.rfind("dx:", 0) == 0 || code.rfind("px:", 0) == 0;
}

bool is_dx(const std::string& code) { return code.rfind("dx:", 0) == 0; }

/// "YYYY-MM-DD" -> days since 1970-01-01, with calendar validation.
long parse_date_days(const std::string& s, const std::string& where) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    fail(where, "unparseable date '" + s + "' (expected YYYY-MM-DD)");
  int y = 0, m = 0, d = 0;
  try {
    y = std::stoi(s.substr(0, 4));
    m = std::stoi(s.substr(5, 2));
    d = std::stoi(s.substr(8, 2));
  } catch (const std::exception&) {
    fail(where, "unparseable date '" + s + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) fail(where, "invalid calendar date '" + s + "'");
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

}  // namespace

int Vocabulary::id_of(const std::string& code) const {
  auto it = index.find(code);
  if (it == index.end()) throw std::out_of_range("unknown code: " + code);
  return it->second;
}

const std::string& Vocabulary::code_of(int id) const {
  if (id < 1 || id > num_codes())
    throw std::out_of_range("code id out of range: " + std::to_string(id));
  return codes[static_cast<std::size_t>(id - 1)];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 1099511628211ull;
    }
  };
  for (const auto& c : codes) {
    mix(c.data(), c.size());
    mix("\n", 1);
  }
  return h;
}

int CategoryMap::category_id(const std::string& code) const {
  auto it = entries.find(code);
  if (it == entries.end())
    throw std::runtime_error("category map: unmapped diagnosis code '" + code + "'");
  return category_index.at(it->second);
}

std::vector<RawJourney> ingest_journeys(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file");

  struct PendingVisit {
    std::vector<std::string> codes;
    long admission = 0;
    long discharge = 0;
  };
  struct PendingJourney {
    std::string patient_id;
    std::vector<PendingVisit> visits;
  };

  std::vector<PendingJourney> pending;
  long min_admission = std::numeric_limits<long>::max();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(where, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object() || !rec.contains("patient_id") || !rec.contains("visits"))
      fail(where, "record must be an object with patient_id and visits");
    PendingJourney j;
    j.patient_id = rec.at("patient_id").get<std::string>();
    if (j.patient_id.empty()) fail(where, "empty patient_id");
    if (!rec.at("visits").is_array() || rec.at("visits").empty())
      fail(where, "visits must be a non-empty array");
    for (const auto& v : rec.at("visits")) {
      PendingVisit pv;
      if (!v.contains("admission_date") || !v.contains("discharge_date") ||
          !v.contains("codes"))
        fail(where, "visit needs admission_date, discharge_date and codes");
      pv.admission = parse_date_days(v.at("admission_date").get<std::string>(), where);
      pv.discharge = parse_date_days(v.at("discharge_date").get<std::string>(), where);
      if (pv.discharge < pv.admission)
        fail(where, "discharge_date precedes admission_date");
      if (!v.at("codes").is_array() || v.at("codes").empty())
        fail(where, "visit with zero codes");
      for (const auto& c : v.at("codes")) {
        const std::string code = c.get<std::string>();
        if (code.empty() || !has_code_namespace(code))
          fail(where, "code '" + code + "' lacks a dx:/px: namespace prefix");
        pv.codes.push_back(code);
      }
      min_admission = std::min(min_admission, pv.admission);
      j.visits.push_back(std::move(pv));
    }
    pending.push_back(std::move(j));
  }

  std::vector<RawJourney> out;
  out.reserve(pending.size());
  for (auto& p : pending) {
    std::stable_sort(p.visits.begin(), p.visits.end(),
                     [](const PendingVisit& a, const PendingVisit& b) {
                       return a.admission < b.admission;
                     });
    RawJourney j;
    j.patient_id = std::move(p.patient_id);
    for (auto& v : p.visits) {
      RawVisit rv;
      rv.codes = std::move(v.codes);
      rv.admission_day = static_cast<int>(v.admission - min_admission);
      rv.discharge_day = static_cast<int>(v.discharge - min_admission);
      j.visits.push_back(std::move(rv));
    }
    out.push_back(std::move(j));
  }
  return out;
}

PreprocessResult preprocess(const std::vector<RawJourney>& raw,
                            const PreprocessOptions& options) {
  // Mode filter first: a Dx dataset drops procedure codes entirely.
  // Set semantics: duplicate codes within a visit count once.
  std::unordered_map<std::string, int> freq;
  std::vector<std::vector<std::vector<std::string>>> kept_codes(raw.size());
  for (std::size_t p = 0; p < raw.size(); ++p) {
    kept_codes[p].resize(raw[p].visits.size());
    for (std::size_t v = 0; v < raw[p].visits.size(); ++v) {
      std::set<std::string> uniq;
      for (const auto& c : raw[p].visits[v].codes) {
        if (options.mode == DatasetMode::kDx && !is_dx(c)) continue;
        uniq.insert(c);
      }
      for (const auto& c : uniq) ++freq[c];
      kept_codes[p][v].assign(uniq.begin(), uniq.end());
    }
  }

  Vocabulary vocab;
  for (const auto& [code, n] : freq)
    if (n >= options.min_code_freq) vocab.codes.push_back(code);
  std::sort(vocab.codes.begin(), vocab.codes.end());
  for (std::size_t i = 0; i < vocab.codes.size(); ++i)
    vocab.index.emplace(vocab.codes[i], static_cast<int>(i) + 1);

  std::vector<PatientJourney> journeys;
  for (std::size_t p = 0; p < raw.size(); ++p) {
    PatientJourney j;
    j.patient_id = raw[p].patient_id;
    for (std::size_t v = 0; v < raw[p].visits.size(); ++v) {
      Visit kept;
      for (const auto& c : kept_codes[p][v]) {
        auto it = vocab.index.find(c);
        if (it != vocab.index.end()) kept.codes.push_back(it->second);
      }
      if (kept.codes.empty()) continue;  // visit emptied by the filters
      std::sort(kept.codes.begin(), kept.codes.end());
      kept.admission_day = raw[p].visits[v].admission_day;
      kept.discharge_day = raw[p].visits[v].discharge_day;
      j.visits.push_back(std::move(kept));
    }
    if (static_cast<int>(j.visits.size()) >= options.min_visits)
      journeys.push_back(std::move(j));
  }

  if (journeys.empty())
    throw std::runtime_error(
        "preprocess: no journeys survive the thresholds (min_visits=" +
        std::to_string(options.min_visits) +
        ", min_code_freq=" + std::to_string(options.min_code_freq) + ")");

  // Rebuild the vocabulary over codes that actually survive, so ids stay
  // dense when dropped patients carried the only uses of a code.
  std::set<std::string> surviving;
  for (const auto& j : journeys)
    for (const auto& v : j.visits)
      for (int id : v.codes) surviving.insert(vocab.code_of(id));
  if (surviving.size() != vocab.codes.size()) {
    Vocabulary dense;
    dense.codes.assign(surviving.begin(), surviving.end());
    for (std::size_t i = 0; i < dense.codes.size(); ++i)
      dense.index.emplace(dense.codes[i], static_cast<int>(i) + 1);
    for (auto& j : journeys)
      for (auto& v : j.visits) {
        for (int& id : v.codes) id = dense.index.at(vocab.code_of(id));
        std::sort(v.codes.begin(), v.codes.end());
      }
    vocab = std::move(dense);
  }

  return {std::move(journeys), std::move(vocab)};
}

IntervalVector compute_intervals(const PatientJourney& journey) {
  IntervalVector p;
  p.reserve(journey.visits.size());
  const int t1 = journey.visits.empty() ? 0 : journey.visits.front().admission_day;
  for (const auto& v : journey.visits) p.push_back(std::abs(v.admission_day - t1));
  return p;
}

std::vector<LabeledSample> make_readmission_samples(
    const std::vector<PatientJourney>& journeys, int window_days) {
  std::vector<LabeledSample> samples;
  for (std::size_t j = 0; j < journeys.size(); ++j) {
    const auto& visits = journeys[j].visits;
    for (std::size_t t = 0; t + 1 < visits.size(); ++t) {
      LabeledSample s;
      s.journey = static_cast<int>(j);
      s.prefix_len = static_cast<int>(t) + 1;
      const int gap = visits[t + 1].admission_day - visits[t].discharge_day;
      s.readm_label = gap <= window_days ? 1 : 0;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::vector<LabeledSample> make_diagnosis_samples(
    const std::vector<PatientJourney>& journeys, const Vocabulary& vocab,
    const CategoryMap& map) {
  std::vector<LabeledSample> samples;
  for (std::size_t j = 0; j < journeys.size(); ++j) {
    const auto& visits = journeys[j].visits;
    for (std::size_t t = 0; t + 1 < visits.size(); ++t) {
      std::set<int> cats;
      for (int id : visits[t + 1].codes) {
        const std::string& code = vocab.code_of(id);
        if (is_dx(code)) cats.insert(map.category_id(code));
      }
      if (cats.empty()) continue;  // target visit carries no diagnosis codes
      LabeledSample s;
      s.journey = static_cast<int>(j);
      s.prefix_len = static_cast<int>(t) + 1;
      s.dx_labels.assign(cats.begin(), cats.end());
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::vector<PaddedBatch> batch(const std::vector<LabeledSample>& samples,
                               const std::vector<PatientJourney>& journeys,
                               int batch_size, std::uint64_t shuffle_seed) {
  if (batch_size < 1) throw std::invalid_argument("batch: batch_size must be >= 1");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(shuffle_seed);
  rng.shuffle(order);

  std::vector<PaddedBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    PaddedBatch b;
    b.batch_size = static_cast<int>(end - start);
    bool any_readm = false, any_dx = false;
    for (std::size_t i = start; i < end; ++i) {
      const LabeledSample& s = samples[order[i]];
      b.max_visits = std::max(b.max_visits, s.prefix_len);
      const auto& visits = journeys[s.journey].visits;
      for (int v = 0; v < s.prefix_len; ++v)
        b.max_codes = std::max(b.max_codes,
                               static_cast<int>(visits[v].codes.size()));
      any_readm = any_readm || s.readm_label >= 0;
      any_dx = any_dx || !s.dx_labels.empty();
    }
    b.code_ids.assign(static_cast<std::size_t>(b.batch_size) * b.max_visits * b.max_codes, 0);
    b.code_valid.assign(b.code_ids.size(), 0);
    b.visit_valid.assign(static_cast<std::size_t>(b.batch_size) * b.max_visits, 0);
    b.intervals.assign(b.visit_valid.size(), 0);
    for (std::size_t i = start; i < end; ++i) {
      const int bi = static_cast<int>(i - start);
      const LabeledSample& s = samples[order[i]];
      const PatientJourney& j = journeys[s.journey];
      const IntervalVector iv = compute_intervals(j);
      b.patient_ids.push_back(j.patient_id);
      b.prefix_lens.push_back(s.prefix_len);
      b.sample_indices.push_back(order[i]);
      if (any_readm) b.readm_labels.push_back(static_cast<float>(s.readm_label));
      if (any_dx) b.dx_labels.push_back(s.dx_labels);
      for (int v = 0; v < s.prefix_len; ++v) {
        b.visit_valid[b.visit_index(bi, v)] = 1;
        b.intervals[b.visit_index(bi, v)] = iv[static_cast<std::size_t>(v)];
        const auto& codes = j.visits[static_cast<std::size_t>(v)].codes;
        for (std::size_t k = 0; k < codes.size(); ++k) {
          b.code_ids[b.code_index(bi, v, static_cast<int>(k))] =
              static_cast<std::int32_t>(codes[k]);
          b.code_valid[b.code_index(bi, v, static_cast<int>(k))] = 1;
        }
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

CategoryMap load_category_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file");
  CategoryMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      fail(path + ":" + std::to_string(line_no), "expected 'code<TAB>category'");
    const std::string code = line.substr(0, tab);
    const std::string category = line.substr(tab + 1);
    if (map.entries.count(code))
      fail(path + ":" + std::to_string(line_no), "duplicate code '" + code + "'");
    map.entries.emplace(code, category);
    if (!map.category_index.count(category)) {
      map.category_index.emplace(category, map.num_categories());
      map.categories.push_back(category);
    }
  }
  if (map.entries.empty()) fail(path, "empty category map");
  return map;
}

void verify_total(const CategoryMap& map, const Vocabulary& vocab) {
  for (const auto& code : vocab.codes)
    if (is_dx(code) && !map.entries.count(code))
      throw std::runtime_error("category map does not cover diagnosis code '" +
                               code + "'");
}

}  // namespace bitenet
