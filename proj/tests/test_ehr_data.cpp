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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <unistd.h>

#include "bitenet/ehr.hpp"
#include "bitenet/random.hpp"

using namespace bitenet;

namespace {

namespace fs = std::filesystem;

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& content) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("bitenet_ehr_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++) + ".txt");
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
  std::string str() const { return path.string(); }
};

std::string journey_line(const std::string& pid,
                         const std::vector<std::string>& visits) {
  std::string line = R"({"patient_id":")" + pid + R"(","visits":[)";
  for (std::size_t i = 0; i < visits.size(); ++i) {
    line += visits[i];
    if (i + 1 < visits.size()) line += ",";
  }
  return line + "]}";
}

std::string visit_json(const std::string& adm, const std::string& dis,
                       const std::vector<std::string>& codes) {
  std::string v = R"({"admission_date":")" + adm + R"(","discharge_date":")" + dis +
                  R"(","codes":[)";
  for (std::size_t i = 0; i < codes.size(); ++i) {
    v += "\"" + codes[i] + "\"";
    if (i + 1 < codes.size()) v += ",";
  }
  return v + "]}";
}

/// Converts preprocessed journeys back to raw form (for idempotence checks).
std::vector<RawJourney> to_raw(const std::vector<PatientJourney>& journeys,
                               const Vocabulary& vocab) {
  std::vector<RawJourney> raw;
  for (const auto& j : journeys) {
    RawJourney r;
    r.patient_id = j.patient_id;
    for (const auto& v : j.visits) {
      RawVisit rv;
      rv.admission_day = v.admission_day;
      rv.discharge_day = v.discharge_day;
      for (int id : v.codes) rv.codes.push_back(vocab.code_of(id));
      r.visits.push_back(std::move(rv));
    }
    raw.push_back(std::move(r));
  }
  return raw;
}

}  // namespace

TEST_CASE("ingest: day indices are relative to the earliest admission") {
  TempFile f(journey_line("p1", {visit_json("2010-01-01", "2010-01-02", {"dx:a"}),
                                 visit_json("2010-01-04", "2010-01-05", {"dx:b"})}) +
             "\n");
  const auto journeys = ingest_journeys(f.str());
  REQUIRE(journeys.size() == 1);
  REQUIRE(journeys[0].visits.size() == 2);
  CHECK(journeys[0].visits[0].admission_day == 0);
  CHECK(journeys[0].visits[1].admission_day == 3);
  CHECK(journeys[0].visits[0].discharge_day == 1);
}

TEST_CASE("ingest: empty file gives an empty list") {
  TempFile f("");
  CHECK(ingest_journeys(f.str()).empty());
}

TEST_CASE("ingest: a visit with zero codes is an error naming the line") {
  TempFile f(journey_line("p1", {visit_json("2010-01-01", "2010-01-02", {})}) + "\n");
  try {
    ingest_journeys(f.str());
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
    CHECK(std::string(e.what()).find("zero codes") != std::string::npos);
  }
}

TEST_CASE("ingest: malformed line, bad date, missing prefix, reversed stay") {
  TempFile bad_json("this is not json\n");
  CHECK_THROWS(ingest_journeys(bad_json.str()));
  TempFile bad_date(
      journey_line("p1", {visit_json("2010-13-40", "2010-01-02", {"dx:a"})}) + "\n");
  CHECK_THROWS(ingest_journeys(bad_date.str()));
  TempFile bad_code(
      journey_line("p1", {visit_json("2010-01-01", "2010-01-02", {"a"})}) + "\n");
  CHECK_THROWS(ingest_journeys(bad_code.str()));
  TempFile reversed(
      journey_line("p1", {visit_json("2010-01-05", "2010-01-02", {"dx:a"})}) + "\n");
  CHECK_THROWS(ingest_journeys(reversed.str()));
}

TEST_CASE("ingest: visits are sorted by admission date") {
  TempFile f(journey_line("p1", {visit_json("2010-02-01", "2010-02-02", {"dx:b"}),
                                 visit_json("2010-01-01", "2010-01-02", {"dx:a"})}) +
             "\n");
  const auto journeys = ingest_journeys(f.str());
  CHECK(journeys[0].visits[0].codes[0] == "dx:a");
  CHECK(journeys[0].visits[0].admission_day == 0);
  CHECK(journeys[0].visits[1].admission_day == 31);
}

namespace {

/// Five patients, two visits each, sharing dx:common (freq 10); dx:rare
/// appears in four visits only.
std::vector<RawJourney> frequency_fixture() {
  std::vector<RawJourney> raw;
  for (int p = 0; p < 5; ++p) {
    RawJourney j;
    j.patient_id = "p" + std::to_string(p);
    for (int v = 0; v < 2; ++v) {
      RawVisit rv;
      rv.admission_day = 10 * v;
      rv.discharge_day = 10 * v + 1;
      rv.codes = {"dx:common"};
      if (p < 2) rv.codes.push_back("dx:rare");  // 4 occurrences
      rv.codes.push_back("px:proc");             // 10 occurrences
      j.visits.push_back(rv);
    }
    raw.push_back(j);
  }
  return raw;
}

}  // namespace

TEST_CASE("preprocess: a code below the frequency threshold disappears") {
  const auto result = preprocess(frequency_fixture(), {});
  CHECK(result.vocabulary.index.count("dx:rare") == 0);
  CHECK(result.vocabulary.index.count("dx:common") == 1);
  CHECK(result.vocabulary.index.count("px:proc") == 1);
  CHECK(result.vocabulary.num_codes() == 2);
  CHECK(result.journeys.size() == 5);  // two surviving visits each: retained
}

TEST_CASE("preprocess: identity thresholds keep everything") {
  const auto raw = frequency_fixture();
  PreprocessOptions opts;
  opts.min_visits = 1;
  opts.min_code_freq = 1;
  const auto result = preprocess(raw, opts);
  CHECK(result.vocabulary.num_codes() == 3);
  REQUIRE(result.journeys.size() == raw.size());
  for (std::size_t p = 0; p < raw.size(); ++p) {
    REQUIRE(result.journeys[p].visits.size() == raw[p].visits.size());
    for (std::size_t v = 0; v < raw[p].visits.size(); ++v) {
      std::set<std::string> want(raw[p].visits[v].codes.begin(),
                                 raw[p].visits[v].codes.end());
      std::set<std::string> got;
      for (int id : result.journeys[p].visits[v].codes)
        got.insert(result.vocabulary.code_of(id));
      CHECK(want == got);
    }
  }
}

TEST_CASE("preprocess: dx mode drops procedure codes") {
  PreprocessOptions opts;
  opts.mode = DatasetMode::kDx;
  opts.min_code_freq = 1;
  opts.min_visits = 1;
  const auto result = preprocess(frequency_fixture(), opts);
  CHECK(result.vocabulary.index.count("px:proc") == 0);
  CHECK(result.vocabulary.index.count("dx:common") == 1);
}

TEST_CASE("preprocess: idempotent at fixed thresholds") {
  const auto first = preprocess(frequency_fixture(), {});
  const auto second = preprocess(to_raw(first.journeys, first.vocabulary), {});
  CHECK(second.vocabulary.codes == first.vocabulary.codes);
  REQUIRE(second.journeys.size() == first.journeys.size());
  for (std::size_t p = 0; p < first.journeys.size(); ++p) {
    REQUIRE(second.journeys[p].visits.size() == first.journeys[p].visits.size());
    for (std::size_t v = 0; v < first.journeys[p].visits.size(); ++v)
      CHECK(second.journeys[p].visits[v].codes == first.journeys[p].visits[v].codes);
  }
}

TEST_CASE("preprocess: empty result is an error") {
  PreprocessOptions opts;
  opts.min_code_freq = 100;
  CHECK_THROWS(preprocess(frequency_fixture(), opts));
}

TEST_CASE("preprocess: visit ids are dense, at least 1 and below size()") {
  const auto result = preprocess(frequency_fixture(), {});
  std::set<int> seen;
  for (const auto& j : result.journeys)
    for (const auto& v : j.visits)
      for (int id : v.codes) {
        CHECK(id >= 1);
        CHECK(id < result.vocabulary.size());
        seen.insert(id);
      }
  CHECK(static_cast<int>(seen.size()) == result.vocabulary.num_codes());
}

TEST_CASE("compute_intervals: spec triples") {
  PatientJourney j;
  j.visits = {{{1}, 0, 1}, {{1}, 3, 4}, {{1}, 10, 11}};
  CHECK(compute_intervals(j) == IntervalVector{0, 3, 10});
  PatientJourney same_day;
  same_day.visits = {{{1}, 7, 8}, {{1}, 7, 9}};
  CHECK(compute_intervals(same_day) == IntervalVector{0, 0});
  PatientJourney offset;
  offset.visits = {{{1}, 100, 101}, {{1}, 103, 104}, {{1}, 150, 151}};
  CHECK(compute_intervals(offset) == IntervalVector{0, 3, 50});
}

TEST_CASE("readmission samples: inclusive 30-day boundary") {
  PatientJourney j;
  j.patient_id = "p";
  j.visits = {{{1}, 0, 5}, {{1}, 30, 31}};  // gap 25
  auto samples = make_readmission_samples({j});
  REQUIRE(samples.size() == 1);  // final visit emits nothing
  CHECK(samples[0].readm_label == 1);
  CHECK(samples[0].prefix_len == 1);

  j.visits = {{{1}, 0, 5}, {{1}, 36, 37}};  // gap 31
  samples = make_readmission_samples({j});
  CHECK(samples[0].readm_label == 0);

  j.visits = {{{1}, 0, 5}, {{1}, 35, 36}};  // gap exactly 30
  samples = make_readmission_samples({j});
  CHECK(samples[0].readm_label == 1);
}

TEST_CASE("readmission samples: labels recompute from raw dates") {
  Rng rng(41);
  std::vector<PatientJourney> journeys;
  for (int p = 0; p < 20; ++p) {
    PatientJourney j;
    j.patient_id = "p" + std::to_string(p);
    int adm = static_cast<int>(rng.uniform_int(0, 50));
    const int n = static_cast<int>(rng.uniform_int(2, 6));
    for (int v = 0; v < n; ++v) {
      const int dis = adm + static_cast<int>(rng.uniform_int(0, 9));
      j.visits.push_back({{1}, adm, dis});
      adm = dis + static_cast<int>(rng.uniform_int(1, 60));
    }
    journeys.push_back(j);
  }
  const auto samples = make_readmission_samples(journeys);
  std::size_t expected = 0;
  for (const auto& j : journeys) expected += j.visits.size() - 1;
  CHECK(samples.size() == expected);
  for (const auto& s : samples) {
    const auto& visits = journeys[static_cast<std::size_t>(s.journey)].visits;
    const int gap = visits[static_cast<std::size_t>(s.prefix_len)].admission_day -
                    visits[static_cast<std::size_t>(s.prefix_len) - 1].discharge_day;
    CHECK(s.readm_label == (gap <= 30 ? 1 : 0));
  }
}

namespace {

CategoryMap tiny_map() {
  CategoryMap map;
  map.entries = {{"dx:5856", "A"}, {"dx:2720", "B"}, {"dx:x", "A"}, {"dx:y", "A"}};
  map.categories = {"A", "B"};
  map.category_index = {{"A", 0}, {"B", 1}};
  return map;
}

}  // namespace

TEST_CASE("diagnosis samples: category image of the successor visit") {
  Vocabulary vocab;
  vocab.codes = {"dx:2720", "dx:5856", "dx:x", "dx:y"};
  for (std::size_t i = 0; i < vocab.codes.size(); ++i)
    vocab.index[vocab.codes[i]] = static_cast<int>(i) + 1;

  PatientJourney j;
  j.patient_id = "p";
  j.visits = {{{vocab.id_of("dx:x")}, 0, 1},
              {{vocab.id_of("dx:5856"), vocab.id_of("dx:2720")}, 10, 11}};
  const auto samples = make_diagnosis_samples({j}, vocab, tiny_map());
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].dx_labels == std::vector<int>{0, 1});  // {A, B}

  // Two codes sharing a category collapse to one label.
  PatientJourney j2;
  j2.patient_id = "q";
  j2.visits = {{{vocab.id_of("dx:5856")}, 0, 1},
               {{vocab.id_of("dx:x"), vocab.id_of("dx:y")}, 9, 10}};
  const auto s2 = make_diagnosis_samples({j2}, vocab, tiny_map());
  REQUIRE(s2.size() == 1);
  CHECK(s2[0].dx_labels == std::vector<int>{0});
}

TEST_CASE("diagnosis samples: a 5-visit journey yields 4 samples") {
  Vocabulary vocab;
  vocab.codes = {"dx:x"};
  vocab.index = {{"dx:x", 1}};
  PatientJourney j;
  j.patient_id = "p";
  for (int v = 0; v < 5; ++v) j.visits.push_back({{1}, 10 * v, 10 * v + 1});
  CHECK(make_diagnosis_samples({j}, vocab, tiny_map()).size() == 4);
}

TEST_CASE("diagnosis samples: unmapped code in a target visit is an error") {
  Vocabulary vocab;
  vocab.codes = {"dx:unknown", "dx:x"};
  vocab.index = {{"dx:unknown", 1}, {"dx:x", 2}};
  PatientJourney j;
  j.patient_id = "p";
  j.visits = {{{2}, 0, 1}, {{1}, 10, 11}};
  CHECK_THROWS(make_diagnosis_samples({j}, vocab, tiny_map()));
}

namespace {

std::vector<PatientJourney> batch_fixture() {
  std::vector<PatientJourney> journeys;
  for (int p = 0; p < 5; ++p) {
    PatientJourney j;
    j.patient_id = "p" + std::to_string(p);
    const int visits = p == 0 ? 6 : 4;
    for (int v = 0; v < visits; ++v)
      j.visits.push_back({{1 + (p + v) % 3, 4}, 20 * v, 20 * v + 2});
    journeys.push_back(j);
  }
  return journeys;
}

}  // namespace

TEST_CASE("batch: sizes, padding and determinism") {
  const auto journeys = batch_fixture();
  std::vector<LabeledSample> samples;
  samples.push_back({0, 5, 1, {}});
  samples.push_back({1, 3, 0, {}});
  samples.push_back({2, 3, 1, {}});
  samples.push_back({3, 2, 0, {}});
  samples.push_back({4, 1, 1, {}});

  const auto batches = batch(samples, journeys, 2, 7);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].batch_size == 2);
  CHECK(batches[1].batch_size == 2);
  CHECK(batches[2].batch_size == 1);

  const auto again = batch(samples, journeys, 2, 7);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    CHECK(again[b].sample_indices == batches[b].sample_indices);
    CHECK(again[b].code_ids == batches[b].code_ids);
  }

  // 3- and 5-visit prefixes batched together pad to 5 visits.
  const auto one = batch({samples[0], samples[1]}, journeys, 2, 3);
  REQUIRE(one.size() == 1);
  CHECK(one[0].max_visits == 5);
  int valid0 = 0, valid1 = 0;
  for (int v = 0; v < one[0].max_visits; ++v) {
    valid0 += one[0].visit_valid[one[0].visit_index(0, v)];
    valid1 += one[0].visit_valid[one[0].visit_index(1, v)];
  }
  CHECK(std::set<int>({valid0, valid1}) == std::set<int>({3, 5}));
}

TEST_CASE("batch: padding uses the reserved id 0 and real ids stay >= 1") {
  const auto journeys = batch_fixture();
  std::vector<LabeledSample> samples{{0, 5, 1, {}}, {1, 2, 0, {}}};
  const auto batches = batch(samples, journeys, 2, 1);
  for (const auto& b : batches)
    for (int bi = 0; bi < b.batch_size; ++bi)
      for (int v = 0; v < b.max_visits; ++v)
        for (int k = 0; k < b.max_codes; ++k) {
          const auto idx = b.code_index(bi, v, k);
          if (b.code_valid[idx]) {
            CHECK(b.code_ids[idx] >= 1);
          } else {
            CHECK(b.code_ids[idx] == 0);
          }
        }
}

TEST_CASE("batch: rejects batch_size < 1") { CHECK_THROWS(batch({}, {}, 0, 1)); }

TEST_CASE("category map: loads, orders categories, rejects duplicates") {
  TempFile f("dx:a\tCardio\ndx:b\tRenal\ndx:c\tCardio\n");
  const auto map = load_category_map(f.str());
  CHECK(map.num_categories() == 2);
  CHECK(map.categories[0] == "Cardio");
  CHECK(map.categories[1] == "Renal");
  CHECK(map.category_id("dx:c") == 0);
  CHECK_THROWS(map.category_id("dx:zzz"));

  TempFile dup("dx:a\tX\ndx:a\tY\n");
  CHECK_THROWS(load_category_map(dup.str()));
  TempFile broken("dx:a no tab\n");
  CHECK_THROWS(load_category_map(broken.str()));
}

TEST_CASE("verify_total: names the first unmapped diagnosis code") {
  Vocabulary vocab;
  vocab.codes = {"dx:a", "dx:zzz", "px:p"};
  for (std::size_t i = 0; i < vocab.codes.size(); ++i)
    vocab.index[vocab.codes[i]] = static_cast<int>(i) + 1;
  CategoryMap map;
  map.entries = {{"dx:a", "X"}};
  map.categories = {"X"};
  map.category_index = {{"X", 0}};
  try {
    verify_total(map, vocab);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("dx:zzz") != std::string::npos);
  }
}

TEST_CASE("vocabulary: hash changes with content, ids are stable") {
  Vocabulary a;
  a.codes = {"dx:a", "dx:b"};
  a.index = {{"dx:a", 1}, {"dx:b", 2}};
  Vocabulary b = a;
  b.codes[1] = "dx:c";
  CHECK(a.hash() != b.hash());
  CHECK(a.id_of("dx:b") == 2);
  CHECK(a.code_of(1) == "dx:a");
  CHECK_THROWS(a.code_of(0));  // padding id carries no code string
  CHECK_THROWS(a.code_of(3));
  CHECK_THROWS(a.id_of("dx:zz"));
}

TEST_CASE("sample counts: sum of (n-1) over journeys for either task") {
  const auto journeys = batch_fixture();
  std::size_t expected = 0;
  for (const auto& j : journeys) expected += j.visits.size() - 1;
  CHECK(make_readmission_samples(journeys).size() == expected);

  Vocabulary vocab;
  vocab.codes = {"dx:a", "dx:b", "dx:c", "px:p"};
  for (std::size_t i = 0; i < vocab.codes.size(); ++i)
    vocab.index[vocab.codes[i]] = static_cast<int>(i) + 1;
  CategoryMap map;
  map.entries = {{"dx:a", "X"}, {"dx:b", "X"}, {"dx:c", "Y"}};
  map.categories = {"X", "Y"};
  map.category_index = {{"X", 0}, {"Y", 1}};
  CHECK(make_diagnosis_samples(journeys, vocab, map).size() == expected);
}
