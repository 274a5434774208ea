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
#include <string>
#include <unordered_map>
#include <vector>

namespace bitenet {

/// Dense code-id space. Real codes get stable ids 1..num_codes() assigned in
/// lexicographic order; id 0 is reserved for padding, so size() is the
/// embedding-table row count.
struct Vocabulary {
  std::vector<std::string> codes;              // sorted; codes[i] has id i+1
  std::unordered_map<std::string, int> index;  // code -> id in [1, size())

  int num_codes() const { return static_cast<int>(codes.size()); }
  int size() const { return num_codes() + 1; }

  int id_of(const std::string& code) const;
  const std::string& code_of(int id) const;

  /// FNV-1a over the ordered code list; stored in parameter files so a model
  /// cannot silently be applied to a different vocabulary.
  std::uint64_t hash() const;
};

/// A visit before preprocessing: code strings and day indices.
struct RawVisit {
  std::vector<std::string> codes;
  int admission_day = 0;
  int discharge_day = 0;
};

struct RawJourney {
  std::string patient_id;
  std::vector<RawVisit> visits;
};

/// A preprocessed visit: deduplicated vocabulary ids, sorted ascending.
struct Visit {
  std::vector<int> codes;
  int admission_day = 0;
  int discharge_day = 0;
};

struct PatientJourney {
  std::string patient_id;
  std::vector<Visit> visits;  // sorted by admission_day, length >= min_visits
};

/// Days elapsed since the journey's first admission, one entry per visit.
using IntervalVector = std::vector<int>;

/// One training example: the journey prefix [V1..Vt] plus the label drawn
/// from V(t+1). readm_label is -1 when absent.
struct LabeledSample {
  int journey = -1;
  int prefix_len = 0;
  int readm_label = -1;
  std::vector<int> dx_labels;  // category ids, sorted
};

struct CategoryMap {
  std::unordered_map<std::string, std::string> entries;  // code -> category
  std::vector<std::string> categories;                   // first-appearance order
  std::unordered_map<std::string, int> category_index;

  int num_categories() const { return static_cast<int>(categories.size()); }
  /// Category id for a diagnosis code; throws if the code is unmapped.
  int category_id(const std::string& code) const;
};

/// Rectangular batch with validity masks. Code slots are padded with the
/// reserved id 0; visit slots past a sample's prefix are padded whole.
struct PaddedBatch {
  int batch_size = 0;
  int max_visits = 0;
  int max_codes = 0;
  std::vector<std::int32_t> code_ids;   // batch_size * max_visits * max_codes
  std::vector<char> code_valid;         // same layout
  std::vector<char> visit_valid;        // batch_size * max_visits
  std::vector<std::int32_t> intervals;  // batch_size * max_visits, 0 on padding
  std::vector<float> readm_labels;      // batch_size, or empty
  std::vector<std::vector<int>> dx_labels;  // batch_size, or empty
  std::vector<std::string> patient_ids;
  std::vector<int> prefix_lens;
  std::vector<std::size_t> sample_indices;  // position in the input sample list

  std::size_t code_index(int b, int v, int k) const {
    return (static_cast<std::size_t>(b) * max_visits + v) * max_codes + k;
  }
  std::size_t visit_index(int b, int v) const {
    return static_cast<std::size_t>(b) * max_visits + v;
  }
};

enum class DatasetMode { kDx, kDxTx };

struct PreprocessOptions {
  int min_visits = 2;
  int min_code_freq = 5;
  DatasetMode mode = DatasetMode::kDxTx;
};

struct PreprocessResult {
  std::vector<PatientJourney> journeys;
  Vocabulary vocabulary;
};

/// Parses the journey line format (one JSON object per line). Dates become
/// day indices relative to the earliest admission in the file; visits are
/// sorted by admission. Errors name the offending line.
std::vector<RawJourney> ingest_journeys(const std::string& path);

/// Applies the corpus-frequency filter, then the minimum-visit filter, once,
/// and builds the vocabulary over the survivors.
PreprocessResult preprocess(const std::vector<RawJourney>& raw,
                            const PreprocessOptions& options = {});

IntervalVector compute_intervals(const PatientJourney& journey);

std::vector<LabeledSample> make_readmission_samples(
    const std::vector<PatientJourney>& journeys, int window_days = 30);

std::vector<LabeledSample> make_diagnosis_samples(
    const std::vector<PatientJourney>& journeys, const Vocabulary& vocab,
    const CategoryMap& map);

std::vector<PaddedBatch> batch(const std::vector<LabeledSample>& samples,
                               const std::vector<PatientJourney>& journeys,
                               int batch_size, std::uint64_t shuffle_seed);

CategoryMap load_category_map(const std::string& path);

/// Checks that every diagnosis code in the vocabulary is mapped; throws
/// naming the first unmapped code.
void verify_total(const CategoryMap& map, const Vocabulary& vocab);

}  // namespace bitenet
