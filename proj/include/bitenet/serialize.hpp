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

#include "bitenet/model.hpp"

namespace bitenet {

struct LoadedModel {
  ModelConfig config;
  int num_codes = 0;
  std::uint64_t vocab_hash = 0;
  BiteNetParams<float> params;
};

/// Binary parameter file: magic "BTNPARAM", a version tag, a JSON config
/// block, the vocabulary hash, then named arrays with explicit shapes in
/// visit order (float32, row-major, little-endian). Round-trips bitwise.
void save_params(const BiteNetParams<float>& params, const ModelConfig& config,
                 int num_codes, std::uint64_t vocab_hash, const std::string& path);

/// Loads a parameter file, validating magic, version, shapes and array
/// names. Throws on truncation or corruption.
LoadedModel load_params(const std::string& path);

/// Refuses (throws) when the stored vocabulary hash does not match `vocab`.
void verify_vocabulary(const LoadedModel& model, const Vocabulary& vocab);

}  // namespace bitenet
