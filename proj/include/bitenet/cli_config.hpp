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
#include <map>
#include <string>
#include <vector>

namespace bitenet {

/// Flat key=value run configuration. Every key has a documented default;
/// unknown keys are rejected. Precedence: defaults < config file < --set
/// overrides < dedicated command-line flags.
class RunConfig {
 public:
  struct KeyDoc {
    std::string default_value;
    std::string help;
  };

  RunConfig();

  /// The full key schema (key -> default + help), for --help and the README.
  static const std::map<std::string, KeyDoc>& schema();

  /// Loads "key=value" lines; '#' starts a comment, blank lines are skipped.
  void load_file(const std::string& path);

  /// Applies one "key=value" override.
  void set(const std::string& assignment);

  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::array<double, 3> get_ratios(const std::string& key) const;
  std::vector<std::uint64_t> get_u64_list(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Command entry points; each returns the process exit status.
int cmd_synth(const RunConfig& config, bool force);
int cmd_train(const RunConfig& config);
int cmd_evaluate(const RunConfig& config);
int cmd_embed(const RunConfig& config);
int cmd_explain(const RunConfig& config);

}  // namespace bitenet
