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

#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bitenet/cli_config.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string journeys, categories, params, pairs, patients, out_dir, seeds;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "key=value config file");
  cmd->add_option("--set", args->sets, "override one config key (repeatable)");
  cmd->add_option("--out", args->out_dir, "output directory (key out.dir)");
  cmd->add_option("--seeds", args->seeds, "comma-separated run seeds (key seeds)");
}

bitenet::RunConfig resolve(const CommonArgs& args) {
  bitenet::RunConfig config;
  if (!args.config_path.empty()) config.load_file(args.config_path);
  for (const auto& s : args.sets) config.set(s);
  if (!args.journeys.empty()) config.set("data.journeys", args.journeys);
  if (!args.categories.empty()) config.set("data.categories", args.categories);
  if (!args.params.empty()) config.set("eval.params", args.params);
  if (!args.pairs.empty()) config.set("eval.pairs", args.pairs);
  if (!args.patients.empty()) config.set("explain.patients", args.patients);
  if (!args.out_dir.empty()) config.set("out.dir", args.out_dir);
  if (!args.seeds.empty()) config.set("seeds", args.seeds);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "bitenet: hierarchical self-attention models over patient journeys\n"
      "(synthesize data, train, evaluate, export embeddings, explain)"};
  app.require_subcommand(1);

  CommonArgs args;
  std::function<int(const bitenet::RunConfig&)> action;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic EHR dataset");
  add_common(synth, &args);
  synth->add_flag("--force", args.force, "overwrite existing output files");
  synth->callback([&] {
    action = [&args](const bitenet::RunConfig& c) {
      return bitenet::cmd_synth(c, args.force);
    };
  });

  CLI::App* train = app.add_subcommand("train", "train a model and report test metrics");
  add_common(train, &args);
  train->add_option("--journeys", args.journeys, "journey line file (key data.journeys)");
  train->add_option("--categories", args.categories,
                    "category map file (key data.categories)");
  train->callback([&] { action = bitenet::cmd_train; });

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "evaluate a trained model on the test split");
  add_common(evaluate, &args);
  evaluate->add_option("--journeys", args.journeys, "journey line file");
  evaluate->add_option("--categories", args.categories, "category map file");
  evaluate->add_option("--params", args.params, "parameter file (key eval.params)");
  evaluate->add_option("--pairs", args.pairs,
                       "planted-truth JSON enabling NNS/NMI metrics (key eval.pairs)");
  evaluate->callback([&] { action = bitenet::cmd_evaluate; });

  CLI::App* embed = app.add_subcommand("embed", "export trained code embeddings");
  add_common(embed, &args);
  embed->add_option("--journeys", args.journeys, "journey line file");
  embed->add_option("--params", args.params, "parameter file");
  embed->callback([&] { action = bitenet::cmd_embed; });

  CLI::App* explain =
      app.add_subcommand("explain", "export attention traces for selected patients");
  add_common(explain, &args);
  explain->add_option("--journeys", args.journeys, "journey line file");
  explain->add_option("--params", args.params, "parameter file");
  explain->add_option("--patients", args.patients,
                      "comma-separated patient ids (key explain.patients)");
  explain->callback([&] { action = bitenet::cmd_explain; });

  CLI11_PARSE(app, argc, argv);

  try {
    return action(resolve(args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
