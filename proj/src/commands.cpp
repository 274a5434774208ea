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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bitenet/cli_config.hpp"
#include "bitenet/ehr.hpp"
#include "bitenet/metrics.hpp"
#include "bitenet/model.hpp"
#include "bitenet/serialize.hpp"
#include "bitenet/synth.hpp"
#include "bitenet/train.hpp"

namespace bitenet {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

SynthConfig synth_config_from(const RunConfig& c) {
  SynthConfig s;
  s.num_patients = c.get_int("synth.num_patients");
  s.vocab_dx = c.get_int("synth.vocab_dx");
  s.vocab_px = c.get_int("synth.vocab_px");
  s.num_categories = c.get_int("synth.num_categories");
  s.visits_min = c.get_int("synth.visits_min");
  s.visits_max = c.get_int("synth.visits_max");
  s.codes_min = c.get_int("synth.codes_min");
  s.codes_max = c.get_int("synth.codes_max");
  s.trigger_codes = c.get_int("synth.trigger_codes");
  s.cluster_count = c.get_int("synth.cluster_count");
  s.readm_base_rate = c.get_double("synth.readm_base_rate");
  s.interval_effect = c.get_bool("synth.interval_effect");
  s.seed = c.get_u64("synth.seed");
  return s;
}

PreprocessOptions preprocess_options_from(const RunConfig& c) {
  PreprocessOptions o;
  o.min_visits = c.get_int("data.min_visits");
  o.min_code_freq = c.get_int("data.min_code_freq");
  const std::string mode = c.get("data.mode");
  if (mode == "dx")
    o.mode = DatasetMode::kDx;
  else if (mode == "dxtx")
    o.mode = DatasetMode::kDxTx;
  else
    throw std::invalid_argument("data.mode must be dx or dxtx, got '" + mode + "'");
  return o;
}

ModelConfig model_config_from(const RunConfig& c, int num_categories) {
  ModelConfig m;
  m.d = c.get_int("model.d");
  m.stack_depth = c.get_int("model.stack_depth");
  m.heads = c.get_int("model.heads");
  m.dropout = c.get_double("model.dropout");
  m.interval_table_days = c.get_int("model.interval_days");
  m.variant = variant_from_string(c.get("model.variant"));
  m.task = task_from_string(c.get("model.task"));
  m.num_categories = num_categories;
  m.direction_swap = c.get_bool("model.direction_swap");
  return m;
}

TrainConfig train_config_from(const RunConfig& c, std::uint64_t seed) {
  TrainConfig t;
  t.batch_size = c.get_int("train.batch_size");
  t.epochs = c.get_int("train.epochs");
  t.learning_rate = c.get_double("train.learning_rate");
  t.rmsprop_decay = c.get_double("train.rmsprop_decay");
  t.rmsprop_eps = c.get_double("train.rmsprop_eps");
  t.split_ratios = c.get_ratios("train.split");
  t.seed = seed;
  return t;
}

struct Dataset {
  std::vector<PatientJourney> journeys;
  Vocabulary vocab;
  CategoryMap categories;  // empty unless loaded
  bool has_categories = false;
};

Dataset load_dataset(const RunConfig& c, Task task) {
  const std::string journeys_path = c.get("data.journeys");
  if (journeys_path.empty())
    throw std::invalid_argument("data.journeys is required (use --journeys)");
  Dataset d;
  const auto raw = ingest_journeys(journeys_path);
  auto pre = preprocess(raw, preprocess_options_from(c));
  d.journeys = std::move(pre.journeys);
  d.vocab = std::move(pre.vocabulary);
  const std::string cat_path = c.get("data.categories");
  if (!cat_path.empty()) {
    d.categories = load_category_map(cat_path);
    d.has_categories = true;
  } else if (task == Task::kDiagnosis) {
    throw std::invalid_argument(
        "model.task=diagnosis requires a category map (use --categories)");
  }
  return d;
}

std::vector<LabeledSample> make_samples(const Dataset& d, Task task,
                                        const RunConfig& c) {
  if (task == Task::kReadmission)
    return make_readmission_samples(d.journeys, c.get_int("data.window_days"));
  verify_total(d.categories, d.vocab);
  return make_diagnosis_samples(d.journeys, d.vocab, d.categories);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << content;
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace

int cmd_synth(const RunConfig& config, bool force) {
  const std::string dir = config.get("out.dir");
  for (const char* name : {"journeys.jsonl", "categories.tsv", "truth.json"}) {
    const fs::path target = fs::path(dir) / name;
    if (!force && fs::exists(target))
      throw std::runtime_error(target.string() +
                               " exists; pass --force to overwrite");
  }
  const SynthOutput out = generate(synth_config_from(config), dir);
  std::cout << "wrote " << out.journeys_path << "\n"
            << "wrote " << out.categories_path << "\n"
            << "wrote " << out.truth_path << "\n";
  return 0;
}

int cmd_train(const RunConfig& config) {
  const auto seeds = config.get_u64_list("seeds");
  ModelConfig probe = model_config_from(config, 1);
  Dataset data = load_dataset(config, probe.task);
  const int num_categories = data.has_categories ? data.categories.num_categories() : 0;
  const ModelConfig model_config = model_config_from(
      config, probe.task == Task::kDiagnosis ? num_categories : 0);
  const auto samples = make_samples(data, model_config.task, config);
  if (samples.empty()) throw std::runtime_error("no labeled samples in the dataset");

  const std::string dir = config.get("out.dir");
  fs::create_directories(dir);

  std::vector<MetricReport> reports;
  for (const std::uint64_t seed : seeds) {
    const TrainConfig train_config = train_config_from(config, seed);
    const SplitResult parts = split(samples, train_config.split_ratios, seed);
    TrainResult result = train(data.journeys, data.vocab, parts.train, parts.valid,
                               model_config, train_config);
    MetricReport report =
        evaluate_supervised(data.journeys, parts.test, result.params, model_config,
                            train_config.batch_size);
    reports.push_back(report);

    const std::string tag = "_seed" + std::to_string(seed);
    save_params(result.params, model_config, data.vocab.num_codes(),
                data.vocab.hash(), dir + "/params" + tag + ".bin");
    write_text(dir + "/train_log" + tag + ".jsonl", epoch_log_to_json(result.log));
    std::cout << "seed " << seed << ": best epoch " << result.best_epoch << "\n";
  }
  const std::string metrics = seeds.size() == 1
                                  ? metric_report_to_json(reports.front())
                                  : metric_reports_to_json(reports, seeds);
  write_text(dir + "/metrics.json", metrics);
  std::cout << "wrote " << dir << "/metrics.json\n";
  return 0;
}

int cmd_evaluate(const RunConfig& config) {
  const std::string params_path = config.get("eval.params");
  if (params_path.empty())
    throw std::invalid_argument("eval.params is required (use --params)");
  LoadedModel model = load_params(params_path);
  // The category map defines the label space, so evaluation needs it for the
  // diagnosis task just like training does.
  Dataset data = load_dataset(config, model.config.task);
  verify_vocabulary(model, data.vocab);

  const auto samples = [&] {
    RunConfig c = config;
    return make_samples(data, model.config.task, c);
  }();
  const std::uint64_t seed = config.get_u64_list("seeds").front();
  const SplitResult parts = split(samples, config.get_ratios("train.split"), seed);

  MetricReport report =
      evaluate_supervised(data.journeys, parts.test, model.params, model.config,
                          config.get_int("train.batch_size"));

  const std::string pairs_path = config.get("eval.pairs");
  if (!pairs_path.empty()) {
    const PlantedTruth truth = planted_pairs(pairs_path);
    const Eigen::MatrixXd embeddings = extract_code_embeddings(model.params);
    std::vector<std::pair<int, int>> id_pairs;
    for (const auto& [a, b] : truth.pairs) {
      auto ia = data.vocab.index.find(a);
      auto ib = data.vocab.index.find(b);
      if (ia == data.vocab.index.end() || ib == data.vocab.index.end()) continue;
      id_pairs.emplace_back(ia->second - 1, ib->second - 1);
    }
    for (int k : {1, 5, 10})
      report.nns_accuracy_at_k[k] = nns_accuracy_at_k(embeddings, id_pairs, k);

    std::set<int> cluster_ids;
    for (const auto& [code, cl] : truth.cluster_of) cluster_ids.insert(cl);
    std::vector<int> labels, assign_rows;
    for (int id = 1; id <= data.vocab.num_codes(); ++id) {
      auto it = truth.cluster_of.find(data.vocab.code_of(id));
      if (it == truth.cluster_of.end()) continue;
      labels.push_back(it->second);
      assign_rows.push_back(id - 1);
    }
    Eigen::MatrixXd dx_embeddings(static_cast<Eigen::Index>(assign_rows.size()),
                                  embeddings.cols());
    for (std::size_t i = 0; i < assign_rows.size(); ++i)
      dx_embeddings.row(static_cast<Eigen::Index>(i)) =
          embeddings.row(assign_rows[i]);
    const std::vector<int> clusters =
        kmeans(dx_embeddings, static_cast<int>(cluster_ids.size()), seed);
    report.nmi = nmi(clusters, labels);
  }

  const std::string dir = config.get("out.dir");
  fs::create_directories(dir);
  write_text(dir + "/metrics.json", metric_report_to_json(report));
  std::cout << "wrote " << dir << "/metrics.json\n";
  return 0;
}

int cmd_embed(const RunConfig& config) {
  const std::string params_path = config.get("eval.params");
  if (params_path.empty())
    throw std::invalid_argument("eval.params is required (use --params)");
  LoadedModel model = load_params(params_path);
  RunConfig c = config;
  c.set("data.categories", "");  // the map is not needed to dump embeddings
  Dataset data = load_dataset(c, Task::kReadmission);
  verify_vocabulary(model, data.vocab);
  const std::string dir = config.get("out.dir");
  fs::create_directories(dir);
  export_embeddings(model.params, data.vocab, dir + "/embeddings.tsv");
  std::cout << "wrote " << dir << "/embeddings.tsv\n";
  return 0;
}

int cmd_explain(const RunConfig& config) {
  const std::string params_path = config.get("eval.params");
  if (params_path.empty())
    throw std::invalid_argument("eval.params is required (use --params)");
  const std::string patients_arg = config.get("explain.patients");
  if (patients_arg.empty())
    throw std::invalid_argument("explain.patients is required (use --patients)");
  LoadedModel model = load_params(params_path);
  RunConfig c = config;
  c.set("data.categories", "");
  Dataset data = load_dataset(c, Task::kReadmission);
  verify_vocabulary(model, data.vocab);

  std::vector<std::string> wanted;
  {
    std::stringstream ss(patients_arg);
    std::string part;
    while (std::getline(ss, part, ',')) wanted.push_back(part);
  }

  json patients_out = json::array();
  for (const std::string& pid : wanted) {
    int journey_idx = -1;
    for (std::size_t j = 0; j < data.journeys.size(); ++j)
      if (data.journeys[j].patient_id == pid) {
        journey_idx = static_cast<int>(j);
        break;
      }
    if (journey_idx < 0)
      throw std::runtime_error("unknown patient id '" + pid + "'");

    // One sample covering the whole journey.
    LabeledSample sample;
    sample.journey = journey_idx;
    sample.prefix_len =
        static_cast<int>(data.journeys[static_cast<std::size_t>(journey_idx)].visits.size());
    const auto batches = batch({sample}, data.journeys, 1, 0);
    Graph<float> graph;
    ParamBinder<float> bind(graph);
    Rng unused(0);
    ForwardOutput<float> fwd =
        forward(graph, bind, batches.front(), model.params, model.config, false, unused);
    const SampleTrace& trace = fwd.traces.front();

    json visits = json::array();
    const PatientJourney& journey = data.journeys[static_cast<std::size_t>(journey_idx)];
    const IntervalVector intervals = compute_intervals(journey);
    for (std::size_t v = 0; v < journey.visits.size(); ++v) {
      json codes = json::array();
      const auto& ids = journey.visits[v].codes;
      for (std::size_t k = 0; k < ids.size(); ++k)
        codes.push_back(json{{"code", data.vocab.code_of(ids[k])},
                             {"weight", trace.code_weights[v][k]}});
      visits.push_back(json{{"admission_day", journey.visits[v].admission_day},
                            {"interval_days", intervals[v]},
                            {"codes", codes}});
    }
    std::vector<double> importance(trace.visit_weights_fw.size());
    for (std::size_t i = 0; i < importance.size(); ++i)
      importance[i] = 0.5 * (trace.visit_weights_fw[i] + trace.visit_weights_bw[i]);
    patients_out.push_back(json{{"patient_id", pid},
                                {"task", to_string(model.config.task)},
                                {"probabilities", trace.probabilities},
                                {"visit_importance", importance},
                                {"visit_importance_fw", trace.visit_weights_fw},
                                {"visit_importance_bw", trace.visit_weights_bw},
                                {"visits", visits}});
  }

  json doc;
  doc["version"] = 1;
  doc["patients"] = patients_out;
  const std::string dir = config.get("out.dir");
  fs::create_directories(dir);
  write_text(dir + "/trace.json", doc.dump(2) + "\n");
  std::cout << "wrote " << dir << "/trace.json\n";
  return 0;
}

}  // namespace bitenet
