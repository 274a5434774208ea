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

#include "bitenet/serialize.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace bitenet {

namespace {

constexpr char kMagic[8] = {'B', 'T', 'N', 'P', 'A', 'R', 'A', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error(path + ": truncated parameter file");
  return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error(path + ": truncated parameter file");
  return v;
}

nlohmann::json config_to_json(const ModelConfig& c, int num_codes) {
  return nlohmann::json{{"d", c.d},
                        {"stack_depth", c.stack_depth},
                        {"heads", c.heads},
                        {"dropout", c.dropout},
                        {"interval_table_days", c.interval_table_days},
                        {"variant", to_string(c.variant)},
                        {"task", to_string(c.task)},
                        {"num_categories", c.num_categories},
                        {"direction_swap", c.direction_swap},
                        {"num_codes", num_codes}};
}

void config_from_json(const nlohmann::json& j, ModelConfig* c, int* num_codes) {
  c->d = j.at("d").get<int>();
  c->stack_depth = j.at("stack_depth").get<int>();
  c->heads = j.at("heads").get<int>();
  c->dropout = j.at("dropout").get<double>();
  c->interval_table_days = j.at("interval_table_days").get<int>();
  c->variant = variant_from_string(j.at("variant").get<std::string>());
  c->task = task_from_string(j.at("task").get<std::string>());
  c->num_categories = j.at("num_categories").get<int>();
  c->direction_swap = j.at("direction_swap").get<bool>();
  *num_codes = j.at("num_codes").get<int>();
}

}  // namespace

void save_params(const BiteNetParams<float>& params, const ModelConfig& config,
                 int num_codes, std::uint64_t vocab_hash, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  const std::string cfg = config_to_json(config, num_codes).dump();
  write_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_u64(out, vocab_hash);

  std::uint32_t n_arrays = 0;
  params.visit([&n_arrays](const std::string&, const DenseMatrix<float>&, ParamKind) {
    ++n_arrays;
  });
  write_u32(out, n_arrays);
  params.visit([&out](const std::string& name, const DenseMatrix<float>& m, ParamKind) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const float v = m(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  });
  if (!out) throw std::runtime_error(path + ": write failed");
}

LoadedModel load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open parameter file");
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::string(magic, 8) != std::string(kMagic, 8))
    throw std::runtime_error(path + ": not a parameter file (bad magic)");
  const std::uint32_t version = read_u32(in, path);
  if (version != kVersion)
    throw std::runtime_error(path + ": unsupported parameter file version " +
                             std::to_string(version));
  const std::uint32_t cfg_len = read_u32(in, path);
  std::string cfg(cfg_len, '\0');
  if (!in.read(cfg.data(), cfg_len))
    throw std::runtime_error(path + ": truncated parameter file");

  LoadedModel model;
  try {
    config_from_json(nlohmann::json::parse(cfg), &model.config, &model.num_codes);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": corrupt config block: " + e.what());
  }
  model.vocab_hash = read_u64(in, path);

  // Allocate the skeleton from the config, then fill arrays in visit order.
  model.params = init_params<float>(model.config, model.num_codes, 0);
  const std::uint32_t n_arrays = read_u32(in, path);
  std::uint32_t expected = 0;
  model.params.visit(
      [&expected](const std::string&, const DenseMatrix<float>&, ParamKind) {
        ++expected;
      });
  if (n_arrays != expected)
    throw std::runtime_error(path + ": array count mismatch");

  model.params.visit([&](const std::string& name, DenseMatrix<float>& m, ParamKind) {
    const std::uint32_t name_len = read_u32(in, path);
    std::string stored(name_len, '\0');
    if (!in.read(stored.data(), name_len))
      throw std::runtime_error(path + ": truncated parameter file");
    if (stored != name)
      throw std::runtime_error(path + ": unexpected array '" + stored +
                               "' (wanted '" + name + "')");
    const std::uint32_t rows = read_u32(in, path);
    const std::uint32_t cols = read_u32(in, path);
    if (rows != static_cast<std::uint32_t>(m.rows()) ||
        cols != static_cast<std::uint32_t>(m.cols()))
      throw std::runtime_error(path + ": shape mismatch for '" + name + "'");
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        float v = 0;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
          throw std::runtime_error(path + ": truncated parameter file");
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      }
  });
  return model;
}

void verify_vocabulary(const LoadedModel& model, const Vocabulary& vocab) {
  if (model.vocab_hash != vocab.hash() || model.num_codes != vocab.num_codes())
    throw std::runtime_error(
        "parameter file was trained on a different vocabulary (hash mismatch); "
        "refusing to apply it");
}

}  // namespace bitenet
