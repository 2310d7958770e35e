/*
 * Copyright 2026 The Faithbench Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "faithbench/checkpoint.h"

#include <fstream>
#include <sstream>

#include "faithbench/errors.h"
#include "json.hpp"

namespace faithbench {
namespace {

using json = nlohmann::json;

constexpr const char* kFormat = "faithbench-checkpoint";

json ConfigJson(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"context_length", c.context_length},
          {"width", c.width},           {"layers", c.layers},
          {"heads", c.heads},           {"mlp_ratio", c.mlp_ratio}};
}

ModelConfig ConfigFromJson(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<size_t>();
  c.context_length = j.at("context_length").get<size_t>();
  c.width = j.at("width").get<size_t>();
  c.layers = j.at("layers").get<size_t>();
  c.heads = j.at("heads").get<size_t>();
  c.mlp_ratio = j.at("mlp_ratio").get<size_t>();
  return c;
}

}  // namespace

std::string SerializeCheckpoint(const Checkpoint& checkpoint) {
  const LmModel& model = checkpoint.model;
  if (model.config().vocab_size != checkpoint.vocab.size()) {
    throw CheckpointError("model and vocabulary sizes disagree");
  }
  json params = json::object();
  const auto names = model.ParameterNames();
  const auto tensors = model.Parameters();
  for (size_t i = 0; i < names.size(); ++i) {
    const auto data = tensors[i]->data();
    params[names[i]] = {
        {"shape", {tensors[i]->rows(), tensors[i]->cols()}},
        {"data", std::vector<double>(data.begin(), data.end())}};
  }
  json doc = {{"format", kFormat},
              {"version", kCheckpointVersion},
              {"config", ConfigJson(model.config())},
              {"vocabulary",
               {{"tokens", checkpoint.vocab.tokens()},
                {"labels", checkpoint.vocab.labels()}}},
              {"metadata", checkpoint.metadata},
              {"parameters", std::move(params)}};
  return doc.dump();
}

Checkpoint ParseCheckpoint(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") +
                          e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) {
      throw CheckpointError("not a faithbench checkpoint");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint out;
    const ModelConfig config = ConfigFromJson(doc.at("config"));
    out.vocab = Vocabulary::FromTokens(
        doc.at("vocabulary").at("tokens").get<std::vector<std::string>>(),
        doc.at("vocabulary").at("labels").get<std::vector<std::string>>());
    if (config.vocab_size != out.vocab.size()) {
      throw CheckpointError("config vocab_size does not match vocabulary");
    }
    out.model = LmModel::Create(config, 0);
    const json& params = doc.at("parameters");
    const auto names = out.model.ParameterNames();
    if (params.size() != names.size()) {
      throw CheckpointError("expected " + std::to_string(names.size()) +
                            " parameter arrays, found " +
                            std::to_string(params.size()));
    }
    const auto tensors = out.model.MutableParameters();
    for (size_t i = 0; i < names.size(); ++i) {
      const json& p = params.at(names[i]);
      const auto shape = p.at("shape").get<std::vector<size_t>>();
      Tensor& t = *tensors[i];
      if (shape != Shape{t.rows(), t.cols()}) {
        throw CheckpointError("parameter " + names[i] + " has the wrong shape");
      }
      const auto data = p.at("data").get<std::vector<double>>();
      if (data.size() != t.data().size()) {
        throw CheckpointError("parameter " + names[i] + " has the wrong size");
      }
      std::copy(data.begin(), data.end(), t.data().begin());
    }
    if (doc.contains("metadata")) {
      out.metadata =
          doc.at("metadata").get<std::map<std::string, std::string>>();
    }
    return out;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const Checkpoint& checkpoint,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << SerializeCheckpoint(checkpoint);
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseCheckpoint(buf.str());
}

}  // namespace faithbench
