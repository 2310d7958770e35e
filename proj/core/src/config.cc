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

#include "faithbench/config.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <set>

#include "faithbench/errors.h"
#include "faithbench/ood.h"
#include "faithbench/random.h"

namespace faithbench {
namespace {

// Architecture checks do not depend on the vocabulary.
constexpr size_t kValidationVocab = Vocabulary::kNumReserved + 2;

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void BadValue(std::string_view key, std::string_view value,
                           std::string_view expected) {
  throw InvalidArgument("config key '" + std::string(key) + "': '" +
                        std::string(value) + "' is not " +
                        std::string(expected));
}

void Parse(std::string_view key, std::string_view v, std::string& out) {
  (void)key;
  out = Trim(v);
}

void Parse(std::string_view key, std::string_view v, size_t& out) {
  const std::string s = Trim(v);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    BadValue(key, v, "a non-negative integer");
  }
}

void Parse(std::string_view key, std::string_view v, double& out) {
  const std::string s = Trim(v);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    BadValue(key, v, "a number");
  }
}

void Parse(std::string_view key, std::string_view v, bool& out) {
  const std::string s = Trim(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
  } else if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
  } else {
    BadValue(key, v, "a boolean");
  }
}

std::vector<std::string> SplitList(std::string_view v) {
  std::string s = Trim(v);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    std::string item = Trim(std::string_view(s).substr(start, end - start));
    if (item.size() >= 2 && item.front() == '"' && item.back() == '"') {
      item = item.substr(1, item.size() - 2);
    }
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

void Parse(std::string_view key, std::string_view v,
           std::vector<std::string>& out) {
  (void)key;
  out = SplitList(v);
}

void Parse(std::string_view key, std::string_view v, std::vector<double>& out) {
  out.clear();
  for (const std::string& item : SplitList(v)) {
    double d = 0.0;
    Parse(key, item, d);
    out.push_back(d);
  }
}

std::string Format(const std::string& v) { return v; }
std::string Format(size_t v) { return std::to_string(v); }
std::string Format(bool v) { return v ? "true" : "false"; }
std::string Format(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}
template <typename T>
std::string Format(const std::vector<T>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += Format(v[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename T>
Field MakeField(std::string key, T RunConfig::*member, std::string help) {
  Field f;
  f.key = key;
  f.help = std::move(help);
  f.get = [member](const RunConfig& c) { return Format(c.*member); };
  f.set = [member, key](RunConfig& c, std::string_view v) {
    Parse(key, v, c.*member);
  };
  return f;
}

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      MakeField("dataset", &RunConfig::dataset,
                "dataset path; empty uses the synthetic task"),
      MakeField("dataset_format", &RunConfig::dataset_format, "jsonl or csv"),
      MakeField("labels", &RunConfig::labels,
                "declared label set; inferred when empty"),
      MakeField("synth_count", &RunConfig::synth_count,
                "synthetic examples to generate"),
      MakeField("synth_classes", &RunConfig::synth_classes,
                "synthetic classes (one marker each)"),
      MakeField("synth_noise", &RunConfig::synth_noise,
                "probability of a uniform distractor draw"),
      MakeField("synth_min_length", &RunConfig::synth_min_length,
                "minimum synthetic length in words"),
      MakeField("synth_max_length", &RunConfig::synth_max_length,
                "maximum synthetic length in words"),
      MakeField("eval_size", &RunConfig::eval_size, "evaluation examples"),
      MakeField("calibration_size", &RunConfig::calibration_size,
                "originals used to calibrate the OOD threshold"),
      MakeField("predictor_objective", &RunConfig::predictor_objective,
                "classification or next-token"),
      MakeField("predictor_width", &RunConfig::predictor_width,
                "predictor model width"),
      MakeField("predictor_layers", &RunConfig::predictor_layers,
                "predictor decoder blocks"),
      MakeField("predictor_heads", &RunConfig::predictor_heads,
                "predictor attention heads"),
      MakeField("context_length", &RunConfig::context_length,
                "context length of every model"),
      MakeField("predictor_epochs", &RunConfig::predictor_epochs,
                "predictor training epochs"),
      MakeField("predictor_lr", &RunConfig::predictor_lr,
                "predictor learning rate"),
      MakeField("predictor_batch", &RunConfig::predictor_batch,
                "predictor batch size"),
      MakeField("predictor_train_size", &RunConfig::predictor_train_size,
                "training examples for the predictor; 0 for all"),
      MakeField("predictor_zero_head", &RunConfig::predictor_zero_head,
                "start the predictor's unembedding at zero"),
      MakeField("predictor_seed", &RunConfig::predictor_seed,
                "predictor initialisation and shuffling seed"),
      MakeField("editors", &RunConfig::editors, "editor ids to train"),
      MakeField("editor_width", &RunConfig::editor_width, "editor width"),
      MakeField("editor_layers", &RunConfig::editor_layers,
                "editor decoder blocks"),
      MakeField("editor_heads", &RunConfig::editor_heads,
                "editor attention heads"),
      MakeField("editor_epochs", &RunConfig::editor_epochs,
                "editor training epochs"),
      MakeField("editor_lr", &RunConfig::editor_lr, "editor learning rate"),
      MakeField("editor_batch", &RunConfig::editor_batch, "editor batch size"),
      MakeField("editor_train_size", &RunConfig::editor_train_size,
                "training examples for each editor; 0 for all"),
      MakeField("editor_mask_low", &RunConfig::editor_mask_low,
                "lowest training mask fraction"),
      MakeField("editor_mask_high", &RunConfig::editor_mask_high,
                "highest training mask fraction"),
      MakeField("editor_seed", &RunConfig::editor_seed,
                "base seed for editor initialisation and masking"),
      MakeField("methods", &RunConfig::methods, "attribution methods"),
      MakeField("strategies", &RunConfig::strategies,
                "replacement strategies, editors as editor:<id>"),
      MakeField("levels", &RunConfig::levels, "escalation levels"),
      MakeField("score", &RunConfig::score, "logit or logprob"),
      MakeField("ig_steps", &RunConfig::ig_steps,
                "integrated-gradients steps"),
      MakeField("shap_samples", &RunConfig::shap_samples,
                "KernelSHAP coalitions; 0 for the default rule"),
      MakeField("oracle_tokens", &RunConfig::oracle_tokens,
                "tokens the oracle method scores as important"),
      MakeField("decode_temperature", &RunConfig::decode_temperature,
                "editor sampling temperature; 0 is greedy"),
      MakeField("decode_cap_multiplier", &RunConfig::decode_cap_multiplier,
                "generation cap per masked token"),
      MakeField("decode_cap_offset", &RunConfig::decode_cap_offset,
                "generation cap offset"),
      MakeField("decode_seed", &RunConfig::decode_seed,
                "editor sampling seed"),
      MakeField("ood_percentile", &RunConfig::ood_percentile,
                "OOD threshold percentile"),
      MakeField("workers", &RunConfig::workers, "evaluation worker threads"),
      MakeField("output_dir", &RunConfig::output_dir, "artifact directory"),
      MakeField("seed", &RunConfig::seed,
                "global seed for data, splits and attribution sampling"),
  };
  return fields;
}

const Field& FindField(std::string_view key) {
  for (const Field& f : Fields()) {
    if (f.key == key) return f;
  }
  throw InvalidArgument("unknown config key '" + std::string(key) + "'");
}

ModelConfig Architecture(size_t vocab, size_t context, size_t width,
                         size_t layers, size_t heads) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.context_length = context;
  c.width = width;
  c.layers = layers;
  c.heads = heads;
  return c;
}

}  // namespace

const std::vector<std::string>& RunConfig::Keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const Field& f : Fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

std::string_view RunConfig::Help(std::string_view key) {
  return FindField(key).help;
}

void RunConfig::Set(std::string_view key, std::string_view value) {
  FindField(key).set(*this, value);
}

std::string RunConfig::Get(std::string_view key) const {
  return FindField(key).get(*this);
}

std::vector<std::pair<std::string, std::string>> RunConfig::ToKeyValues()
    const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : Fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

void RunConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
  };
  if (!synthetic()) ParseDatasetFormat(dataset_format);
  if (synthetic()) Synthetic().Resolved();
  require(eval_size > 0, "eval_size must be positive");
  require(calibration_size >= kMinCalibrationSize,
          "calibration_size must be at least " +
              std::to_string(kMinCalibrationSize));
  PredictorObjective();
  PredictorModel(kValidationVocab).Validate();
  EditorModel(kValidationVocab).Validate();
  require(predictor_epochs > 0 && editor_epochs > 0, "epochs must be positive");
  require(predictor_lr > 0.0 && editor_lr > 0.0,
          "learning rates must be positive");
  require(predictor_batch > 0 && editor_batch > 0,
          "batch sizes must be positive");
  MaskFractionRange{editor_mask_low, editor_mask_high}.Validate();

  std::set<std::string> ids;
  for (const std::string& id : editors) {
    require(!id.empty() && id.find(',') == std::string::npos,
            "editor ids must be non-empty");
    require(ids.insert(id).second, "duplicate editor id '" + id + "'");
  }
  require(!methods.empty(), "at least one attribution method is required");
  const std::vector<Method> parsed = MethodList();
  require(std::set<Method>(parsed.begin(), parsed.end()).size() ==
              parsed.size(),
          "duplicate attribution method");
  const bool oracle =
      std::find(parsed.begin(), parsed.end(), Method::kOracle) != parsed.end();
  require(!oracle || synthetic() || !oracle_tokens.empty(),
          "method 'oracle' needs oracle_tokens outside the synthetic task");
  require(!strategies.empty(), "at least one strategy is required");
  std::set<std::string> names;
  for (const ReplacementStrategy& s : StrategyList()) {
    require(names.insert(s.Name()).second,
            "duplicate strategy '" + s.Name() + "'");
    if (s.kind == StrategyKind::kEditor) {
      require(ids.count(s.editor_id) > 0,
              "strategy '" + s.Name() + "' names an editor not in 'editors'");
    }
  }
  Schedule().Validate();
  ParseScoreKind(score);
  require(ig_steps >= 1, "ig_steps must be at least 1");
  require(decode_temperature >= 0.0, "decode_temperature must be >= 0");
  require(decode_cap_multiplier >= 1.0, "decode_cap_multiplier must be >= 1");
  require(ood_percentile > 0.0 && ood_percentile <= 100.0,
          "ood_percentile must lie in (0, 100]");
  require(workers >= 1, "workers must be at least 1");
  require(!output_dir.empty(), "output_dir must be set");
}

std::string RunConfig::Hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [key, value] : ToKeyValues()) {
    if (key == "workers" || key == "output_dir") continue;
    for (char c : key + "=" + value + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Method> RunConfig::MethodList() const {
  std::vector<Method> out;
  for (const std::string& m : methods) out.push_back(ParseMethod(m));
  return out;
}

std::vector<ReplacementStrategy> RunConfig::StrategyList() const {
  std::vector<ReplacementStrategy> out;
  for (const std::string& s : strategies) {
    ReplacementStrategy parsed = ReplacementStrategy::Parse(s);
    if (parsed.kind == StrategyKind::kEditor && parsed.editor_id.empty()) {
      if (editors.size() != 1) {
        throw InvalidArgument("bare 'editor' is ambiguous with " +
                              std::to_string(editors.size()) + " editors");
      }
      parsed.editor_id = editors.front();
    }
    out.push_back(parsed);
  }
  return out;
}

EscalationSchedule RunConfig::Schedule() const {
  EscalationSchedule s;
  s.levels = levels;
  return s;
}

Objective RunConfig::PredictorObjective() const {
  return ParseObjective(predictor_objective);
}

ModelConfig RunConfig::PredictorModel(size_t vocab_size) const {
  return Architecture(vocab_size, context_length, predictor_width,
                      predictor_layers, predictor_heads);
}

ModelConfig RunConfig::EditorModel(size_t vocab_size) const {
  return Architecture(vocab_size, context_length, editor_width, editor_layers,
                      editor_heads);
}

TrainingOptions RunConfig::PredictorTraining() const {
  TrainingOptions o;
  o.epochs = predictor_epochs;
  o.learning_rate = predictor_lr;
  o.batch_size = predictor_batch;
  o.seed = MixSeed(predictor_seed, 1);
  return o;
}

EditorTrainingOptions RunConfig::EditorTraining(size_t editor_index) const {
  EditorTrainingOptions o;
  o.training.epochs = editor_epochs;
  o.training.learning_rate = editor_lr;
  o.training.batch_size = editor_batch;
  o.training.seed = MixSeed(MixSeed(editor_seed, editor_index), 1);
  o.range = {editor_mask_low, editor_mask_high};
  return o;
}

DecodeConfig RunConfig::Decode() const {
  DecodeConfig d;
  d.temperature = decode_temperature;
  d.cap_multiplier = decode_cap_multiplier;
  d.cap_offset = decode_cap_offset;
  d.seed = decode_seed;
  return d;
}

SyntheticSpec RunConfig::Synthetic() const {
  SyntheticSpec s;
  s.classes = synth_classes;
  s.noise = synth_noise;
  s.min_length = synth_min_length;
  s.max_length = synth_max_length;
  s.count = synth_count;
  s.labels = labels;
  return s;
}

std::string RunConfig::DatasetName() const {
  if (synthetic()) return "synthetic";
  const size_t slash = dataset.find_last_of('/');
  std::string stem = slash == std::string::npos ? dataset
                                                : dataset.substr(slash + 1);
  const size_t dot = stem.find_last_of('.');
  return dot == std::string::npos || dot == 0 ? stem : stem.substr(0, dot);
}

std::string FormatRunConfig(const RunConfig& config) {
  std::string out;
  for (const auto& [key, value] : config.ToKeyValues()) {
    out += key + " = \"" + value + "\"\n";
  }
  return out;
}

}  // namespace faithbench
