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

// Flat key=value run configuration shared by every pipeline stage.

#ifndef FAITHBENCH_CONFIG_H_
#define FAITHBENCH_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faithbench/attribution.h"
#include "faithbench/dataset.h"
#include "faithbench/editor.h"
#include "faithbench/model.h"
#include "faithbench/protocol.h"
#include "faithbench/training.h"

namespace faithbench {

struct RunConfig {
  // Data. An empty `dataset` selects the synthetic planted-token task.
  std::string dataset;
  std::string dataset_format = "jsonl";
  std::vector<std::string> labels;
  size_t synth_count = 4400;
  size_t synth_classes = 2;
  double synth_noise = 0.1;
  size_t synth_min_length = 6;
  size_t synth_max_length = 10;
  size_t eval_size = 200;
  size_t calibration_size = 200;

  // Predictor.
  std::string predictor_objective = "classification";
  size_t predictor_width = 128;
  size_t predictor_layers = 4;
  size_t predictor_heads = 4;
  size_t context_length = 128;
  size_t predictor_epochs = 10;
  double predictor_lr = 3e-3;
  size_t predictor_batch = 16;
  size_t predictor_train_size = 1000;  // 0 uses the whole training split
  bool predictor_zero_head = true;
  uint64_t predictor_seed = 1;

  // Editors, one model per id.
  std::vector<std::string> editors{"e1"};
  size_t editor_width = 128;
  size_t editor_layers = 4;
  size_t editor_heads = 4;
  size_t editor_epochs = 8;
  double editor_lr = 3e-3;
  size_t editor_batch = 16;
  size_t editor_train_size = 0;  // 0 uses the whole training split
  double editor_mask_low = 0.05;
  double editor_mask_high = 0.50;
  uint64_t editor_seed = 2;

  // Evaluation.
  std::vector<std::string> methods{"gradnorm1", "gradnorm2", "gradinp",
                                   "erasure",   "kernelshap", "ig",
                                   "random"};
  std::vector<std::string> strategies{"editor:e1", "erase", "unk", "mask",
                                      "att-zero"};
  std::vector<double> levels{0.10, 0.20, 0.30, 0.40, 0.50};
  std::string score = "logit";
  size_t ig_steps = 5;
  size_t shap_samples = 0;
  std::vector<std::string> oracle_tokens;  // defaults to synthetic markers
  double decode_temperature = 0.0;
  double decode_cap_multiplier = 1.5;
  size_t decode_cap_offset = 8;
  uint64_t decode_seed = 0;
  double ood_percentile = 99.0;

  // Execution.
  size_t workers = 1;
  std::string output_dir = "faithbench-out";
  uint64_t seed = 0;

  // Every key, in declaration order.
  static const std::vector<std::string>& Keys();
  static std::string_view Help(std::string_view key);

  // Throws InvalidArgument for unknown keys or unparsable values.
  void Set(std::string_view key, std::string_view value);
  std::string Get(std::string_view key) const;
  std::vector<std::pair<std::string, std::string>> ToKeyValues() const;

  // Checks every name and range before any work starts.
  void Validate() const;

  // FNV-1a over the canonical key=value listing, excluding keys that do
  // not influence results (workers, output_dir). 16 hex digits.
  std::string Hash() const;

  // Typed views.
  std::vector<Method> MethodList() const;
  std::vector<ReplacementStrategy> StrategyList() const;
  EscalationSchedule Schedule() const;
  Objective PredictorObjective() const;
  ModelConfig PredictorModel(size_t vocab_size) const;
  ModelConfig EditorModel(size_t vocab_size) const;
  TrainingOptions PredictorTraining() const;
  EditorTrainingOptions EditorTraining(size_t editor_index) const;
  DecodeConfig Decode() const;
  SyntheticSpec Synthetic() const;
  bool synthetic() const { return dataset.empty(); }
  std::string DatasetName() const;
};

// "key = value" lines in Keys() order, readable as a CLI11 config file.
std::string FormatRunConfig(const RunConfig& config);

}  // namespace faithbench

#endif  // FAITHBENCH_CONFIG_H_
