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

#ifndef FAITHBENCH_TRAINING_H_
#define FAITHBENCH_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "faithbench/model.h"
#include "faithbench/vocabulary.h"

namespace faithbench {

enum class Objective { kNextToken, kClassification };

std::string_view ObjectiveName(Objective objective);
Objective ParseObjective(std::string_view name);

// One causal-LM style example: targets[t] is the token predicted from
// position t, or -1 when position t carries no loss.
struct TrainingExample {
  std::vector<int> ids;
  std::vector<int> targets;
};

// ids = sequence[:-1], targets = sequence[1:].
TrainingExample NextTokenExample(std::span<const int> sequence);

// text <sep> -> label: only the final position carries loss.
TrainingExample ClassificationExample(const TokenSequence& text);

// text <sep> label, trained with the next-token loss everywhere.
TrainingExample LanguageModelingExample(const TokenSequence& text);

struct TrainingOptions {
  size_t epochs = 10;
  double learning_rate = 3e-3;
  size_t batch_size = 16;
  uint64_t seed = 0;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct TrainingReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;  // mean training loss per epoch
  size_t steps = 0;
};

// Supplies the examples for a given epoch, so callers can re-draw masks.
using EpochSource = std::function<std::vector<TrainingExample>(size_t epoch)>;

// Adam with global-norm clipping over shuffled mini-batches. Deterministic
// for a fixed seed. Throws TrainingFailure on a non-finite loss.
TrainingReport Train(LmModel& model, const EpochSource& source,
                     const TrainingOptions& options);
TrainingReport Train(LmModel& model, std::span<const TrainingExample> examples,
                     const TrainingOptions& options);

// Trains on labeled text (each sequence's `label` set) with either the
// classification loss or the full next-token loss over text <sep> label.
TrainingReport TrainPredictor(LmModel& model,
                              std::span<const TokenSequence> corpus,
                              Objective objective,
                              const TrainingOptions& options);

// Mean per-example loss without updating the model.
double MeanLoss(const LmModel& model, std::span<const TrainingExample> examples);

}  // namespace faithbench

#endif  // FAITHBENCH_TRAINING_H_
