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

#include "faithbench/training.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "faithbench/errors.h"

namespace faithbench {
namespace {

double ExampleLoss(const LmModel& model, const TrainingExample& ex,
                   bool trainable, Tape& tape, std::vector<Var>& params,
                   Var& loss) {
  params = model.BindParameters(tape, trainable);
  std::vector<int> attention(ex.ids.size(), 1);
  Var logits = model.ForwardIds(tape, params, ex.ids, attention);
  loss = ops::CrossEntropyRows(logits, ex.targets);
  return loss.value().item();
}

void CheckExample(const TrainingExample& ex) {
  if (ex.ids.empty() || ex.ids.size() != ex.targets.size()) {
    throw InvalidArgument("training example needs matching, non-empty ids "
                          "and targets");
  }
}

}  // namespace

std::string_view ObjectiveName(Objective objective) {
  return objective == Objective::kNextToken ? "next-token" : "classification";
}

Objective ParseObjective(std::string_view name) {
  if (name == "next-token" || name == "lm") return Objective::kNextToken;
  if (name == "classification" || name == "task") {
    return Objective::kClassification;
  }
  throw InvalidArgument("unknown objective '" + std::string(name) + "'");
}

TrainingExample NextTokenExample(std::span<const int> sequence) {
  if (sequence.size() < 2) {
    throw InvalidArgument("next-token example needs at least 2 tokens");
  }
  TrainingExample ex;
  ex.ids.assign(sequence.begin(), sequence.end() - 1);
  ex.targets.assign(sequence.begin() + 1, sequence.end());
  return ex;
}

TrainingExample ClassificationExample(const TokenSequence& text) {
  if (!text.label) throw InvalidArgument("classification example needs a label");
  TrainingExample ex;
  ex.ids = WithSeparator(text).ids;
  ex.targets.assign(ex.ids.size(), -1);
  ex.targets.back() = *text.label;
  return ex;
}

TrainingExample LanguageModelingExample(const TokenSequence& text) {
  if (!text.label) throw InvalidArgument("language-modeling example needs a label");
  std::vector<int> full = WithSeparator(text).ids;
  full.push_back(*text.label);
  return NextTokenExample(full);
}

double MeanLoss(const LmModel& model,
                std::span<const TrainingExample> examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const TrainingExample& ex : examples) {
    CheckExample(ex);
    Tape tape;
    std::vector<Var> params;
    Var loss;
    total += ExampleLoss(model, ex, false, tape, params, loss);
  }
  return total / static_cast<double>(examples.size());
}

TrainingReport Train(LmModel& model, const EpochSource& source,
                     const TrainingOptions& options) {
  if (options.batch_size == 0) throw InvalidArgument("batch size must be positive");
  std::vector<Tensor*> weights = model.MutableParameters();
  std::vector<std::vector<double>> first(weights.size()), second(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    first[i].assign(weights[i]->size(), 0.0);
    second[i].assign(weights[i]->size(), 0.0);
  }
  std::vector<std::vector<double>> grad_sum(weights.size());

  std::mt19937_64 rng(options.seed);
  TrainingReport report;
  for (size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<TrainingExample> examples = source(epoch);
    if (examples.empty()) throw InvalidArgument("training corpus is empty");
    for (const TrainingExample& ex : examples) CheckExample(ex);
    if (epoch == 0) report.initial_loss = MeanLoss(model, examples);

    std::vector<size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += options.batch_size) {
      const size_t end = std::min(order.size(), start + options.batch_size);
      for (size_t i = 0; i < weights.size(); ++i) {
        grad_sum[i].assign(weights[i]->size(), 0.0);
      }
      double batch_loss = 0.0;
      for (size_t b = start; b < end; ++b) {
        Tape tape;
        std::vector<Var> params;
        Var loss;
        const double value =
            ExampleLoss(model, examples[order[b]], true, tape, params, loss);
        if (!std::isfinite(value)) {
          throw TrainingFailure("non-finite training loss", report.steps);
        }
        batch_loss += value;
        Gradients grads = tape.Backward(loss);
        for (size_t i = 0; i < params.size(); ++i) {
          const Tensor* g = grads.Find(params[i]);
          if (g == nullptr) continue;
          std::vector<double>& acc = grad_sum[i];
          for (size_t k = 0; k < acc.size(); ++k) acc[k] += g->data()[k];
        }
      }
      const double count = static_cast<double>(end - start);
      double norm_sq = 0.0;
      for (auto& g : grad_sum) {
        for (double& v : g) {
          v /= count;
          norm_sq += v * v;
        }
      }
      if (!std::isfinite(norm_sq)) {
        throw TrainingFailure("non-finite gradient", report.steps);
      }
      const double norm = std::sqrt(norm_sq);
      const double clip = (options.clip_norm > 0.0 && norm > options.clip_norm)
                              ? options.clip_norm / norm
                              : 1.0;
      ++report.steps;
      const double t = static_cast<double>(report.steps);
      const double c1 = 1.0 - std::pow(options.beta1, t);
      const double c2 = 1.0 - std::pow(options.beta2, t);
      for (size_t i = 0; i < weights.size(); ++i) {
        std::span<double> w = weights[i]->data();
        for (size_t k = 0; k < w.size(); ++k) {
          const double g = grad_sum[i][k] * clip;
          first[i][k] = options.beta1 * first[i][k] + (1.0 - options.beta1) * g;
          second[i][k] =
              options.beta2 * second[i][k] + (1.0 - options.beta2) * g * g;
          w[k] -= options.learning_rate * (first[i][k] / c1) /
                  (std::sqrt(second[i][k] / c2) + options.adam_epsilon);
        }
      }
      epoch_loss += batch_loss;
    }
    report.epoch_losses.push_back(epoch_loss /
                                  static_cast<double>(examples.size()));
  }
  return report;
}

TrainingReport Train(LmModel& model, std::span<const TrainingExample> examples,
                     const TrainingOptions& options) {
  std::vector<TrainingExample> copy(examples.begin(), examples.end());
  return Train(
      model, [&copy](size_t) { return copy; }, options);
}

TrainingReport TrainPredictor(LmModel& model,
                              std::span<const TokenSequence> corpus,
                              Objective objective,
                              const TrainingOptions& options) {
  if (corpus.empty()) throw InvalidArgument("training corpus is empty");
  std::vector<TrainingExample> examples;
  examples.reserve(corpus.size());
  for (const TokenSequence& seq : corpus) {
    examples.push_back(objective == Objective::kClassification
                           ? ClassificationExample(seq)
                           : LanguageModelingExample(seq));
  }
  return Train(model, examples, options);
}

}  // namespace faithbench
