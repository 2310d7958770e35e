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

// The mask-escalation loop: replace the top-scoring tokens at increasing
// levels until the predictor's label changes.

#ifndef FAITHBENCH_PROTOCOL_H_
#define FAITHBENCH_PROTOCOL_H_

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faithbench/attribution.h"
#include "faithbench/editor.h"
#include "faithbench/model.h"
#include "faithbench/vocabulary.h"

namespace faithbench {

struct EscalationSchedule {
  std::vector<double> levels{0.10, 0.20, 0.30, 0.40, 0.50};

  // Strictly increasing and within (0, 0.5].
  void Validate() const;
  double max_level() const { return levels.back(); }
};

// Produces the edited text for a mask plan. Positions index the text.
class Replacer {
 public:
  virtual ~Replacer() = default;
  virtual ReplacementStrategy strategy() const = 0;
  // Never throws for bad generations; failures land in EditOutcome::error.
  virtual EditOutcome Replace(const TokenSequence& text,
                              std::span<const size_t> positions,
                              const ContrastiveDecision& decision) const = 0;
};

class BaselineReplacer final : public Replacer {
 public:
  explicit BaselineReplacer(StrategyKind kind);
  ReplacementStrategy strategy() const override { return {kind_, ""}; }
  EditOutcome Replace(const TokenSequence& text,
                      std::span<const size_t> positions,
                      const ContrastiveDecision& decision) const override;

 private:
  StrategyKind kind_;
};

// Masks the plan, asks the editor for the foil and splices the fills.
class EditorReplacer final : public Replacer {
 public:
  EditorReplacer(const LmModel& editor, const Vocabulary& vocab,
                 DecodeConfig config, std::string id);
  ReplacementStrategy strategy() const override {
    return {StrategyKind::kEditor, id_};
  }
  EditOutcome Replace(const TokenSequence& text,
                      std::span<const size_t> positions,
                      const ContrastiveDecision& decision) const override;

 private:
  const LmModel& editor_;
  const Vocabulary& vocab_;
  DecodeConfig config_;
  std::string id_;
};

std::unique_ptr<Replacer> MakeBaselineReplacer(StrategyKind kind);

// What the predictor reads: text <sep>.
struct Predictor {
  const Scorer& model;
  const Vocabulary& vocab;
  // Set when edited inputs should be scored for OOD analysis.
  const LmModel* nll_model = nullptr;
};

struct LevelOutcome {
  double level = 0.0;
  std::vector<size_t> positions;  // plan in rank order
  EditOutcome outcome;
};

struct EvalRecord {
  size_t example_id = 0;
  Method method = Method::kRandom;
  std::string strategy;
  ContrastiveDecision decision;
  std::vector<double> scores;
  std::vector<LevelOutcome> levels;  // schedule order, up to the first flip
  std::optional<double> min_flip_level;
  bool censored = true;
  double max_level = 0.5;
  // Set when attribution failed and the example was skipped.
  std::string error;

  bool skipped() const { return !error.empty(); }
  // min_flip_level, or max_level when censored.
  double MaskLevel() const;
};

// Applies one plan and classifies the result.
EditOutcome EditAndClassify(const Predictor& predictor,
                            const Replacer& replacer,
                            const TokenSequence& text,
                            std::span<const size_t> positions,
                            const ContrastiveDecision& decision);

// Visits every level (early_exit = false) or stops at the first flip, using
// one attribution computed on the unmodified input.
std::vector<LevelOutcome> Sweep(const Predictor& predictor,
                                const Replacer& replacer,
                                const TokenSequence& text,
                                const AttributionResult& attribution,
                                const EscalationSchedule& schedule,
                                bool early_exit);

// The early-exit record implied by a sweep (full or not).
EvalRecord RecordFromSweep(size_t example_id,
                           const AttributionResult& attribution,
                           const std::string& strategy,
                           std::span<const LevelOutcome> sweep,
                           const EscalationSchedule& schedule);

// Per-example sampling seeds for random attribution and KernelSHAP.
AttributionOptions ExampleOptions(const AttributionOptions& options,
                                  size_t example_id);

// Predicts, attributes once and escalates with early exit. `text` carries
// the unprompted tokens.
EvalRecord EvaluateExample(const Predictor& predictor, Method method,
                           const AttributionOptions& options,
                           const Replacer& replacer, const TokenSequence& text,
                           const EscalationSchedule& schedule,
                           size_t example_id = 0);

// Mean of MaskLevel(). Throws InvalidArgument for an empty set or mixed
// method/strategy.
double MeanMaskPercentage(std::span<const EvalRecord> records);
// Fraction of records not censored.
double FlipRate(std::span<const EvalRecord> records);

// Average ranks of the records (one per method) by mask level; censored
// records share the worst band.
std::vector<double> RankMethodsPerExample(std::span<const EvalRecord> records);

}  // namespace faithbench

#endif  // FAITHBENCH_PROTOCOL_H_
