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

#include "faithbench/protocol.h"

#include <limits>

#include "faithbench/errors.h"
#include "faithbench/random.h"
#include "faithbench/stats.h"

namespace faithbench {

void EscalationSchedule::Validate() const {
  if (levels.empty()) throw InvalidArgument("escalation schedule is empty");
  for (size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] <= 0.5)) {
      throw InvalidArgument("escalation level " + std::to_string(levels[i]) +
                            " outside (0, 0.5]");
    }
    if (i > 0 && !(levels[i] > levels[i - 1])) {
      throw InvalidArgument("escalation levels must strictly increase");
    }
  }
}

BaselineReplacer::BaselineReplacer(StrategyKind kind) : kind_(kind) {
  if (kind == StrategyKind::kEditor) {
    throw InvalidArgument("the editor strategy needs an EditorReplacer");
  }
}

EditOutcome BaselineReplacer::Replace(const TokenSequence& text,
                                      std::span<const size_t> positions,
                                      const ContrastiveDecision&) const {
  EditOutcome out;
  out.edited = ApplyBaseline(kind_, text, positions);
  return out;
}

std::unique_ptr<Replacer> MakeBaselineReplacer(StrategyKind kind) {
  return std::make_unique<BaselineReplacer>(kind);
}

EditorReplacer::EditorReplacer(const LmModel& editor, const Vocabulary& vocab,
                               DecodeConfig config, std::string id)
    : editor_(editor), vocab_(vocab), config_(config), id_(std::move(id)) {
  if (editor.config().vocab_size != vocab.size()) {
    throw InvalidArgument("editor and vocabulary sizes disagree");
  }
}

EditOutcome EditorReplacer::Replace(const TokenSequence& text,
                                    std::span<const size_t> positions,
                                    const ContrastiveDecision& decision) const {
  EditOutcome out;
  try {
    const std::vector<int> masked = CollapseMasks(text.ids, positions);
    Counterfactual cf = GenerateCounterfactual(
        editor_, vocab_, masked, decision.foil, config_, positions.size());
    out.edited = TokenSequence::FromIds(std::move(cf.text));
    out.edited.label = text.label;
    out.fills = std::move(cf.fills);
    out.complete = cf.complete;
    if (!cf.complete) out.error = "generation hit the length cap";
  } catch (const std::exception& e) {
    out.complete = false;
    out.error = e.what();
    out.edited = text;
  }
  return out;
}

double EvalRecord::MaskLevel() const {
  return min_flip_level ? *min_flip_level : max_level;
}

EditOutcome EditAndClassify(const Predictor& predictor,
                            const Replacer& replacer,
                            const TokenSequence& text,
                            std::span<const size_t> positions,
                            const ContrastiveDecision& decision) {
  EditOutcome out = replacer.Replace(text, positions, decision);
  const TokenSequence prompt = WithSeparator(out.edited);
  const Prediction p =
      Predict(predictor.model, predictor.vocab.label_ids(), prompt);
  out.predicted = p.label;
  out.flipped = out.complete && out.error.empty() && p.label != decision.target;
  out.flipped_to_foil = out.flipped && p.label == decision.foil;
  if (predictor.nll_model != nullptr && prompt.size() >= 2) {
    out.nll = SequenceNll(*predictor.nll_model, prompt);
  }
  return out;
}

std::vector<LevelOutcome> Sweep(const Predictor& predictor,
                                const Replacer& replacer,
                                const TokenSequence& text,
                                const AttributionResult& attribution,
                                const EscalationSchedule& schedule,
                                bool early_exit) {
  const std::vector<size_t> maskable =
      MaskablePositions(predictor.vocab, WithSeparator(text));
  std::vector<LevelOutcome> out;
  for (double level : schedule.levels) {
    LevelOutcome lo;
    lo.level = level;
    lo.positions = SelectTopTokens(attribution, level, maskable).positions;
    lo.outcome = EditAndClassify(predictor, replacer, text, lo.positions,
                                 attribution.decision);
    const bool flipped = lo.outcome.flipped;
    out.push_back(std::move(lo));
    if (early_exit && flipped) break;
  }
  return out;
}

EvalRecord RecordFromSweep(size_t example_id,
                           const AttributionResult& attribution,
                           const std::string& strategy,
                           std::span<const LevelOutcome> sweep,
                           const EscalationSchedule& schedule) {
  EvalRecord r;
  r.example_id = example_id;
  r.method = attribution.method;
  r.strategy = strategy;
  r.decision = attribution.decision;
  r.scores = attribution.scores;
  r.max_level = schedule.max_level();
  for (const LevelOutcome& lo : sweep) {
    r.levels.push_back(lo);
    if (lo.outcome.flipped) {
      r.min_flip_level = lo.level;
      r.censored = false;
      break;
    }
  }
  return r;
}

AttributionOptions ExampleOptions(const AttributionOptions& options,
                                  size_t example_id) {
  AttributionOptions out = options;
  out.random_seed = MixSeed(options.random_seed, example_id);
  out.shap.seed = MixSeed(options.shap.seed, example_id);
  return out;
}

EvalRecord EvaluateExample(const Predictor& predictor, Method method,
                           const AttributionOptions& options,
                           const Replacer& replacer, const TokenSequence& text,
                           const EscalationSchedule& schedule,
                           size_t example_id) {
  schedule.Validate();
  const TokenSequence prompt = WithSeparator(text);
  const Prediction p =
      Predict(predictor.model, predictor.vocab.label_ids(), prompt);
  const AttributionOptions opts = ExampleOptions(options, example_id);
  AttributionResult attribution;
  try {
    attribution = Attribute(method, predictor.model, prompt, p.decision, opts);
  } catch (const std::runtime_error& e) {
    // Zero-norm components and singular SHAP systems skip the example.
    if (!dynamic_cast<const NormalizationError*>(&e) &&
        !dynamic_cast<const SingularSystem*>(&e)) {
      throw;
    }
    EvalRecord r;
    r.example_id = example_id;
    r.method = method;
    r.strategy = replacer.strategy().Name();
    r.decision = p.decision;
    r.max_level = schedule.max_level();
    r.error = e.what();
    return r;
  }
  const auto sweep =
      Sweep(predictor, replacer, text, attribution, schedule, true);
  return RecordFromSweep(example_id, attribution, replacer.strategy().Name(),
                         sweep, schedule);
}

double MeanMaskPercentage(std::span<const EvalRecord> records) {
  if (records.empty()) throw InvalidArgument("no records to average");
  double sum = 0.0;
  for (const EvalRecord& r : records) {
    if (r.method != records[0].method || r.strategy != records[0].strategy) {
      throw InvalidArgument("records mix methods or strategies");
    }
    sum += r.MaskLevel();
  }
  return sum / static_cast<double>(records.size());
}

double FlipRate(std::span<const EvalRecord> records) {
  if (records.empty()) throw InvalidArgument("no records for a flip rate");
  size_t flipped = 0;
  for (const EvalRecord& r : records) flipped += !r.censored;
  return static_cast<double>(flipped) / static_cast<double>(records.size());
}

std::vector<double> RankMethodsPerExample(std::span<const EvalRecord> records) {
  std::vector<double> levels;
  levels.reserve(records.size());
  for (const EvalRecord& r : records) {
    levels.push_back(r.censored ? std::numeric_limits<double>::infinity()
                                : *r.min_flip_level);
  }
  return AverageRanks(levels);
}

}  // namespace faithbench
