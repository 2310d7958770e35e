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

// Counterfactual infill editor and the non-generative replacement baselines.
//
// Editor training sequences follow
//   masked text <sep> label <counterfactual> original text <eos>
// where each contiguous run of masked tokens is a single <mask>. Loss is
// taken only on the reconstruction after <counterfactual>.

#ifndef FAITHBENCH_EDITOR_H_
#define FAITHBENCH_EDITOR_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faithbench/model.h"
#include "faithbench/training.h"
#include "faithbench/vocabulary.h"

namespace faithbench {

struct MaskFractionRange {
  double low = 0.05;
  double high = 0.50;
  void Validate() const;
};

struct InfillTrainingExample {
  std::vector<int> ids;               // full training sequence
  size_t reconstruction_begin = 0;    // index of the first original token
  double mask_fraction = 0.0;
  std::vector<size_t> masked_positions;  // in the original text, ascending
};

// CeilCount(fraction, n) distinct positions, at least one, uniformly drawn.
std::vector<size_t> DrawMaskPositions(size_t n, double fraction,
                                      std::mt19937_64& rng);

// Replaces each contiguous run of `positions` with a single <mask>.
std::vector<int> CollapseMasks(std::span<const int> text,
                               std::span<const size_t> positions);

InfillTrainingExample MakeInfillExample(std::span<const int> text, int label,
                                        std::span<const size_t> positions,
                                        double fraction);

// One example per corpus entry with a fraction drawn uniformly from `range`.
std::vector<InfillTrainingExample> BuildTrainingExamples(
    std::span<const TokenSequence> corpus, const MaskFractionRange& range,
    uint64_t seed);

TrainingExample ToTrainingExample(const InfillTrainingExample& example);

struct EditorTrainingOptions {
  TrainingOptions training{.epochs = 8};
  MaskFractionRange range;
};

// Fine-tunes `editor` in place with a fresh mask draw per example per epoch.
TrainingReport TrainEditor(LmModel& editor, const Vocabulary& vocab,
                           std::span<const TokenSequence> corpus,
                           const EditorTrainingOptions& options);

struct DecodeConfig {
  double temperature = 0.0;  // 0 is greedy
  double cap_multiplier = 1.5;
  size_t cap_offset = 8;
  uint64_t seed = 0;
};

// Generation budget for `masked_tokens` original tokens under `config`.
size_t GenerationCap(const DecodeConfig& config, size_t masked_tokens);

struct Counterfactual {
  std::vector<int> text;                // masked text with fills spliced in
  std::vector<std::vector<int>> fills;  // one per <mask>, in order
  bool complete = true;                 // false if the cap cut decoding short
  size_t generated = 0;                 // free decoding steps taken
};

// Prompts the editor with masked <sep> foil <counterfactual> and decodes the
// reconstruction. Unmasked tokens are forced, so the result differs from
// the masked text only inside fills. A fill ends when the editor emits the
// token that follows the mask (or <eos> for a trailing mask). Special tokens
// are never generated. On hitting the cap the partial splice is returned
// with complete = false.
Counterfactual GenerateCounterfactual(const LmModel& editor,
                                      const Vocabulary& vocab,
                                      std::span<const int> masked_text,
                                      int foil_label,
                                      const DecodeConfig& config,
                                      size_t masked_tokens);

// Unconstrained continuation of `prompt` until <eos> or `max_tokens`.
std::vector<int> GenerateFree(const LmModel& editor, const Vocabulary& vocab,
                              std::span<const int> prompt, size_t max_tokens,
                              const DecodeConfig& config);

// The prompt the editor sees: masked <sep> label <counterfactual>.
std::vector<int> EditorPrompt(std::span<const int> masked_text, int label);

enum class StrategyKind { kEditor, kErase, kUnk, kMask, kAttZero };

std::string_view StrategyKindName(StrategyKind kind);

// A replacement strategy; editor strategies carry the editor's id.
struct ReplacementStrategy {
  StrategyKind kind = StrategyKind::kEditor;
  std::string editor_id;

  // "erase", "unk", "mask", "att-zero", or "editor:<id>".
  std::string Name() const;
  static ReplacementStrategy Parse(std::string_view name);
  bool operator==(const ReplacementStrategy&) const = default;
};

// erase deletes, unk/mask substitute, att-zero clears attention bits.
// The input is never modified.
TokenSequence ApplyBaseline(StrategyKind kind, const TokenSequence& text,
                            std::span<const size_t> positions);

struct EditOutcome {
  TokenSequence edited;                 // text only, no predictor prompt
  std::vector<std::vector<int>> fills;  // editor strategies only
  bool complete = true;
  std::string error;                    // set when the edit failed
  int predicted = -1;
  bool flipped = false;
  bool flipped_to_foil = false;
  std::optional<double> nll;
};

}  // namespace faithbench

#endif  // FAITHBENCH_EDITOR_H_
