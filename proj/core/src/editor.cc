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

#include "faithbench/editor.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "faithbench/attribution.h"
#include "faithbench/errors.h"
#include "faithbench/random.h"

namespace faithbench {
namespace {

bool Generatable(const Vocabulary& vocab, int id) {
  return !vocab.IsSpecial(id);
}

// Greedy or temperature sampling over `allowed` tokens.
int PickToken(std::span<const double> logits, const std::vector<char>& allowed,
              const DecodeConfig& config, std::mt19937_64& rng) {
  int best = -1;
  double best_logit = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < logits.size(); ++i) {
    if (allowed[i] && logits[i] > best_logit) {
      best = static_cast<int>(i);
      best_logit = logits[i];
    }
  }
  if (best < 0) throw InvalidArgument("no token is allowed at this step");
  if (config.temperature <= 0.0) return best;
  std::vector<double> weights(logits.size(), 0.0);
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (!allowed[i]) continue;
    weights[i] = std::exp((logits[i] - best_logit) / config.temperature);
    total += weights[i];
  }
  double u = UniformUnit(rng) * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!allowed[i]) continue;
    u -= weights[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return best;
}

std::vector<double> NextLogits(const LmModel& editor,
                               const std::vector<int>& context) {
  return FinalLogitValues(editor, TokenSequence::FromIds(context));
}

}  // namespace

void MaskFractionRange::Validate() const {
  if (!(low >= 0.05 && high <= 0.50 && low <= high)) {
    throw InvalidArgument("mask fraction range must lie within [0.05, 0.50]");
  }
}

std::vector<size_t> DrawMaskPositions(size_t n, double fraction,
                                      std::mt19937_64& rng) {
  if (n == 0) return {};
  const size_t k = std::min(n, std::max<size_t>(1, CeilCount(fraction, n)));
  std::vector<size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (size_t i = 0; i < k; ++i) {
    const size_t j =
        i + static_cast<size_t>(UniformUnit(rng) * static_cast<double>(n - i));
    std::swap(pool[i], pool[std::min(j, n - 1)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<int> CollapseMasks(std::span<const int> text,
                               std::span<const size_t> positions) {
  std::vector<char> masked(text.size(), 0);
  for (size_t p : positions) {
    if (p >= text.size()) {
      throw InvalidArgument("mask position " + std::to_string(p) +
                            " outside text of length " +
                            std::to_string(text.size()));
    }
    masked[p] = 1;
  }
  std::vector<int> out;
  for (size_t i = 0; i < text.size(); ++i) {
    if (!masked[i]) {
      out.push_back(text[i]);
    } else if (i == 0 || !masked[i - 1]) {
      out.push_back(Vocabulary::kMaskId);
    }
  }
  return out;
}

std::vector<int> EditorPrompt(std::span<const int> masked_text, int label) {
  std::vector<int> prompt(masked_text.begin(), masked_text.end());
  prompt.push_back(Vocabulary::kSepId);
  prompt.push_back(label);
  prompt.push_back(Vocabulary::kCounterfactualId);
  return prompt;
}

InfillTrainingExample MakeInfillExample(std::span<const int> text, int label,
                                        std::span<const size_t> positions,
                                        double fraction) {
  InfillTrainingExample ex;
  ex.ids = EditorPrompt(CollapseMasks(text, positions), label);
  ex.reconstruction_begin = ex.ids.size();
  ex.ids.insert(ex.ids.end(), text.begin(), text.end());
  ex.ids.push_back(Vocabulary::kEosId);
  ex.mask_fraction = fraction;
  ex.masked_positions.assign(positions.begin(), positions.end());
  std::sort(ex.masked_positions.begin(), ex.masked_positions.end());
  return ex;
}

std::vector<InfillTrainingExample> BuildTrainingExamples(
    std::span<const TokenSequence> corpus, const MaskFractionRange& range,
    uint64_t seed) {
  range.Validate();
  std::mt19937_64 rng(seed);
  std::vector<InfillTrainingExample> out;
  out.reserve(corpus.size());
  for (const TokenSequence& seq : corpus) {
    if (!seq.label) throw InvalidArgument("editor corpus must be labeled");
    const double fraction =
        range.low + (range.high - range.low) * UniformUnit(rng);
    const std::vector<size_t> positions =
        DrawMaskPositions(seq.size(), fraction, rng);
    out.push_back(MakeInfillExample(seq.ids, *seq.label, positions, fraction));
  }
  return out;
}

TrainingExample ToTrainingExample(const InfillTrainingExample& example) {
  TrainingExample ex = NextTokenExample(example.ids);
  // targets[t] predicts ids[t + 1]; keep only reconstruction targets.
  for (size_t t = 0; t < ex.targets.size(); ++t) {
    if (t + 1 < example.reconstruction_begin) ex.targets[t] = -1;
  }
  return ex;
}

TrainingReport TrainEditor(LmModel& editor, const Vocabulary& vocab,
                           std::span<const TokenSequence> corpus,
                           const EditorTrainingOptions& options) {
  if (vocab.Find(kMaskToken) != Vocabulary::kMaskId ||
      vocab.Find(kCounterfactualToken) != Vocabulary::kCounterfactualId) {
    throw InvalidArgument("editor vocabulary lacks <mask>/<counterfactual>");
  }
  if (editor.config().vocab_size != vocab.size()) {
    throw InvalidArgument("editor vocabulary size " +
                          std::to_string(editor.config().vocab_size) +
                          " does not match " + std::to_string(vocab.size()));
  }
  if (corpus.empty()) throw InvalidArgument("editor corpus is empty");
  options.range.Validate();
  const uint64_t seed = options.training.seed;
  EpochSource source = [&](size_t epoch) {
    std::vector<TrainingExample> out;
    for (const auto& ex :
         BuildTrainingExamples(corpus, options.range, MixSeed(seed, epoch))) {
      out.push_back(ToTrainingExample(ex));
    }
    return out;
  };
  return Train(editor, source, options.training);
}

size_t GenerationCap(const DecodeConfig& config, size_t masked_tokens) {
  return static_cast<size_t>(
             std::ceil(config.cap_multiplier * static_cast<double>(masked_tokens) -
                       1e-9)) +
         config.cap_offset;
}

Counterfactual GenerateCounterfactual(const LmModel& editor,
                                      const Vocabulary& vocab,
                                      std::span<const int> masked_text,
                                      int foil_label,
                                      const DecodeConfig& config,
                                      size_t masked_tokens) {
  const size_t mask_count = static_cast<size_t>(
      std::count(masked_text.begin(), masked_text.end(), Vocabulary::kMaskId));
  if (mask_count == 0) {
    throw InvalidArgument("counterfactual prompt contains no <mask>");
  }
  if (!vocab.LabelIndex(foil_label)) {
    throw InvalidArgument("foil " + std::to_string(foil_label) +
                          " is not a label verbalizer");
  }
  const size_t cap = GenerationCap(config, masked_tokens);
  std::mt19937_64 rng(config.seed);
  std::vector<int> context = EditorPrompt(masked_text, foil_label);
  std::vector<char> base_allowed(vocab.size(), 0);
  for (size_t i = 0; i < vocab.size(); ++i) {
    base_allowed[i] = Generatable(vocab, static_cast<int>(i));
  }

  Counterfactual out;
  for (size_t j = 0; j < masked_text.size(); ++j) {
    const int token = masked_text[j];
    if (token != Vocabulary::kMaskId) {
      context.push_back(token);
      out.text.push_back(token);
      continue;
    }
    const bool next_is_mask = j + 1 < masked_text.size() &&
                              masked_text[j + 1] == Vocabulary::kMaskId;
    const int anchor = j + 1 < masked_text.size() ? masked_text[j + 1]
                                                  : Vocabulary::kEosId;
    std::vector<int> fill;
    while (out.complete) {
      if (out.generated >= cap) {
        out.complete = false;
        break;
      }
      // The anchor closes a fill, so it is only offered after one token.
      std::vector<char> allowed = base_allowed;
      if (!next_is_mask) allowed[static_cast<size_t>(anchor)] = !fill.empty();
      const int next = PickToken(NextLogits(editor, context), allowed, config, rng);
      ++out.generated;
      if (!fill.empty() && next == anchor && !next_is_mask) break;
      fill.push_back(next);
      context.push_back(next);
      if (next_is_mask) break;
    }
    out.text.insert(out.text.end(), fill.begin(), fill.end());
    out.fills.push_back(std::move(fill));
  }
  while (out.fills.size() < mask_count) out.fills.emplace_back();
  return out;
}

std::vector<int> GenerateFree(const LmModel& editor, const Vocabulary& vocab,
                              std::span<const int> prompt, size_t max_tokens,
                              const DecodeConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::vector<int> context(prompt.begin(), prompt.end());
  std::vector<char> allowed(vocab.size(), 0);
  for (size_t i = 0; i < vocab.size(); ++i) {
    allowed[i] = Generatable(vocab, static_cast<int>(i));
  }
  allowed[Vocabulary::kEosId] = 1;
  std::vector<int> out;
  while (out.size() < max_tokens &&
         context.size() < editor.config().context_length) {
    const int next = PickToken(NextLogits(editor, context), allowed, config, rng);
    if (next == Vocabulary::kEosId) break;
    out.push_back(next);
    context.push_back(next);
  }
  return out;
}

std::string_view StrategyKindName(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kEditor: return "editor";
    case StrategyKind::kErase: return "erase";
    case StrategyKind::kUnk: return "unk";
    case StrategyKind::kMask: return "mask";
    case StrategyKind::kAttZero: return "att-zero";
  }
  return "unknown";
}

std::string ReplacementStrategy::Name() const {
  if (kind != StrategyKind::kEditor) return std::string(StrategyKindName(kind));
  return editor_id.empty() ? "editor" : "editor:" + editor_id;
}

ReplacementStrategy ReplacementStrategy::Parse(std::string_view name) {
  if (name == "editor") return {StrategyKind::kEditor, ""};
  if (name.starts_with("editor:") && name.size() > 7) {
    return {StrategyKind::kEditor, std::string(name.substr(7))};
  }
  for (StrategyKind k : {StrategyKind::kErase, StrategyKind::kUnk,
                         StrategyKind::kMask, StrategyKind::kAttZero}) {
    if (StrategyKindName(k) == name) return {k, ""};
  }
  throw InvalidArgument("unknown replacement strategy '" + std::string(name) +
                        "'");
}

TokenSequence ApplyBaseline(StrategyKind kind, const TokenSequence& text,
                            std::span<const size_t> positions) {
  text.Validate();
  std::vector<char> hit(text.size(), 0);
  for (size_t p : positions) {
    if (p >= text.size()) {
      throw InvalidArgument("plan position " + std::to_string(p) +
                            " outside sequence of length " +
                            std::to_string(text.size()));
    }
    hit[p] = 1;
  }
  TokenSequence out;
  out.label = text.label;
  switch (kind) {
    case StrategyKind::kErase:
      for (size_t i = 0; i < text.size(); ++i) {
        if (hit[i]) continue;
        out.ids.push_back(text.ids[i]);
        out.attention.push_back(text.attention[i]);
      }
      return out;
    case StrategyKind::kUnk:
    case StrategyKind::kMask: {
      const int replacement =
          kind == StrategyKind::kUnk ? Vocabulary::kUnkId : Vocabulary::kMaskId;
      out = text;
      for (size_t i = 0; i < text.size(); ++i) {
        if (hit[i]) out.ids[i] = replacement;
      }
      return out;
    }
    case StrategyKind::kAttZero:
      out = text;
      for (size_t i = 0; i < text.size(); ++i) {
        if (hit[i]) out.attention[i] = 0;
      }
      return out;
    case StrategyKind::kEditor:
      break;
  }
  throw InvalidArgument("the editor strategy is not a baseline");
}

}  // namespace faithbench
