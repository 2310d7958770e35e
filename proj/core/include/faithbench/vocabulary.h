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

#ifndef FAITHBENCH_VOCABULARY_H_
#define FAITHBENCH_VOCABULARY_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace faithbench {

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kMaskToken = "<mask>";
inline constexpr std::string_view kCounterfactualToken = "<counterfactual>";
inline constexpr std::string_view kSepToken = "<sep>";
inline constexpr std::string_view kEosToken = "<eos>";

// Verbalizer token for a class label, e.g. "<label:positive>".
std::string VerbalizerToken(std::string_view label);

// Token ids, attention mask and optional label (a verbalizer token id).
struct TokenSequence {
  std::vector<int> ids;
  std::vector<int> attention;
  std::optional<int> label;

  static TokenSequence FromIds(std::vector<int> ids,
                               std::optional<int> label = std::nullopt);

  size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  // Throws InvalidArgument if the mask length differs or holds non-{0,1}.
  void Validate() const;
  bool operator==(const TokenSequence&) const = default;
};

// Word-level vocabulary. Ids are contiguous from 0: the six reserved tokens,
// then one verbalizer per label, then corpus words in lexicographic order.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kMaskId = 2;
  static constexpr int kCounterfactualId = 3;
  static constexpr int kSepId = 4;
  static constexpr int kEosId = 5;
  static constexpr int kNumReserved = 6;

  Vocabulary() = default;

  // Words are gathered with SplitWords over `texts`.
  static Vocabulary Build(std::span<const std::string> labels,
                          std::span<const std::string> texts);
  // Rebuilds from a serialized token list; validates the reserved layout.
  static Vocabulary FromTokens(std::vector<std::string> tokens,
                               std::vector<std::string> labels);

  size_t size() const { return tokens_.size(); }
  int Id(std::string_view token) const;  // <unk> for unknown tokens
  std::optional<int> Find(std::string_view token) const;
  const std::string& Token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<int>& label_ids() const { return label_ids_; }
  int LabelId(size_t label_index) const { return label_ids_.at(label_index); }
  int LabelId(std::string_view label) const;
  std::optional<size_t> LabelIndex(int token_id) const;
  const std::string& LabelName(int token_id) const;

  // Reserved tokens and verbalizers.
  bool IsSpecial(int id) const;

 private:
  void Index();

  std::vector<std::string> tokens_;
  std::vector<std::string> labels_;
  std::vector<int> label_ids_;
  std::unordered_map<std::string, int> index_;
};

// Splits on whitespace; each punctuation character is its own word.
std::vector<std::string> SplitWords(std::string_view text);

TokenSequence Tokenize(const Vocabulary& vocab, std::string_view text);

// Predictor prompt: the text followed by <sep>; the label is read from the
// logits at the <sep> position.
TokenSequence WithSeparator(const TokenSequence& text);
std::string Detokenize(const Vocabulary& vocab, std::span<const int> ids);

}  // namespace faithbench

#endif  // FAITHBENCH_VOCABULARY_H_
