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

#include "faithbench/vocabulary.h"

#include <algorithm>
#include <cctype>
#include <set>

#include "faithbench/errors.h"

namespace faithbench {

std::string VerbalizerToken(std::string_view label) {
  return "<label:" + std::string(label) + ">";
}

TokenSequence TokenSequence::FromIds(std::vector<int> ids,
                                     std::optional<int> label) {
  TokenSequence seq;
  seq.attention.assign(ids.size(), 1);
  seq.ids = std::move(ids);
  seq.label = label;
  return seq;
}

void TokenSequence::Validate() const {
  if (attention.size() != ids.size()) {
    throw InvalidArgument("attention mask has " +
                          std::to_string(attention.size()) +
                          " entries for " + std::to_string(ids.size()) +
                          " tokens");
  }
  for (int a : attention) {
    if (a != 0 && a != 1) throw InvalidArgument("attention mask must be 0/1");
  }
}

Vocabulary Vocabulary::Build(std::span<const std::string> labels,
                             std::span<const std::string> texts) {
  if (labels.size() < 2) {
    throw InvalidArgument("vocabulary needs at least two labels");
  }
  Vocabulary vocab;
  vocab.labels_.assign(labels.begin(), labels.end());
  vocab.tokens_ = {std::string(kPadToken),  std::string(kUnkToken),
                   std::string(kMaskToken), std::string(kCounterfactualToken),
                   std::string(kSepToken),  std::string(kEosToken)};
  for (const std::string& label : labels) {
    vocab.tokens_.push_back(VerbalizerToken(label));
  }
  std::set<std::string> reserved(vocab.tokens_.begin(), vocab.tokens_.end());
  std::set<std::string> words;
  for (const std::string& text : texts) {
    for (std::string& w : SplitWords(text)) {
      if (!reserved.count(w)) words.insert(std::move(w));
    }
  }
  vocab.tokens_.insert(vocab.tokens_.end(), words.begin(), words.end());
  vocab.Index();
  return vocab;
}

Vocabulary Vocabulary::FromTokens(std::vector<std::string> tokens,
                                  std::vector<std::string> labels) {
  Vocabulary vocab;
  vocab.tokens_ = std::move(tokens);
  vocab.labels_ = std::move(labels);
  const std::string_view reserved[] = {kPadToken, kUnkToken, kMaskToken,
                                       kCounterfactualToken, kSepToken,
                                       kEosToken};
  if (vocab.tokens_.size() < kNumReserved + vocab.labels_.size()) {
    throw InvalidArgument("vocabulary is missing reserved tokens");
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (vocab.tokens_[i] != reserved[i]) {
      throw InvalidArgument("reserved token " + std::string(reserved[i]) +
                            " expected at id " + std::to_string(i));
    }
  }
  for (size_t i = 0; i < vocab.labels_.size(); ++i) {
    if (vocab.tokens_[kNumReserved + i] != VerbalizerToken(vocab.labels_[i])) {
      throw InvalidArgument("verbalizer for label '" + vocab.labels_[i] +
                            "' out of place");
    }
  }
  vocab.Index();
  return vocab;
}

void Vocabulary::Index() {
  index_.clear();
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw InvalidArgument("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
  label_ids_.clear();
  for (size_t i = 0; i < labels_.size(); ++i) {
    label_ids_.push_back(kNumReserved + static_cast<int>(i));
  }
}

int Vocabulary::Id(std::string_view token) const {
  return Find(token).value_or(kUnkId);
}

std::optional<int> Vocabulary::Find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::Token(int id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size()) {
    throw InvalidArgument("token id " + std::to_string(id) +
                          " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::LabelId(std::string_view label) const {
  for (size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return label_ids_[i];
  }
  throw InvalidArgument("unknown label '" + std::string(label) + "'");
}

std::optional<size_t> Vocabulary::LabelIndex(int token_id) const {
  for (size_t i = 0; i < label_ids_.size(); ++i) {
    if (label_ids_[i] == token_id) return i;
  }
  return std::nullopt;
}

const std::string& Vocabulary::LabelName(int token_id) const {
  auto index = LabelIndex(token_id);
  if (!index) {
    throw InvalidArgument("token id " + std::to_string(token_id) +
                          " is not a label verbalizer");
  }
  return labels_[*index];
}

bool Vocabulary::IsSpecial(int id) const {
  return id >= 0 && id < kNumReserved + static_cast<int>(labels_.size());
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
    } else if (c == '<') {
      // Angle-bracket specials such as <mask> stay whole.
      const size_t close = text.find('>', i);
      if (close != std::string_view::npos &&
          text.substr(i, close - i).find_first_of(" \t\n") ==
              std::string_view::npos) {
        flush();
        words.emplace_back(text.substr(i, close - i + 1));
        i = close;
      } else {
        flush();
        words.emplace_back(1, static_cast<char>(c));
      }
    } else if (std::ispunct(c) && c != '\'' && c != '-') {
      flush();
      words.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(c));
    }
  }
  flush();
  return words;
}

TokenSequence Tokenize(const Vocabulary& vocab, std::string_view text) {
  std::vector<int> ids;
  for (const std::string& w : SplitWords(text)) ids.push_back(vocab.Id(w));
  return TokenSequence::FromIds(std::move(ids));
}

TokenSequence WithSeparator(const TokenSequence& text) {
  TokenSequence out = text;
  out.ids.push_back(Vocabulary::kSepId);
  out.attention.push_back(1);
  return out;
}

std::string Detokenize(const Vocabulary& vocab, std::span<const int> ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.Token(ids[i]);
  }
  return out;
}

}  // namespace faithbench
