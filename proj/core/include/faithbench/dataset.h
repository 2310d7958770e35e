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

#ifndef FAITHBENCH_DATASET_H_
#define FAITHBENCH_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "faithbench/vocabulary.h"

namespace faithbench {

struct DatasetRecord {
  std::string text;
  std::string label;
  bool operator==(const DatasetRecord&) const = default;
};

struct Dataset {
  std::vector<DatasetRecord> records;
  std::vector<std::string> labels;  // declared order, or sorted if inferred
};

enum class DatasetFormat { kJsonl, kCsv };

DatasetFormat ParseDatasetFormat(std::string_view name);

// Parses JSONL ({"text": ..., "label": ...} per line) or CSV with a header
// naming `text` and `label` columns. When `declared_labels` is empty the
// label set is inferred. Throws DatasetError carrying the 1-based line.
Dataset LoadDataset(const std::string& path, DatasetFormat format,
                    const std::vector<std::string>& declared_labels = {});
Dataset ParseDataset(std::string_view contents, DatasetFormat format,
                     const std::vector<std::string>& declared_labels = {});

void WriteJsonl(const std::string& path,
                const std::vector<DatasetRecord>& records);

// Planted-token task: every text is a first-order Markov chain over
// distractor words in which one uniformly chosen word is overwritten by the
// class marker. The label is the marker's class.
struct SyntheticSpec {
  size_t classes = 2;
  std::vector<std::string> markers;  // one per class; defaulted if empty
  std::vector<std::string> labels;   // one per class; defaulted if empty
  size_t vocab_size = 24;            // distractor words
  size_t min_length = 6;             // words, marker included
  size_t max_length = 10;
  // Probability that a distractor ignores the chain and is drawn uniformly.
  double noise = 0.1;
  size_t count = 1000;
  // Fixes the transition structure independently of the sampling seed.
  uint64_t grammar_seed = 7;

  // Fills defaults and throws InvalidArgument on inconsistent fields.
  SyntheticSpec Resolved() const;
};

std::vector<DatasetRecord> GenerateSyntheticDataset(const SyntheticSpec& spec,
                                                    uint64_t seed);

// Tokenizes records against `vocab`; each sequence's label is the
// verbalizer id. Throws DatasetError for labels outside the vocabulary.
std::vector<TokenSequence> Encode(const Vocabulary& vocab,
                                  const std::vector<DatasetRecord>& records);

}  // namespace faithbench

#endif  // FAITHBENCH_DATASET_H_
