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

// Small fixtures shared by the unit tests.

#ifndef FAITHBENCH_TESTING_FIXTURES_H_
#define FAITHBENCH_TESTING_FIXTURES_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "faithbench/model.h"
#include "faithbench/vocabulary.h"

namespace faithbench::testing {

// Two labels and ten corpus words w0..w9.
inline Vocabulary SmallVocab() {
  std::vector<std::string> labels{"negative", "positive"};
  std::vector<std::string> texts{"w0 w1 w2 w3 w4 w5 w6 w7 w8 w9"};
  return Vocabulary::Build(labels, texts);
}

inline ModelConfig TinyConfig(size_t vocab_size, size_t width = 8,
                              size_t layers = 1, size_t heads = 2) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.context_length = 32;
  c.width = width;
  c.layers = layers;
  c.heads = heads;
  return c;
}

// Uniformly drawn non-special token ids.
inline std::vector<int> RandomWords(const Vocabulary& vocab, size_t n,
                                    uint64_t seed) {
  std::vector<int> words;
  for (int id = 0; id < static_cast<int>(vocab.size()); ++id) {
    if (!vocab.IsSpecial(id)) words.push_back(id);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, words.size() - 1);
  std::vector<int> out;
  for (size_t i = 0; i < n; ++i) out.push_back(words[pick(rng)]);
  return out;
}

inline ContrastiveDecision FirstTwoLabels(const Vocabulary& vocab) {
  return {vocab.LabelId(size_t{0}), vocab.LabelId(size_t{1})};
}

}  // namespace faithbench::testing

#endif  // FAITHBENCH_TESTING_FIXTURES_H_
