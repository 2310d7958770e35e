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

// Model checkpoints: a versioned JSON document holding the architecture,
// the vocabulary, every weight array and free-form string metadata.

#ifndef FAITHBENCH_CHECKPOINT_H_
#define FAITHBENCH_CHECKPOINT_H_

#include <filesystem>
#include <map>
#include <string>

#include "faithbench/model.h"
#include "faithbench/vocabulary.h"

namespace faithbench {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  LmModel model;
  Vocabulary vocab;
  std::map<std::string, std::string> metadata;
};

std::string SerializeCheckpoint(const Checkpoint& checkpoint);
// Throws CheckpointError on malformed input or a version other than
// kCheckpointVersion.
Checkpoint ParseCheckpoint(const std::string& text);

void SaveCheckpoint(const Checkpoint& checkpoint,
                    const std::filesystem::path& path);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace faithbench

#endif  // FAITHBENCH_CHECKPOINT_H_
