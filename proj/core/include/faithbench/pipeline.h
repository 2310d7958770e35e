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

// End-to-end orchestration: data preparation, training, evaluation sweeps
// and the artifacts each stage leaves in the output directory.

#ifndef FAITHBENCH_PIPELINE_H_
#define FAITHBENCH_PIPELINE_H_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "faithbench/checkpoint.h"
#include "faithbench/config.h"
#include "faithbench/dataset.h"
#include "faithbench/ood.h"
#include "faithbench/protocol.h"

namespace faithbench {

inline constexpr const char* kVersion = "0.1.0";

// Raised for any failure inside a pipeline stage; what() starts with the
// stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Workspace {
  Dataset dataset;
  Vocabulary vocab;  // built from the training split
  std::vector<TokenSequence> train, calibration, eval;
  std::vector<size_t> eval_ids;  // dataset record index of each eval item
  std::vector<int> oracle_tokens;
};

// Loads or generates the data and splits it into eval / calibration / train
// with a seeded shuffle.
Workspace PrepareWorkspace(const RunConfig& config);

Checkpoint TrainPredictorStage(const RunConfig& config,
                               const Workspace& workspace);
// One editor per id in config.editors, in that order.
std::vector<Checkpoint> TrainEditorStage(const RunConfig& config,
                                         const Workspace& workspace);

struct EvaluationResult {
  bool full_sweep = false;
  // Ordered by example, then config method order, then strategy order.
  std::vector<EvalRecord> records;
  // Parallel to records in a full sweep: NLL of the edited input at every
  // level (nullopt where the edit failed).
  std::vector<std::vector<std::optional<double>>> level_nll;
  std::vector<AttributionResult> attributions;  // example-major, method order
  std::vector<size_t> attribution_examples;
  std::vector<double> calibration_nll;
  std::optional<OodThreshold> threshold;
};

// Runs every (example, method, strategy) triple. A full sweep visits every
// level so NLLs exist for the OOD audit; the records are the early-exit
// prefix either way. `editors` follows config.editors.
EvaluationResult Evaluate(const RunConfig& config, const Workspace& workspace,
                          const LmModel& predictor,
                          const std::vector<const LmModel*>& editors,
                          bool full_sweep);

// Calls fn(i) for i in [0, n) on up to `workers` threads. The exception of
// the lowest failing index is rethrown.
void ParallelFor(size_t n, size_t workers,
                 const std::function<void(size_t)>& fn);

// Artifact file names inside the output directory.
namespace artifacts {
inline constexpr const char* kDataset = "dataset.jsonl";
inline constexpr const char* kConfig = "config.ini";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kPredictor = "predictor.ckpt.json";
inline constexpr const char* kRecords = "records.jsonl";
inline constexpr const char* kAttributions = "attributions.jsonl";
inline constexpr const char* kCalibration = "calibration.json";
inline constexpr const char* kMaskPercentage = "mask_percentage.csv";
inline constexpr const char* kFlipRate = "flip_rate.csv";
inline constexpr const char* kOod = "ood.csv";
inline constexpr const char* kOodLevels = "ood_levels.csv";
inline constexpr const char* kCorrelation = "correlation.csv";
inline constexpr const char* kCorrelationUndefined =
    "correlation_undefined.csv";
inline constexpr const char* kCorrelationBundle = "correlation.json";
inline constexpr const char* kCorrelationDifference =
    "correlation_difference.csv";
std::string EditorCheckpoint(const std::string& id);
}  // namespace artifacts

// Summary of one records.jsonl line, enough for every report table.
struct RecordSummary {
  size_t example_id = 0;
  std::string method;
  std::string strategy;
  std::optional<double> min_flip_level;
  double max_level = 0.5;
  bool skipped = false;
  std::vector<std::optional<double>> level_nll;

  double MaskLevel() const { return min_flip_level.value_or(max_level); }
};

void WriteRecords(const std::filesystem::path& path,
                  const EvaluationResult& result, const Vocabulary& vocab);
void WriteAttributions(const std::filesystem::path& path,
                       const EvaluationResult& result,
                       const Workspace& workspace);
void WriteCalibration(const std::filesystem::path& path,
                      const EvaluationResult& result);
std::vector<RecordSummary> ReadRecordSummaries(
    const std::filesystem::path& path);
OodThreshold ReadCalibration(const std::filesystem::path& path);

// mask_percentage.csv and flip_rate.csv: one row per method, one column per
// dataset/strategy pair; values in percent.
void WriteMaskTables(const std::filesystem::path& dir, const RunConfig& config,
                     const std::vector<RecordSummary>& records);
// ood.csv (strategy rows, method columns, mean over levels) and a
// strategy-by-level table pooled over methods; values in percent.
void WriteOodTables(const std::filesystem::path& dir, const RunConfig& config,
                    const std::vector<RecordSummary>& records,
                    const OodThreshold& threshold);

// Per-example method rankings for every strategy, over examples where no
// record was skipped.
RankMatrix RankCorrelation(const RunConfig& config,
                           const std::vector<RecordSummary>& records,
                           size_t* examples_used = nullptr);
void WriteCorrelation(const std::filesystem::path& dir,
                      const RunConfig& config, const RankMatrix& matrix,
                      size_t examples_used,
                      const std::optional<OodThreshold>& threshold);
void WriteMatrixCsv(const std::filesystem::path& path,
                    const RankMatrix& matrix);

// Manifest bookkeeping: stage status and artifacts, rewritten after every
// stage. Incomplete runs are flagged.
class Manifest {
 public:
  Manifest(std::filesystem::path dir, const RunConfig& config);
  void Begin(const std::string& stage);
  void Finish(const std::string& stage,
              const std::vector<std::string>& outputs);
  void Fail(const std::string& stage, const std::string& error);
  void Save() const;

 private:
  struct Stage {
    std::string name;
    std::string status;
    std::string error;
    std::vector<std::string> outputs;
  };
  std::filesystem::path dir_;
  RunConfig config_;
  std::vector<Stage> stages_;
};

// Stage entry points used by the CLI subcommands; each records itself in
// the manifest and throws StageError on failure.
void SynthDataCommand(const RunConfig& config, const std::string& out_path);
void TrainPredictorCommand(const RunConfig& config);
void TrainEditorCommand(const RunConfig& config);
void EvaluateCommand(const RunConfig& config);
void OodAuditCommand(const RunConfig& config);
void ReportCommand(const RunConfig& config);
void CorrelateCommand(const RunConfig& config,
                      const std::optional<std::string>& against_dir);
// Everything: train, full sweep, all tables.
void RunCommand(const RunConfig& config);

}  // namespace faithbench

#endif  // FAITHBENCH_PIPELINE_H_
