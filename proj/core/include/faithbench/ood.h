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

// NLL-percentile OOD detection and rank-consistency matrices.

#ifndef FAITHBENCH_OOD_H_
#define FAITHBENCH_OOD_H_

#include <span>
#include <string>
#include <vector>

#include "faithbench/model.h"
#include "faithbench/vocabulary.h"

namespace faithbench {

inline constexpr size_t kMinCalibrationSize = 50;
inline constexpr const char* kPercentileConvention = "linear";

struct OodThreshold {
  double threshold = 0.0;  // nats
  double percentile = 99.0;
  size_t calibration_size = 0;
  std::string predictor_id;
};

// Throws CalibrationError with fewer than kMinCalibrationSize values.
OodThreshold CalibrateThreshold(std::span<const double> original_nlls,
                                double percentile,
                                const std::string& predictor_id);
// Scores `originals` with SequenceNll first.
OodThreshold CalibrateThreshold(const LmModel& predictor,
                                std::span<const TokenSequence> originals,
                                double percentile,
                                const std::string& predictor_id);

// Fraction of values strictly above the threshold; 0 for no inputs.
double OodPercentage(std::span<const double> nlls,
                     const OodThreshold& threshold);
double OodPercentage(const LmModel& predictor,
                     std::span<const TokenSequence> edited,
                     const OodThreshold& threshold);

// Symmetric matrix of mean Spearman coefficients between strategies.
struct RankMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
  // Per pair, examples whose coefficient was undefined and left out.
  std::vector<std::vector<size_t>> undefined;

  size_t size() const { return labels.size(); }
  double at(size_t i, size_t j) const { return values[i][j]; }
};

// `ranks[s][e]` ranks the attribution methods on example e under strategy s.
// Entry (s1, s2) averages Spearman over examples where it is defined; NaN
// when it is defined for none. The diagonal is 1 by definition.
RankMatrix CorrelationMatrix(
    std::span<const std::string> labels,
    std::span<const std::vector<std::vector<double>>> ranks);

// Elementwise m1 - m2. Throws InvalidArgument unless the labels agree.
RankMatrix MatrixDifference(const RankMatrix& m1, const RankMatrix& m2);

}  // namespace faithbench

#endif  // FAITHBENCH_OOD_H_
