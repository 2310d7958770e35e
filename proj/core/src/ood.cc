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

#include "faithbench/ood.h"

#include <limits>

#include "faithbench/errors.h"
#include "faithbench/stats.h"

namespace faithbench {

OodThreshold CalibrateThreshold(std::span<const double> original_nlls,
                                double percentile,
                                const std::string& predictor_id) {
  if (original_nlls.size() < kMinCalibrationSize) {
    throw CalibrationError("calibration needs at least " +
                           std::to_string(kMinCalibrationSize) +
                           " originals, got " +
                           std::to_string(original_nlls.size()));
  }
  OodThreshold out;
  out.threshold = Percentile(original_nlls, percentile);
  out.percentile = percentile;
  out.calibration_size = original_nlls.size();
  out.predictor_id = predictor_id;
  return out;
}

OodThreshold CalibrateThreshold(const LmModel& predictor,
                                std::span<const TokenSequence> originals,
                                double percentile,
                                const std::string& predictor_id) {
  std::vector<double> nlls;
  nlls.reserve(originals.size());
  for (const TokenSequence& seq : originals) {
    nlls.push_back(SequenceNll(predictor, seq));
  }
  return CalibrateThreshold(nlls, percentile, predictor_id);
}

double OodPercentage(std::span<const double> nlls,
                     const OodThreshold& threshold) {
  if (nlls.empty()) return 0.0;
  size_t above = 0;
  for (double v : nlls) above += v > threshold.threshold;
  return static_cast<double>(above) / static_cast<double>(nlls.size());
}

double OodPercentage(const LmModel& predictor,
                     std::span<const TokenSequence> edited,
                     const OodThreshold& threshold) {
  std::vector<double> nlls;
  nlls.reserve(edited.size());
  for (const TokenSequence& seq : edited) {
    nlls.push_back(SequenceNll(predictor, seq));
  }
  return OodPercentage(nlls, threshold);
}

RankMatrix CorrelationMatrix(
    std::span<const std::string> labels,
    std::span<const std::vector<std::vector<double>>> ranks) {
  if (labels.size() != ranks.size()) {
    throw InvalidArgument("one rank set per strategy label is required");
  }
  const size_t s = labels.size();
  for (size_t i = 1; i < s; ++i) {
    if (ranks[i].size() != ranks[0].size()) {
      throw InvalidArgument("strategy " + labels[i] +
                            " ranks a different number of examples");
    }
  }
  RankMatrix m;
  m.labels.assign(labels.begin(), labels.end());
  m.values.assign(s, std::vector<double>(s, 1.0));
  m.undefined.assign(s, std::vector<size_t>(s, 0));
  for (size_t i = 0; i < s; ++i) {
    for (size_t j = i + 1; j < s; ++j) {
      double sum = 0.0;
      size_t defined = 0, undefined = 0;
      for (size_t e = 0; e < ranks[i].size(); ++e) {
        try {
          sum += Spearman(ranks[i][e], ranks[j][e]);
          ++defined;
        } catch (const UndefinedCorrelation&) {
          ++undefined;
        }
      }
      const double mean = defined == 0
                              ? std::numeric_limits<double>::quiet_NaN()
                              : sum / static_cast<double>(defined);
      m.values[i][j] = m.values[j][i] = mean;
      m.undefined[i][j] = m.undefined[j][i] = undefined;
    }
  }
  return m;
}

RankMatrix MatrixDifference(const RankMatrix& m1, const RankMatrix& m2) {
  if (m1.labels != m2.labels) {
    throw InvalidArgument("rank matrices have different axis labels");
  }
  RankMatrix d = m1;
  for (size_t i = 0; i < d.size(); ++i) {
    for (size_t j = 0; j < d.size(); ++j) {
      d.values[i][j] = i == j ? 0.0 : m1.values[i][j] - m2.values[i][j];
      d.undefined[i][j] = m1.undefined[i][j] + m2.undefined[i][j];
    }
  }
  return d;
}

}  // namespace faithbench
