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

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "faithbench/errors.h"
#include "faithbench/model.h"
#include "testing/fixtures.h"

namespace faithbench {
namespace {

std::vector<double> Ramp(size_t n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

TEST(OodThresholdTest, NeedsFiftyOriginals) {
  EXPECT_THROW(CalibrateThreshold(Ramp(49), 99.0, "p"), CalibrationError);
  const OodThreshold t = CalibrateThreshold(Ramp(50), 99.0, "p");
  EXPECT_EQ(t.calibration_size, 50u);
  EXPECT_EQ(t.predictor_id, "p");
  EXPECT_NEAR(t.threshold, 49.51, 1e-12);
}

TEST(OodThresholdTest, MonotoneInPercentile) {
  std::vector<double> nlls;
  for (size_t i = 0; i < 120; ++i) nlls.push_back(std::sin(0.7 * i) + 3.0);
  double prev = -1.0;
  for (double p = 50.0; p <= 100.0; p += 2.5) {
    const double t = CalibrateThreshold(nlls, p, "p").threshold;
    EXPECT_GE(t, prev) << p;
    prev = t;
  }
}

TEST(OodPercentageTest, CountsStrictlyAbove) {
  OodThreshold t;
  t.threshold = 2.0;
  const std::vector<double> nlls{1.0, 2.0, 2.0000001, 5.0};
  EXPECT_DOUBLE_EQ(OodPercentage(nlls, t), 0.5);
  EXPECT_EQ(OodPercentage(std::vector<double>{}, t), 0.0);
}

TEST(OodPercentageTest, CalibrationSetItselfIsMostlyInDistribution) {
  const std::vector<double> nlls = Ramp(200);
  const OodThreshold t = CalibrateThreshold(nlls, 99.0, "p");
  EXPECT_DOUBLE_EQ(OodPercentage(nlls, t), 2.0 / 200.0);
}

TEST(OodPercentageTest, ModelOverloadUsesSequenceNll) {
  const Vocabulary vocab = testing::SmallVocab();
  const LmModel model =
      LmModel::Create(testing::TinyConfig(vocab.size()), 4);
  std::vector<TokenSequence> seqs;
  std::vector<double> nlls;
  for (uint64_t s = 0; s < 60; ++s) {
    seqs.push_back(TokenSequence::FromIds(testing::RandomWords(vocab, 6, s)));
    nlls.push_back(SequenceNll(model, seqs.back()));
  }
  const OodThreshold a = CalibrateThreshold(model, seqs, 90.0, "p");
  const OodThreshold b = CalibrateThreshold(nlls, 90.0, "p");
  EXPECT_EQ(a.threshold, b.threshold);
  EXPECT_EQ(OodPercentage(model, seqs, a), OodPercentage(nlls, b));
}

TEST(CorrelationMatrixTest, AveragesDefinedExamples) {
  const std::vector<std::string> labels{"a", "b", "c"};
  // Two examples, three methods each.
  const std::vector<std::vector<std::vector<double>>> ranks{
      {{1, 2, 3}, {1, 2, 3}},
      {{1, 2, 3}, {3, 2, 1}},
      {{2, 2, 2}, {1, 3, 2}},
  };
  const RankMatrix m = CorrelationMatrix(labels, ranks);
  ASSERT_EQ(m.size(), 3u);
  for (size_t i = 0; i < 3; ++i) EXPECT_EQ(m.at(i, i), 1.0);
  EXPECT_DOUBLE_EQ(m.at(0, 1), 0.0);
  EXPECT_EQ(m.undefined[0][1], 0u);
  // Example 0 is constant under c and drops out.
  EXPECT_DOUBLE_EQ(m.at(0, 2), 0.5);
  EXPECT_EQ(m.undefined[0][2], 1u);
  EXPECT_DOUBLE_EQ(m.at(1, 2), -0.5);
  EXPECT_EQ(m.at(0, 2), m.at(2, 0));
}

TEST(CorrelationMatrixTest, NanWhenNeverDefined) {
  const std::vector<std::string> labels{"a", "b"};
  const std::vector<std::vector<std::vector<double>>> ranks{
      {{1, 1, 1}}, {{1, 2, 3}}};
  const RankMatrix m = CorrelationMatrix(labels, ranks);
  EXPECT_TRUE(std::isnan(m.at(0, 1)));
  EXPECT_EQ(m.undefined[1][0], 1u);
}

TEST(CorrelationMatrixTest, RejectsMismatchedInputs) {
  const std::vector<std::string> labels{"a", "b"};
  const std::vector<std::vector<std::vector<double>>> one{{{1, 2}}};
  EXPECT_THROW(CorrelationMatrix(labels, one), InvalidArgument);
  const std::vector<std::vector<std::vector<double>>> ragged{
      {{1, 2}}, {{1, 2}, {2, 1}}};
  EXPECT_THROW(CorrelationMatrix(labels, ragged), InvalidArgument);
}

TEST(MatrixDifferenceTest, ElementwiseWithZeroDiagonal) {
  RankMatrix m1, m2;
  m1.labels = m2.labels = {"a", "b"};
  m1.values = {{1.0, 0.75}, {0.75, 1.0}};
  m2.values = {{1.0, 0.25}, {0.25, 1.0}};
  m1.undefined = {{0, 2}, {2, 0}};
  m2.undefined = {{0, 1}, {1, 0}};
  const RankMatrix d = MatrixDifference(m1, m2);
  EXPECT_EQ(d.at(0, 0), 0.0);
  EXPECT_EQ(d.at(0, 1), 0.5);
  EXPECT_EQ(d.at(1, 0), 0.5);
  EXPECT_EQ(d.undefined[0][1], 3u);
  m2.labels = {"a", "c"};
  EXPECT_THROW(MatrixDifference(m1, m2), InvalidArgument);
}

}  // namespace
}  // namespace faithbench
