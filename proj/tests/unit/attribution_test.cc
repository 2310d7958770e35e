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

#include "faithbench/attribution.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "faithbench/errors.h"
#include "testing/fixtures.h"

namespace faithbench {
namespace {

using testing::FirstTwoLabels;
using testing::RandomWords;
using testing::SmallVocab;
using testing::TinyConfig;

// Final-position logit of `label` with the rows outside `present` zeroed.
double MaskedLogit(const Scorer& model, const TokenSequence& seq,
                   const std::vector<char>& present, int label) {
  Tensor x = model.EmbedTokens(seq.ids);
  for (size_t i = 0; i < seq.size(); ++i) {
    if (!present[i]) {
      for (double& v : x.Row(i)) v = 0.0;
    }
  }
  Tape tape;
  Var logits = model.FinalLogits(tape, tape.Constant(x), seq.attention);
  return logits.value().at(0, static_cast<size_t>(label));
}

// Exact Shapley values by enumerating all 2^n coalitions.
std::vector<double> BruteForceShapley(const Scorer& model,
                                      const TokenSequence& seq, int label) {
  const size_t n = seq.size();
  std::vector<double> value(size_t{1} << n);
  for (size_t mask = 0; mask < value.size(); ++mask) {
    std::vector<char> present(n);
    for (size_t i = 0; i < n; ++i) present[i] = (mask >> i) & 1;
    value[mask] = MaskedLogit(model, seq, present, label);
  }
  std::vector<double> factorial(n + 1, 1.0);
  for (size_t k = 1; k <= n; ++k) factorial[k] = factorial[k - 1] * k;
  std::vector<double> phi(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t mask = 0; mask < value.size(); ++mask) {
      if ((mask >> i) & 1) continue;
      const size_t s = static_cast<size_t>(std::popcount(mask));
      const double w = factorial[s] * factorial[n - s - 1] / factorial[n];
      phi[i] += w * (value[mask | (size_t{1} << i)] - value[mask]);
    }
  }
  return phi;
}

class AttributionTest : public ::testing::Test {
 protected:
  Vocabulary vocab_ = SmallVocab();
  LmModel model_ = LmModel::Create(TinyConfig(vocab_.size(), 8, 2, 2), 17);
  ContrastiveDecision decision_ = FirstTwoLabels(vocab_);

  TokenSequence Prompt(size_t words, uint64_t seed) const {
    return WithSeparator(TokenSequence::FromIds(RandomWords(vocab_, words, seed)));
  }
};

TEST(MethodTest, NamesRoundTrip) {
  for (Method m : {Method::kGradNorm1, Method::kGradNorm2,
                   Method::kGradTimesInput, Method::kErasure,
                   Method::kKernelShap, Method::kIntegratedGradients,
                   Method::kRandom, Method::kOracle}) {
    EXPECT_EQ(ParseMethod(MethodName(m)), m);
  }
  EXPECT_THROW(ParseMethod("foo"), InvalidArgument);
}

TEST_F(AttributionTest, GradNormAndGradTimesInputFollowTheGradient) {
  const TokenSequence seq = Prompt(6, 1);
  const Tensor g = ContrastiveGradient(model_, seq, decision_);
  const Tensor x = model_.EmbedTokens(seq.ids);
  const auto l1 = GradNorm(model_, seq, decision_, 1).scores;
  const auto l2 = GradNorm(model_, seq, decision_, 2).scores;
  const auto gi = GradTimesInput(model_, seq, decision_).scores;
  for (size_t i = 0; i < seq.size(); ++i) {
    double a = 0.0, b = 0.0, c = 0.0;
    for (size_t k = 0; k < g.cols(); ++k) {
      a += std::abs(g.at(i, k));
      b += g.at(i, k) * g.at(i, k);
      c += g.at(i, k) * x.at(i, k);
    }
    EXPECT_NEAR(l1[i], a, 1e-12);
    EXPECT_NEAR(l2[i], std::sqrt(b), 1e-12);
    EXPECT_NEAR(gi[i], c, 1e-12);
  }
  EXPECT_THROW(GradNorm(model_, seq, decision_, 3), InvalidArgument);
}

TEST_F(AttributionTest, RejectsInvalidDecisions) {
  const TokenSequence seq = Prompt(4, 2);
  EXPECT_THROW(GradNorm(model_, seq, {6, 6}, 1), InvalidArgument);
  EXPECT_THROW(Erasure(model_, seq, {6, 999}), InvalidArgument);
}

// Re-derives erasure from two explicit forward passes per token.
TEST_F(AttributionTest, ErasureMatchesExplicitForwardPasses) {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    const TokenSequence seq = Prompt(7, seed);
    const auto scores = Erasure(model_, seq, decision_).scores;
    const std::vector<char> all(seq.size(), 1);
    const double ft = MaskedLogit(model_, seq, all, decision_.target);
    const double ff = MaskedLogit(model_, seq, all, decision_.foil);
    for (size_t i = 0; i < seq.size(); ++i) {
      std::vector<char> present = all;
      present[i] = 0;
      const double et = MaskedLogit(model_, seq, present, decision_.target);
      const double ef = MaskedLogit(model_, seq, present, decision_.foil);
      EXPECT_EQ(scores[i], (ft - et) - (ff - ef)) << "position " << i;
    }
  }
}

TEST_F(AttributionTest, ExhaustiveKernelShapEqualsExactShapley) {
  for (size_t words : {2u, 4u, 7u}) {
    const TokenSequence seq = Prompt(words, words);
    const ShapComponents shap =
        KernelShapComponents(model_, seq, decision_, ShapConfig{});
    EXPECT_TRUE(shap.exhaustive);
    EXPECT_EQ(shap.coalitions, size_t{1} << seq.size());
    const auto exact_t = BruteForceShapley(model_, seq, decision_.target);
    const auto exact_f = BruteForceShapley(model_, seq, decision_.foil);
    for (size_t i = 0; i < seq.size(); ++i) {
      EXPECT_NEAR(shap.target[i], exact_t[i], 1e-6);
      EXPECT_NEAR(shap.foil[i], exact_f[i], 1e-6);
    }
  }
}

TEST_F(AttributionTest, SampledKernelShapIsEfficientAndSeeded) {
  const TokenSequence seq = Prompt(14, 3);
  ShapConfig config;
  config.seed = 4;
  const ShapComponents a = KernelShapComponents(model_, seq, decision_, config);
  const ShapComponents b = KernelShapComponents(model_, seq, decision_, config);
  EXPECT_FALSE(a.exhaustive);
  EXPECT_EQ(a.target, b.target);
  // The full coalition is an equality constraint: coefficients sum to
  // v(full) - v(empty).
  const std::vector<char> all(seq.size(), 1), none(seq.size(), 0);
  const double total = MaskedLogit(model_, seq, all, decision_.target) -
                       MaskedLogit(model_, seq, none, decision_.target);
  EXPECT_NEAR(std::accumulate(a.target.begin(), a.target.end(), 0.0), total,
              1e-9);
}

TEST_F(AttributionTest, KernelShapNeedsTwoTokens) {
  const TokenSequence seq = TokenSequence::FromIds({Vocabulary::kSepId});
  EXPECT_THROW(KernelShap(model_, seq, decision_, ShapConfig{}),
               InvalidArgument);
}

TEST(IntegratedGradientsTest, LinearProbeIsExactForAnyStepCount) {
  const LinearProbe probe =
      LinearProbe::Random(12, 5, 3, LinearProbe::Pooling::kSum, 21);
  const TokenSequence seq = TokenSequence::FromIds({6, 9, 11, 7});
  const ContrastiveDecision d{1, 2};
  const Tensor x = probe.EmbedTokens(seq.ids);
  for (size_t m : {1u, 2u, 7u, 50u}) {
    const IgComponents ig =
        IntegratedGradientsComponents(probe, seq, d, IgConfig{m, {}});
    for (size_t i = 0; i < seq.size(); ++i) {
      double wt = 0.0, wf = 0.0;
      for (size_t c = 0; c < x.cols(); ++c) {
        wt += probe.weights().at(c, 1) * x.at(i, c);
        wf += probe.weights().at(c, 2) * x.at(i, c);
      }
      EXPECT_NEAR(ig.target[i], wt, 1e-10);
      EXPECT_NEAR(ig.foil[i], wf, 1e-10);
    }
  }
}

TEST_F(AttributionTest, IntegratedGradientsCompleteness) {
  const TokenSequence seq = Prompt(6, 5);
  const IgComponents ig = IntegratedGradientsComponents(
      model_, seq, decision_, IgConfig{200, {}});
  const std::vector<char> all(seq.size(), 1), none(seq.size(), 0);
  for (auto [parts, label] : {std::pair{&ig.target, decision_.target},
                              std::pair{&ig.foil, decision_.foil}}) {
    const double delta = MaskedLogit(model_, seq, all, label) -
                         MaskedLogit(model_, seq, none, label);
    ASSERT_GT(std::abs(delta), 1e-3);
    const double sum = std::accumulate(parts->begin(), parts->end(), 0.0);
    EXPECT_LT(std::abs(sum - delta), 0.02 * std::abs(delta));
  }
}

TEST_F(AttributionTest, IntegratedGradientsBaselineWidthIsChecked) {
  const TokenSequence seq = Prompt(3, 6);
  EXPECT_THROW(
      IntegratedGradientsComponents(model_, seq, decision_, IgConfig{5, {1.0}}),
      InvalidArgument);
  EXPECT_THROW(
      IntegratedGradientsComponents(model_, seq, decision_, IgConfig{0, {}}),
      InvalidArgument);
}

TEST(NormalizeThenSubtractTest, UnitNormsAndZeroNormError) {
  const std::vector<double> t{3.0, 4.0}, f{0.0, 2.0};
  const auto out = NormalizeThenSubtract(t, f);
  EXPECT_DOUBLE_EQ(out[0], 0.6);
  EXPECT_DOUBLE_EQ(out[1], 0.8 - 1.0);
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_THROW(NormalizeThenSubtract(zero, f), NormalizationError);
  EXPECT_THROW(NormalizeThenSubtract(t, zero), NormalizationError);
  EXPECT_THROW(NormalizeThenSubtract(t, std::vector<double>{1.0}),
               InvalidArgument);
}

TEST(RandomAttributionTest, ReproduciblePerSeed) {
  const TokenSequence seq = TokenSequence::FromIds({6, 7, 8, 9});
  const auto a = RandomAttribution(seq, 5).scores;
  EXPECT_EQ(a, RandomAttribution(seq, 5).scores);
  EXPECT_NE(a, RandomAttribution(seq, 6).scores);
  for (double v : a) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(OracleAttributionTest, MarksMarkerPositions) {
  const TokenSequence seq = TokenSequence::FromIds({8, 9, 10, 9});
  const std::vector<int> markers{9};
  EXPECT_EQ(OracleAttribution(seq, {6, 7}, markers).scores,
            (std::vector<double>{0, 1, 0, 1}));
}

TEST(CeilCountTest, RobustToRepresentationError) {
  EXPECT_EQ(CeilCount(0.3, 10), 3u);
  EXPECT_EQ(CeilCount(0.1, 10), 1u);
  EXPECT_EQ(CeilCount(0.1, 11), 2u);
  EXPECT_EQ(CeilCount(0.5, 9), 5u);
}

TEST(SelectTopTokensTest, HighestFirstTiesToEarlierPosition) {
  AttributionResult r;
  r.scores = {0.5, 0.9, 0.5, 0.1, 0.9, 0.0};
  const std::vector<size_t> maskable{0, 1, 2, 3, 4};
  const MaskPlan plan = SelectTopTokens(r, 0.6, maskable);
  EXPECT_EQ(plan.positions, (std::vector<size_t>{1, 4, 0}));
  EXPECT_EQ(plan.Sorted(), (std::vector<size_t>{0, 1, 4}));
}

TEST(SelectTopTokensTest, OnlyMaskablePositionsAndValidation) {
  AttributionResult r;
  r.scores = {9.0, 1.0, 2.0, 3.0};
  const std::vector<size_t> maskable{1, 2, 3};
  EXPECT_EQ(SelectTopTokens(r, 0.1, maskable).positions,
            (std::vector<size_t>{3}));
  EXPECT_THROW(SelectTopTokens(r, 0.0, maskable), InvalidArgument);
  EXPECT_THROW(SelectTopTokens(r, 1.5, maskable), InvalidArgument);
  EXPECT_THROW(SelectTopTokens(r, 0.5, {}), InvalidArgument);
  const std::vector<size_t> outside{7};
  EXPECT_THROW(SelectTopTokens(r, 0.5, outside), InvalidArgument);
}

// Plans at increasing fractions are nested prefixes of one another.
TEST(SelectTopTokensTest, PlansAreNested) {
  AttributionResult r = RandomAttribution(
      TokenSequence::FromIds(std::vector<int>(23, 8)), 3);
  r.scores[4] = r.scores[9];  // force a tie
  std::vector<size_t> maskable(23);
  std::iota(maskable.begin(), maskable.end(), 0);
  std::vector<size_t> previous;
  for (double f : {0.1, 0.2, 0.3, 0.4, 0.5, 1.0}) {
    const MaskPlan plan = SelectTopTokens(r, f, maskable);
    ASSERT_GE(plan.positions.size(), previous.size());
    EXPECT_TRUE(std::equal(previous.begin(), previous.end(),
                           plan.positions.begin()));
    previous = plan.positions;
  }
}

TEST(MaskablePositionsTest, SkipsSpecialsButKeepsUnk) {
  const Vocabulary v = SmallVocab();
  const TokenSequence seq = TokenSequence::FromIds(
      {v.Id("w1"), Vocabulary::kUnkId, Vocabulary::kMaskId, v.Id("w2"),
       Vocabulary::kSepId});
  EXPECT_EQ(MaskablePositions(v, seq), (std::vector<size_t>{0, 1, 3}));
}

TEST_F(AttributionTest, AttributeDispatchesEveryMethod) {
  const TokenSequence seq = Prompt(5, 8);
  AttributionOptions options;
  options.oracle_tokens = {vocab_.Id("w3")};
  for (Method m : {Method::kGradNorm1, Method::kGradNorm2,
                   Method::kGradTimesInput, Method::kErasure,
                   Method::kKernelShap, Method::kIntegratedGradients,
                   Method::kRandom, Method::kOracle}) {
    const AttributionResult r = Attribute(m, model_, seq, decision_, options);
    EXPECT_EQ(r.method, m);
    EXPECT_EQ(r.scores.size(), seq.size());
    EXPECT_EQ(r.decision, decision_);
  }
}

}  // namespace
}  // namespace faithbench
