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

#include "faithbench/protocol.h"

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "faithbench/errors.h"
#include "testing/fixtures.h"

namespace faithbench {
namespace {

using testing::SmallVocab;
using testing::TinyConfig;

// One-dimensional embeddings: w1 votes positive, w2 votes negative and
// everything else is neutral. Ties resolve to "negative" (lower id).
LinearProbe MarkerProbe(const Vocabulary& v, double negative_weight = -1.0) {
  Tensor embedding = Tensor::Zeros(v.size(), 1);
  embedding.at(static_cast<size_t>(v.Id("w1")), 0) = 1.0;
  embedding.at(static_cast<size_t>(v.Id("w2")), 0) = -1.0;
  Tensor weights = Tensor::Zeros(1, v.size());
  weights.at(0, static_cast<size_t>(v.LabelId("positive"))) = 1.0;
  weights.at(0, static_cast<size_t>(v.LabelId("negative"))) = negative_weight;
  return LinearProbe(embedding, weights, Tensor::Zeros(1, v.size()),
                     LinearProbe::Pooling::kSum);
}

// Replaces the plan with fixed output, optionally reporting incompleteness.
class FixedReplacer final : public Replacer {
 public:
  FixedReplacer(TokenSequence edited, bool complete)
      : edited_(std::move(edited)), complete_(complete) {}
  ReplacementStrategy strategy() const override {
    return {StrategyKind::kEditor, "fixed"};
  }
  EditOutcome Replace(const TokenSequence&, std::span<const size_t>,
                      const ContrastiveDecision&) const override {
    EditOutcome out;
    out.edited = edited_;
    out.complete = complete_;
    if (!complete_) out.error = "generation hit the length cap";
    return out;
  }

 private:
  TokenSequence edited_;
  bool complete_;
};

class ProtocolTest : public ::testing::Test {
 protected:
  Vocabulary vocab_ = SmallVocab();
  LinearProbe probe_ = MarkerProbe(vocab_);
  Predictor predictor_{probe_, vocab_, nullptr};
  int pos_ = vocab_.LabelId("positive");
  int neg_ = vocab_.LabelId("negative");

  TokenSequence Text(std::initializer_list<const char*> words) const {
    std::vector<int> ids;
    for (const char* w : words) ids.push_back(vocab_.Id(w));
    return TokenSequence::FromIds(ids);
  }
  AttributionResult Scores(std::vector<double> scores) const {
    AttributionResult r;
    r.method = Method::kGradNorm1;
    r.scores = std::move(scores);
    r.decision = {pos_, neg_};
    return r;
  }
};

TEST(EscalationScheduleTest, Validation) {
  EXPECT_NO_THROW(EscalationSchedule{}.Validate());
  EXPECT_EQ(EscalationSchedule{}.max_level(), 0.5);
  EXPECT_THROW((EscalationSchedule{{0.2, 0.1}}.Validate()), InvalidArgument);
  EXPECT_THROW((EscalationSchedule{{0.1, 0.1}}.Validate()), InvalidArgument);
  EXPECT_THROW((EscalationSchedule{{0.0, 0.1}}.Validate()), InvalidArgument);
  EXPECT_THROW((EscalationSchedule{{0.1, 0.6}}.Validate()), InvalidArgument);
  EXPECT_THROW((EscalationSchedule{{}}.Validate()), InvalidArgument);
}

TEST_F(ProtocolTest, EditAndClassifyDetectsFlip) {
  const TokenSequence text = Text({"w3", "w1", "w4", "w5"});
  const BaselineReplacer unk(StrategyKind::kUnk);
  const std::vector<size_t> marker{1}, other{0};
  const EditOutcome flipped =
      EditAndClassify(predictor_, unk, text, marker, {pos_, neg_});
  EXPECT_TRUE(flipped.flipped);
  EXPECT_TRUE(flipped.flipped_to_foil);
  EXPECT_EQ(flipped.predicted, neg_);
  EXPECT_FALSE(flipped.nll.has_value());
  const EditOutcome kept =
      EditAndClassify(predictor_, unk, text, other, {pos_, neg_});
  EXPECT_FALSE(kept.flipped);
  EXPECT_EQ(kept.predicted, pos_);
}

TEST_F(ProtocolTest, IncompleteEditNeverCountsAsFlip) {
  const TokenSequence text = Text({"w3", "w1", "w4"});
  const FixedReplacer broken(Text({"w2", "w2", "w2"}), false);
  const std::vector<size_t> plan{1};
  const EditOutcome out =
      EditAndClassify(predictor_, broken, text, plan, {pos_, neg_});
  EXPECT_EQ(out.predicted, neg_);
  EXPECT_FALSE(out.flipped);
  EXPECT_FALSE(out.error.empty());
}

TEST_F(ProtocolTest, NllIsScoredWhenRequested) {
  const LmModel lm = LmModel::Create(TinyConfig(vocab_.size()), 1);
  const Predictor scored{probe_, vocab_, &lm};
  const TokenSequence text = Text({"w3", "w1", "w4"});
  const BaselineReplacer mask(StrategyKind::kMask);
  const std::vector<size_t> plan{0};
  const EditOutcome out = EditAndClassify(scored, mask, text, plan, {pos_, neg_});
  ASSERT_TRUE(out.nll.has_value());
  EXPECT_DOUBLE_EQ(*out.nll, SequenceNll(lm, WithSeparator(out.edited)));
}

TEST_F(ProtocolTest, SweepNestsPlansAndStopsAtFirstFlip) {
  const TokenSequence text =
      Text({"w3", "w4", "w5", "w1", "w6", "w7", "w8", "w9", "w0", "w3"});
  // The marker ranks third, so it is first masked at level 0.3.
  const AttributionResult a =
      Scores({0.9, 0.8, 0.1, 0.7, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0});
  const BaselineReplacer unk(StrategyKind::kUnk);
  const EscalationSchedule schedule;
  const auto full = Sweep(predictor_, unk, text, a, schedule, false);
  ASSERT_EQ(full.size(), 5u);
  for (size_t l = 1; l < full.size(); ++l) {
    const auto& prev = full[l - 1].positions;
    EXPECT_TRUE(std::equal(prev.begin(), prev.end(), full[l].positions.begin()));
  }
  // The separator carries the top score but is never maskable.
  EXPECT_EQ(full[0].positions, (std::vector<size_t>{0}));
  EXPECT_FALSE(full[1].outcome.flipped);
  EXPECT_TRUE(full[2].outcome.flipped);

  const auto early = Sweep(predictor_, unk, text, a, schedule, true);
  ASSERT_EQ(early.size(), 3u);
  const EvalRecord r = RecordFromSweep(4, a, "unk", full, schedule);
  EXPECT_EQ(r.min_flip_level, 0.3);
  EXPECT_FALSE(r.censored);
  EXPECT_EQ(r.levels.size(), 3u);
  EXPECT_EQ(r.example_id, 4u);
  EXPECT_DOUBLE_EQ(r.MaskLevel(), 0.3);
}

TEST_F(ProtocolTest, NoFlipIsCensoredAtMaxLevel) {
  const TokenSequence text = Text({"w3", "w1", "w4"});
  const FixedReplacer same(text, true);
  const EscalationSchedule schedule;
  const auto sweep = Sweep(predictor_, same, text,
                           Scores({1.0, 0.0, 0.5, 0.0}), schedule, true);
  const EvalRecord r = RecordFromSweep(0, Scores({}), "fixed", sweep, schedule);
  EXPECT_TRUE(r.censored);
  EXPECT_FALSE(r.min_flip_level.has_value());
  EXPECT_EQ(r.MaskLevel(), 0.5);
  EXPECT_EQ(r.levels.size(), 5u);
}

// Early-exit evaluation equals the record implied by a full sweep.
TEST_F(ProtocolTest, EvaluateExampleMatchesFullSweep) {
  const EscalationSchedule schedule;
  AttributionOptions options;
  options.random_seed = 3;
  options.oracle_tokens = {vocab_.Id("w1")};
  const std::vector<TokenSequence> texts{
      Text({"w3", "w1", "w4", "w5", "w6", "w7"}),
      Text({"w9", "w8", "w7", "w6", "w5", "w4", "w3", "w1"}),
      Text({"w2", "w1", "w1", "w5"})};
  for (StrategyKind kind : {StrategyKind::kErase, StrategyKind::kUnk,
                            StrategyKind::kMask, StrategyKind::kAttZero}) {
    const BaselineReplacer replacer(kind);
    for (size_t e = 0; e < texts.size(); ++e) {
      for (Method m : {Method::kGradTimesInput, Method::kErasure,
                       Method::kRandom, Method::kOracle}) {
        const EvalRecord direct = EvaluateExample(
            predictor_, m, options, replacer, texts[e], schedule, e);
        const TokenSequence prompt = WithSeparator(texts[e]);
        const Prediction p = Predict(probe_, vocab_.label_ids(), prompt);
        const AttributionResult a = Attribute(
            m, probe_, prompt, p.decision, ExampleOptions(options, e));
        const auto sweep =
            Sweep(predictor_, replacer, texts[e], a, schedule, false);
        const EvalRecord via = RecordFromSweep(
            e, a, replacer.strategy().Name(), sweep, schedule);
        EXPECT_EQ(direct.min_flip_level, via.min_flip_level);
        EXPECT_EQ(direct.scores, via.scores);
        EXPECT_EQ(direct.levels.size(), via.levels.size());
      }
    }
  }
}

TEST_F(ProtocolTest, OracleFlipsAtFirstLevel) {
  AttributionOptions options;
  options.oracle_tokens = {vocab_.Id("w1")};
  const BaselineReplacer unk(StrategyKind::kUnk);
  const EvalRecord r = EvaluateExample(
      predictor_, Method::kOracle, options, unk,
      Text({"w3", "w4", "w5", "w1", "w6", "w7", "w8"}), EscalationSchedule{});
  EXPECT_EQ(r.min_flip_level, 0.1);
}

TEST_F(ProtocolTest, ZeroNormAttributionSkipsExample) {
  // Without a negative weight the foil's IG component is identically zero.
  const LinearProbe probe = MarkerProbe(vocab_, 0.0);
  const Predictor predictor{probe, vocab_, nullptr};
  const BaselineReplacer unk(StrategyKind::kUnk);
  const EvalRecord r =
      EvaluateExample(predictor, Method::kIntegratedGradients, {}, unk,
                      Text({"w3", "w1", "w4"}), EscalationSchedule{}, 7);
  EXPECT_TRUE(r.skipped());
  EXPECT_EQ(r.example_id, 7u);
  EXPECT_EQ(r.strategy, "unk");
  EXPECT_TRUE(r.levels.empty());
}

TEST_F(ProtocolTest, ExampleOptionsVaryByExample) {
  AttributionOptions options;
  options.random_seed = 1;
  options.shap.seed = 2;
  const AttributionOptions a = ExampleOptions(options, 0);
  const AttributionOptions b = ExampleOptions(options, 1);
  EXPECT_NE(a.random_seed, b.random_seed);
  EXPECT_NE(a.shap.seed, b.shap.seed);
  EXPECT_EQ(ExampleOptions(options, 1).random_seed, b.random_seed);
}

TEST_F(ProtocolTest, EditorReplacerReportsCapFailures) {
  const LmModel editor = LmModel::Create(TinyConfig(vocab_.size()), 2);
  DecodeConfig config;
  config.cap_multiplier = 0.0;
  config.cap_offset = 0;
  const EditorReplacer replacer(editor, vocab_, config, "e1");
  EXPECT_EQ(replacer.strategy().Name(), "editor:e1");
  const std::vector<size_t> plan{1};
  const EditOutcome out =
      replacer.Replace(Text({"w3", "w1", "w4"}), plan, {pos_, neg_});
  EXPECT_FALSE(out.complete);
  EXPECT_EQ(out.error, "generation hit the length cap");

  const LmModel wrong = LmModel::Create(TinyConfig(vocab_.size() + 2), 2);
  EXPECT_THROW(EditorReplacer(wrong, vocab_, {}, "x"), InvalidArgument);
  EXPECT_THROW(BaselineReplacer(StrategyKind::kEditor), InvalidArgument);
}

EvalRecord Record(Method m, std::optional<double> level) {
  EvalRecord r;
  r.method = m;
  r.strategy = "unk";
  r.min_flip_level = level;
  r.censored = !level.has_value();
  return r;
}

TEST(MetricsTest, MeanMaskPercentageAndFlipRate) {
  const std::vector<EvalRecord> records{Record(Method::kRandom, 0.1),
                                        Record(Method::kRandom, 0.3),
                                        Record(Method::kRandom, std::nullopt)};
  EXPECT_DOUBLE_EQ(MeanMaskPercentage(records), (0.1 + 0.3 + 0.5) / 3.0);
  EXPECT_DOUBLE_EQ(FlipRate(records), 2.0 / 3.0);
  EXPECT_THROW(MeanMaskPercentage(std::vector<EvalRecord>{}), InvalidArgument);
  std::vector<EvalRecord> mixed = records;
  mixed.push_back(Record(Method::kErasure, 0.1));
  EXPECT_THROW(MeanMaskPercentage(mixed), InvalidArgument);
}

TEST(MetricsTest, CensoredRecordsShareTheWorstRank) {
  const std::vector<EvalRecord> records{
      Record(Method::kGradNorm1, 0.2), Record(Method::kGradNorm2, std::nullopt),
      Record(Method::kErasure, 0.1), Record(Method::kRandom, std::nullopt),
      Record(Method::kIntegratedGradients, 0.2)};
  EXPECT_EQ(RankMethodsPerExample(records),
            (std::vector<double>{2.5, 4.5, 1.0, 4.5, 2.5}));
}

}  // namespace
}  // namespace faithbench
