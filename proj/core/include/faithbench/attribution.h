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

// Contrastive token attribution: which input tokens make the model prefer
// the target label over the foil.

#ifndef FAITHBENCH_ATTRIBUTION_H_
#define FAITHBENCH_ATTRIBUTION_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "faithbench/model.h"
#include "faithbench/tensor.h"
#include "faithbench/vocabulary.h"

namespace faithbench {

enum class Method {
  kGradNorm1,
  kGradNorm2,
  kGradTimesInput,
  kErasure,
  kKernelShap,
  kIntegratedGradients,
  kRandom,
  kOracle,  // ground truth for the planted-token task
};

std::string_view MethodName(Method method);
Method ParseMethod(std::string_view name);

struct AttributionResult {
  Method method = Method::kRandom;
  std::vector<double> scores;  // one per input position
  ContrastiveDecision decision;
};

struct IgConfig {
  size_t steps = 5;
  // Per-position baseline embedding; empty means the zero vector.
  std::vector<double> baseline;
};

struct ShapConfig {
  // Coalitions to evaluate; 0 selects 2^n for n <= 12 (exhaustive) and
  // 4n + 100 otherwise.
  size_t samples = 0;
  uint64_t seed = 0;
};

struct AttributionOptions {
  ScoreKind score = ScoreKind::kLogit;
  IgConfig ig;
  ShapConfig shap;
  uint64_t random_seed = 0;
  std::vector<int> oracle_tokens;
};

// d/dx_i (q(y_t|x) - q(y_f|x)) for every position: [n, width].
Tensor ContrastiveGradient(const Scorer& model, const TokenSequence& seq,
                           const ContrastiveDecision& decision,
                           ScoreKind kind = ScoreKind::kLogit);

// S_i = ||g^C(x_i)||_p for p in {1, 2}.
AttributionResult GradNorm(const Scorer& model, const TokenSequence& seq,
                           const ContrastiveDecision& decision, int p,
                           ScoreKind kind = ScoreKind::kLogit);

// S_i = g^C(x_i) . x_i
AttributionResult GradTimesInput(const Scorer& model, const TokenSequence& seq,
                                 const ContrastiveDecision& decision,
                                 ScoreKind kind = ScoreKind::kLogit);

// S_i = (q_t(x) - q_t(x with x_i = 0)) - (q_f(x) - q_f(x with x_i = 0)).
// Exactly n + 1 forward passes.
AttributionResult Erasure(const Scorer& model, const TokenSequence& seq,
                          const ContrastiveDecision& decision,
                          ScoreKind kind = ScoreKind::kLogit);

// Shapley-kernel regression coefficients for target and foil, fitted on
// one shared coalition sample. Absent tokens have zero embeddings.
struct ShapComponents {
  std::vector<double> target;
  std::vector<double> foil;
  size_t coalitions = 0;  // evaluated, including the empty and full ones
  bool exhaustive = false;
};

ShapComponents KernelShapComponents(const Scorer& model,
                                    const TokenSequence& seq,
                                    const ContrastiveDecision& decision,
                                    const ShapConfig& config,
                                    ScoreKind kind = ScoreKind::kLogit);

// Normalised target minus normalised foil coefficients.
AttributionResult KernelShap(const Scorer& model, const TokenSequence& seq,
                             const ContrastiveDecision& decision,
                             const ShapConfig& config,
                             ScoreKind kind = ScoreKind::kLogit);

// Right Riemann sum of the path integral from the baseline, per label.
struct IgComponents {
  std::vector<double> target;
  std::vector<double> foil;
};

IgComponents IntegratedGradientsComponents(const Scorer& model,
                                           const TokenSequence& seq,
                                           const ContrastiveDecision& decision,
                                           const IgConfig& config,
                                           ScoreKind kind = ScoreKind::kLogit);

AttributionResult IntegratedGradients(const Scorer& model,
                                      const TokenSequence& seq,
                                      const ContrastiveDecision& decision,
                                      const IgConfig& config,
                                      ScoreKind kind = ScoreKind::kLogit);

// I.i.d. uniform scores in [0, 1), reproducible per seed.
AttributionResult RandomAttribution(const TokenSequence& seq, uint64_t seed);

// 1 at positions holding one of `marker_tokens`, 0 elsewhere.
AttributionResult OracleAttribution(const TokenSequence& seq,
                                    const ContrastiveDecision& decision,
                                    std::span<const int> marker_tokens);

AttributionResult Attribute(Method method, const Scorer& model,
                            const TokenSequence& seq,
                            const ContrastiveDecision& decision,
                            const AttributionOptions& options);

// t / ||t||_2 - f / ||f||_2. Throws NormalizationError on a zero norm.
std::vector<double> NormalizeThenSubtract(std::span<const double> target,
                                          std::span<const double> foil);

// Positions selected for replacement, highest score first.
struct MaskPlan {
  double fraction = 0.0;
  std::vector<size_t> positions;

  std::vector<size_t> Sorted() const;
};

// ceil(fraction * n), robust to representation error (0.3 * 10 -> 3).
size_t CeilCount(double fraction, size_t n);

// k = CeilCount(fraction, |maskable|) maskable positions with the highest
// scores; ties go to the earlier position.
MaskPlan SelectTopTokens(const AttributionResult& result, double fraction,
                         std::span<const size_t> maskable);

// Positions of non-special tokens.
std::vector<size_t> MaskablePositions(const Vocabulary& vocab,
                                      const TokenSequence& seq);

}  // namespace faithbench

#endif  // FAITHBENCH_ATTRIBUTION_H_
