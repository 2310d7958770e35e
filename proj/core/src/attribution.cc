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
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "faithbench/errors.h"
#include "faithbench/random.h"

namespace faithbench {
namespace {

double ScoreFromLogits(std::span<const double> logits, int label,
                       ScoreKind kind) {
  const double logit = logits[static_cast<size_t>(label)];
  if (kind == ScoreKind::kLogit) return logit;
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - max);
  return logit - max - std::log(sum);
}

struct LabelValues {
  double target;
  double foil;
};

LabelValues Evaluate(const Scorer& model, const Tensor& embeddings,
                     std::span<const int> attention,
                     const ContrastiveDecision& decision, ScoreKind kind) {
  Tape tape;
  Var x = tape.Constant(embeddings);
  Var logits = model.FinalLogits(tape, x, attention);
  auto values = logits.value().data();
  return {ScoreFromLogits(values, decision.target, kind),
          ScoreFromLogits(values, decision.foil, kind)};
}

void CheckInputs(const Scorer& model, const TokenSequence& seq,
                 const ContrastiveDecision& decision) {
  seq.Validate();
  decision.Validate();
  if (seq.empty()) throw InvalidArgument("cannot attribute an empty sequence");
  const auto out = static_cast<int>(model.OutputSize());
  if (decision.target >= out || decision.foil >= out) {
    throw InvalidArgument("decision labels outside the model's outputs");
  }
}

double RowDot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Binomial(size_t n, size_t k) {
  double r = 1.0;
  for (size_t i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

}  // namespace

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kGradNorm1: return "gradnorm1";
    case Method::kGradNorm2: return "gradnorm2";
    case Method::kGradTimesInput: return "gradinp";
    case Method::kErasure: return "erasure";
    case Method::kKernelShap: return "kernelshap";
    case Method::kIntegratedGradients: return "ig";
    case Method::kRandom: return "random";
    case Method::kOracle: return "oracle";
  }
  return "unknown";
}

Method ParseMethod(std::string_view name) {
  for (Method m : {Method::kGradNorm1, Method::kGradNorm2,
                   Method::kGradTimesInput, Method::kErasure,
                   Method::kKernelShap, Method::kIntegratedGradients,
                   Method::kRandom, Method::kOracle}) {
    if (MethodName(m) == name) return m;
  }
  throw InvalidArgument("unknown attribution method '" + std::string(name) +
                        "'");
}

Tensor ContrastiveGradient(const Scorer& model, const TokenSequence& seq,
                           const ContrastiveDecision& decision,
                           ScoreKind kind) {
  CheckInputs(model, seq, decision);
  Tape tape;
  Tensor embeddings = model.EmbedTokens(seq.ids);
  embeddings.set_requires_grad(true);
  Var x = tape.Input(std::move(embeddings));
  Var logits = model.FinalLogits(tape, x, seq.attention);
  Var objective = ops::Sub(LabelScore(logits, decision.target, kind),
                           LabelScore(logits, decision.foil, kind));
  return tape.Backward(objective)[x];
}

AttributionResult GradNorm(const Scorer& model, const TokenSequence& seq,
                           const ContrastiveDecision& decision, int p,
                           ScoreKind kind) {
  if (p != 1 && p != 2) throw InvalidArgument("gradient norm order must be 1 or 2");
  const Tensor grad = ContrastiveGradient(model, seq, decision, kind);
  AttributionResult result{p == 1 ? Method::kGradNorm1 : Method::kGradNorm2,
                           {}, decision};
  for (size_t i = 0; i < grad.rows(); ++i) {
    double s = 0.0;
    for (double g : grad.Row(i)) s += p == 1 ? std::abs(g) : g * g;
    result.scores.push_back(p == 1 ? s : std::sqrt(s));
  }
  return result;
}

AttributionResult GradTimesInput(const Scorer& model, const TokenSequence& seq,
                                 const ContrastiveDecision& decision,
                                 ScoreKind kind) {
  const Tensor grad = ContrastiveGradient(model, seq, decision, kind);
  const Tensor x = model.EmbedTokens(seq.ids);
  AttributionResult result{Method::kGradTimesInput, {}, decision};
  for (size_t i = 0; i < grad.rows(); ++i) {
    result.scores.push_back(RowDot(grad.Row(i), x.Row(i)));
  }
  return result;
}

AttributionResult Erasure(const Scorer& model, const TokenSequence& seq,
                          const ContrastiveDecision& decision,
                          ScoreKind kind) {
  CheckInputs(model, seq, decision);
  const Tensor x = model.EmbedTokens(seq.ids);
  const LabelValues full = Evaluate(model, x, seq.attention, decision, kind);
  AttributionResult result{Method::kErasure, {}, decision};
  Tensor erased = x;
  for (size_t i = 0; i < x.rows(); ++i) {
    std::fill(erased.Row(i).begin(), erased.Row(i).end(), 0.0);
    const LabelValues without =
        Evaluate(model, erased, seq.attention, decision, kind);
    result.scores.push_back((full.target - without.target) -
                            (full.foil - without.foil));
    auto src = x.Row(i);
    std::copy(src.begin(), src.end(), erased.Row(i).begin());
  }
  return result;
}

ShapComponents KernelShapComponents(const Scorer& model,
                                    const TokenSequence& seq,
                                    const ContrastiveDecision& decision,
                                    const ShapConfig& config,
                                    ScoreKind kind) {
  CheckInputs(model, seq, decision);
  const size_t n = seq.size();
  if (n < 2) throw InvalidArgument("KernelSHAP needs at least 2 tokens");
  const Tensor x = model.EmbedTokens(seq.ids);

  auto value = [&](const std::vector<char>& present) {
    Tensor masked = x;
    for (size_t i = 0; i < n; ++i) {
      if (!present[i]) std::fill(masked.Row(i).begin(), masked.Row(i).end(), 0.0);
    }
    return Evaluate(model, masked, seq.attention, decision, kind);
  };

  const LabelValues empty = value(std::vector<char>(n, 0));
  const LabelValues full = value(std::vector<char>(n, 1));

  const bool small = n <= 12;
  size_t budget = config.samples;
  if (budget == 0) budget = small ? (size_t{1} << n) : 4 * n + 100;
  const bool exhaustive = n < 63 && budget >= (size_t{1} << n);

  ShapComponents out;
  out.exhaustive = exhaustive;

  std::mt19937_64 rng(config.seed);
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<std::vector<char>> coalitions;
    if (exhaustive) {
      for (uint64_t mask = 1; mask + 1 < (uint64_t{1} << n); ++mask) {
        std::vector<char> z(n);
        for (size_t i = 0; i < n; ++i) z[i] = (mask >> i) & 1U;
        coalitions.push_back(std::move(z));
      }
    } else {
      const size_t draws = budget > 2 ? budget - 2 : 1;
      while (coalitions.size() < draws) {
        std::vector<char> z(n);
        size_t on = 0;
        for (size_t i = 0; i < n; ++i) {
          z[i] = (rng() >> 63) != 0;
          on += z[i];
        }
        if (on == 0 || on == n) continue;
        coalitions.push_back(std::move(z));
      }
    }

    // The full coalition is an equality constraint: eliminate the last
    // coefficient via sum(phi) = v(full) - v(empty).
    const size_t m = coalitions.size();
    const size_t k = n - 1;
    Eigen::MatrixXd design(m, k);
    Eigen::MatrixXd rhs(m, 2);
    const double span_t = full.target - empty.target;
    const double span_f = full.foil - empty.foil;
    for (size_t r = 0; r < m; ++r) {
      const std::vector<char>& z = coalitions[r];
      const size_t size = static_cast<size_t>(std::count(z.begin(), z.end(), 1));
      const double weight =
          static_cast<double>(n - 1) /
          (Binomial(n, size) * static_cast<double>(size) *
           static_cast<double>(n - size));
      const double root = std::sqrt(weight);
      const double last = z[n - 1];
      for (size_t j = 0; j < k; ++j) design(r, j) = root * (z[j] - last);
      const LabelValues v = value(z);
      rhs(r, 0) = root * (v.target - empty.target - last * span_t);
      rhs(r, 1) = root * (v.foil - empty.foil - last * span_f);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (static_cast<size_t>(qr.rank()) < k) {
      if (exhaustive || attempt == 1) {
        throw SingularSystem("KernelSHAP regression is rank deficient (" +
                             std::to_string(qr.rank()) + " < " +
                             std::to_string(k) + ")");
      }
      continue;
    }
    const Eigen::MatrixXd phi = qr.solve(rhs);
    out.target.assign(n, 0.0);
    out.foil.assign(n, 0.0);
    double sum_t = 0.0, sum_f = 0.0;
    for (size_t j = 0; j < k; ++j) {
      out.target[j] = phi(j, 0);
      out.foil[j] = phi(j, 1);
      sum_t += phi(j, 0);
      sum_f += phi(j, 1);
    }
    out.target[k] = span_t - sum_t;
    out.foil[k] = span_f - sum_f;
    out.coalitions = m + 2;
    return out;
  }
  throw SingularSystem("KernelSHAP regression is rank deficient");
}

AttributionResult KernelShap(const Scorer& model, const TokenSequence& seq,
                             const ContrastiveDecision& decision,
                             const ShapConfig& config, ScoreKind kind) {
  const ShapComponents parts =
      KernelShapComponents(model, seq, decision, config, kind);
  return {Method::kKernelShap, NormalizeThenSubtract(parts.target, parts.foil),
          decision};
}

IgComponents IntegratedGradientsComponents(const Scorer& model,
                                           const TokenSequence& seq,
                                           const ContrastiveDecision& decision,
                                           const IgConfig& config,
                                           ScoreKind kind) {
  CheckInputs(model, seq, decision);
  if (config.steps < 1) throw InvalidArgument("IG needs at least one step");
  const Tensor x = model.EmbedTokens(seq.ids);
  const size_t n = x.rows(), d = x.cols();
  std::vector<double> baseline = config.baseline;
  if (baseline.empty()) baseline.assign(d, 0.0);
  if (baseline.size() != d) {
    throw InvalidArgument("IG baseline has " + std::to_string(baseline.size()) +
                          " entries for embedding width " + std::to_string(d));
  }

  Tensor grad_t = Tensor::Zeros(n, d);
  Tensor grad_f = Tensor::Zeros(n, d);
  const double m = static_cast<double>(config.steps);
  for (size_t step = 1; step <= config.steps; ++step) {
    const double alpha = static_cast<double>(step) / m;
    Tensor point = Tensor::Zeros(n, d, /*requires_grad=*/true);
    for (size_t i = 0; i < n; ++i) {
      for (size_t c = 0; c < d; ++c) {
        point.at(i, c) = baseline[c] + alpha * (x.at(i, c) - baseline[c]);
      }
    }
    Tape tape;
    Var input = tape.Input(std::move(point));
    Var logits = model.FinalLogits(tape, input, seq.attention);
    const Tensor gt = tape.Backward(LabelScore(logits, decision.target, kind))[input];
    const Tensor gf = tape.Backward(LabelScore(logits, decision.foil, kind))[input];
    for (size_t k = 0; k < gt.size(); ++k) {
      grad_t.data()[k] += gt.data()[k];
      grad_f.data()[k] += gf.data()[k];
    }
  }

  IgComponents out;
  for (size_t i = 0; i < n; ++i) {
    double st = 0.0, sf = 0.0;
    for (size_t c = 0; c < d; ++c) {
      const double delta = x.at(i, c) - baseline[c];
      st += grad_t.at(i, c) * delta;
      sf += grad_f.at(i, c) * delta;
    }
    out.target.push_back(st / m);
    out.foil.push_back(sf / m);
  }
  return out;
}

AttributionResult IntegratedGradients(const Scorer& model,
                                      const TokenSequence& seq,
                                      const ContrastiveDecision& decision,
                                      const IgConfig& config, ScoreKind kind) {
  const IgComponents parts =
      IntegratedGradientsComponents(model, seq, decision, config, kind);
  return {Method::kIntegratedGradients,
          NormalizeThenSubtract(parts.target, parts.foil), decision};
}

AttributionResult RandomAttribution(const TokenSequence& seq, uint64_t seed) {
  std::mt19937_64 rng(seed);
  AttributionResult result;
  result.method = Method::kRandom;
  for (size_t i = 0; i < seq.size(); ++i) result.scores.push_back(UniformUnit(rng));
  return result;
}

AttributionResult OracleAttribution(const TokenSequence& seq,
                                    const ContrastiveDecision& decision,
                                    std::span<const int> marker_tokens) {
  AttributionResult result{Method::kOracle, {}, decision};
  for (int id : seq.ids) {
    const bool hit = std::find(marker_tokens.begin(), marker_tokens.end(), id) !=
                     marker_tokens.end();
    result.scores.push_back(hit ? 1.0 : 0.0);
  }
  return result;
}

AttributionResult Attribute(Method method, const Scorer& model,
                            const TokenSequence& seq,
                            const ContrastiveDecision& decision,
                            const AttributionOptions& options) {
  switch (method) {
    case Method::kGradNorm1:
      return GradNorm(model, seq, decision, 1, options.score);
    case Method::kGradNorm2:
      return GradNorm(model, seq, decision, 2, options.score);
    case Method::kGradTimesInput:
      return GradTimesInput(model, seq, decision, options.score);
    case Method::kErasure:
      return Erasure(model, seq, decision, options.score);
    case Method::kKernelShap:
      return KernelShap(model, seq, decision, options.shap, options.score);
    case Method::kIntegratedGradients:
      return IntegratedGradients(model, seq, decision, options.ig,
                                 options.score);
    case Method::kRandom: {
      AttributionResult r = RandomAttribution(seq, options.random_seed);
      r.decision = decision;
      return r;
    }
    case Method::kOracle:
      return OracleAttribution(seq, decision, options.oracle_tokens);
  }
  throw InvalidArgument("unhandled attribution method");
}

std::vector<double> NormalizeThenSubtract(std::span<const double> target,
                                          std::span<const double> foil) {
  if (target.size() != foil.size()) {
    throw InvalidArgument("target and foil scores differ in length");
  }
  const double nt = std::sqrt(RowDot(target, target));
  const double nf = std::sqrt(RowDot(foil, foil));
  if (nt == 0.0) throw NormalizationError("target attribution has zero norm");
  if (nf == 0.0) throw NormalizationError("foil attribution has zero norm");
  std::vector<double> out(target.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = target[i] / nt - foil[i] / nf;
  }
  return out;
}

std::vector<size_t> MaskPlan::Sorted() const {
  std::vector<size_t> out = positions;
  std::sort(out.begin(), out.end());
  return out;
}

size_t CeilCount(double fraction, size_t n) {
  const double raw = fraction * static_cast<double>(n);
  return static_cast<size_t>(std::ceil(raw - 1e-9));
}

MaskPlan SelectTopTokens(const AttributionResult& result, double fraction,
                         std::span<const size_t> maskable) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("mask fraction must lie in (0, 1]");
  }
  if (maskable.empty()) throw InvalidArgument("no maskable positions");
  std::vector<size_t> candidates(maskable.begin(), maskable.end());
  for (size_t p : candidates) {
    if (p >= result.scores.size()) {
      throw InvalidArgument("maskable position " + std::to_string(p) +
                            " outside " + std::to_string(result.scores.size()) +
                            " scores");
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::stable_sort(candidates.begin(), candidates.end(), [&](size_t a, size_t b) {
    return result.scores[a] > result.scores[b];
  });
  const size_t k = std::min(candidates.size(), CeilCount(fraction, candidates.size()));
  MaskPlan plan;
  plan.fraction = fraction;
  plan.positions.assign(candidates.begin(), candidates.begin() + k);
  return plan;
}

std::vector<size_t> MaskablePositions(const Vocabulary& vocab,
                                      const TokenSequence& seq) {
  std::vector<size_t> out;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (!vocab.IsSpecial(seq.ids[i]) || seq.ids[i] == Vocabulary::kUnkId) {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace faithbench
