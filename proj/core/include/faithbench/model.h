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

// Decoder-only transformer used as both predictor and editor.

#ifndef FAITHBENCH_MODEL_H_
#define FAITHBENCH_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faithbench/tensor.h"
#include "faithbench/vocabulary.h"

namespace faithbench {

// Target label y_t against foil y_f, both verbalizer token ids.
struct ContrastiveDecision {
  int target = -1;
  int foil = -1;

  // Throws InvalidArgument when target == foil or either is negative.
  void Validate() const;
  bool operator==(const ContrastiveDecision&) const = default;
};

// What q(y|x) means for attribution: the raw logit (default) or the
// log-probability under the full-vocabulary softmax.
enum class ScoreKind { kLogit, kLogProb };

std::string_view ScoreKindName(ScoreKind kind);
ScoreKind ParseScoreKind(std::string_view name);

// A model that maps a matrix of input token embeddings to final-position
// logits on a tape. Attribution methods only see this interface.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual size_t EmbeddingWidth() const = 0;
  virtual size_t OutputSize() const = 0;
  // [n, width] embeddings of `ids`, without positional information.
  virtual Tensor EmbedTokens(std::span<const int> ids) const = 0;
  // [1, OutputSize()] logits at the last position.
  virtual Var FinalLogits(Tape& tape, Var embeddings,
                          std::span<const int> attention) const = 0;
};

// q(label | x) on the tape, per `kind`.
Var LabelScore(Var final_logits, int label, ScoreKind kind);

// Final-position logits for a token sequence, no gradients.
std::vector<double> FinalLogitValues(const Scorer& scorer,
                                     const TokenSequence& seq);

struct ModelConfig {
  size_t vocab_size = 0;
  size_t context_length = 128;
  size_t width = 128;
  size_t layers = 4;
  size_t heads = 4;
  size_t mlp_ratio = 4;

  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Pre-LayerNorm GPT-style decoder with learned positional embeddings and an
// untied unembedding. Attention is causal; keys whose attention-mask entry
// is 0 are excluded from every query's softmax.
class LmModel final : public Scorer {
 public:
  LmModel() = default;
  static LmModel Create(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Canonical parameter order, shared by training and checkpoints.
  std::vector<const Tensor*> Parameters() const;
  std::vector<Tensor*> MutableParameters();
  std::vector<std::string> ParameterNames() const;
  size_t ParameterCount() const;

  const Tensor& token_embedding() const { return token_embedding_; }
  Tensor& unembedding() { return unembedding_; }

  // Places every parameter on `tape`, differentiable iff `trainable`.
  std::vector<Var> BindParameters(Tape& tape, bool trainable) const;

  // [n, vocab] logits from bound parameters and token embeddings [n, width].
  // With `final_only` only the last row is unembedded ([1, vocab]).
  Var Forward(Tape& tape, std::span<const Var> params, Var token_embeddings,
              std::span<const int> attention, bool final_only = false) const;
  // Convenience: looks token embeddings up through the bound table.
  Var ForwardIds(Tape& tape, std::span<const Var> params,
                 std::span<const int> ids, std::span<const int> attention,
                 bool final_only = false) const;

  // [n, vocab] logits, no gradients.
  Tensor Logits(const TokenSequence& seq) const;

  size_t EmbeddingWidth() const override { return config_.width; }
  size_t OutputSize() const override { return config_.vocab_size; }
  Tensor EmbedTokens(std::span<const int> ids) const override;
  Var FinalLogits(Tape& tape, Var embeddings,
                  std::span<const int> attention) const override;

 private:
  struct Block {
    Tensor ln1_gain, ln1_bias;
    Tensor query, key, value, output;  // [width, width]
    Tensor ln2_gain, ln2_bias;
    Tensor mlp_in, mlp_in_bias;    // [width, ratio*width], [1, ratio*width]
    Tensor mlp_out, mlp_out_bias;  // [ratio*width, width], [1, width]
  };

  void CheckLength(size_t n) const;

  ModelConfig config_;
  Tensor token_embedding_;     // [vocab, width]
  Tensor position_embedding_;  // [context, width]
  std::vector<Block> blocks_;
  Tensor final_gain_, final_bias_;
  Tensor unembedding_;  // [width, vocab]
};

struct Prediction {
  int label = -1;  // verbalizer token id of the argmax
  ContrastiveDecision decision;
  std::vector<double> label_logits;  // in `label_ids` order
};

// Argmax / runner-up over the label tokens at the final position. Ties go to
// the lower token id.
Prediction Predict(const Scorer& model, std::span<const int> label_ids,
                   const TokenSequence& seq);
Prediction PredictFromLogits(std::span<const double> final_logits,
                             std::span<const int> label_ids);

// Mean over scored positions t >= 1 of -log p(ids[t] | ids[<t]), in nats.
// Positions with attention 0 are neither attended to nor scored.
double SequenceNll(const LmModel& model, const TokenSequence& seq);

// Linear probe over token embeddings: logits = pool(x) W + b. With mean
// pooling the contrastive gradient at every position is (w_t - w_f) / n.
class LinearProbe final : public Scorer {
 public:
  enum class Pooling { kMean, kSum };

  LinearProbe(Tensor embedding, Tensor weights, Tensor bias, Pooling pooling);
  static LinearProbe Random(size_t vocab, size_t width, size_t outputs,
                            Pooling pooling, uint64_t seed);

  const Tensor& weights() const { return weights_; }
  Pooling pooling() const { return pooling_; }

  size_t EmbeddingWidth() const override { return embedding_.cols(); }
  size_t OutputSize() const override { return weights_.cols(); }
  Tensor EmbedTokens(std::span<const int> ids) const override;
  Var FinalLogits(Tape& tape, Var embeddings,
                  std::span<const int> attention) const override;

 private:
  Tensor embedding_;  // [vocab, width]
  Tensor weights_;    // [width, outputs]
  Tensor bias_;       // [1, outputs]
  Pooling pooling_;
};

}  // namespace faithbench

#endif  // FAITHBENCH_MODEL_H_
