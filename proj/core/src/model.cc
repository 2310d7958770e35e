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

#include "faithbench/model.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "faithbench/errors.h"

namespace faithbench {
namespace {

Tensor RandomNormal(size_t rows, size_t cols, double stddev,
                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Tensor t = Tensor::Zeros(rows, cols);
  for (double& v : t.data()) v = normal(rng);
  return t;
}

constexpr size_t kPerBlock = 12;

}  // namespace

void ContrastiveDecision::Validate() const {
  if (target < 0 || foil < 0) {
    throw InvalidArgument("contrastive decision has unset labels");
  }
  if (target == foil) {
    throw InvalidArgument("target and foil must differ (both " +
                          std::to_string(target) + ")");
  }
}

std::string_view ScoreKindName(ScoreKind kind) {
  return kind == ScoreKind::kLogit ? "logit" : "logprob";
}

ScoreKind ParseScoreKind(std::string_view name) {
  if (name == "logit") return ScoreKind::kLogit;
  if (name == "logprob") return ScoreKind::kLogProb;
  throw InvalidArgument("unknown score kind '" + std::string(name) + "'");
}

Var LabelScore(Var final_logits, int label, ScoreKind kind) {
  if (label < 0 || static_cast<size_t>(label) >= final_logits.cols()) {
    throw InvalidArgument("label id " + std::to_string(label) +
                          " outside logits of width " +
                          std::to_string(final_logits.cols()));
  }
  const size_t col = static_cast<size_t>(label);
  if (kind == ScoreKind::kLogit) return ops::Element(final_logits, 0, col);
  return ops::Element(ops::LogSoftmaxRows(final_logits), 0, col);
}

std::vector<double> FinalLogitValues(const Scorer& scorer,
                                     const TokenSequence& seq) {
  seq.Validate();
  Tape tape;
  Var x = tape.Constant(scorer.EmbedTokens(seq.ids));
  Var logits = scorer.FinalLogits(tape, x, seq.attention);
  auto data = logits.value().data();
  return std::vector<double>(data.begin(), data.end());
}

void ModelConfig::Validate() const {
  if (vocab_size == 0 || context_length == 0 || width == 0 || layers == 0 ||
      heads == 0 || mlp_ratio == 0) {
    throw InvalidArgument("model dimensions must be positive");
  }
  if (width % heads != 0) {
    throw InvalidArgument("width " + std::to_string(width) +
                          " not divisible by " + std::to_string(heads) +
                          " heads");
  }
}

LmModel LmModel::Create(const ModelConfig& config, uint64_t seed) {
  config.Validate();
  std::mt19937_64 rng(seed);
  const size_t d = config.width;
  const size_t hidden = d * config.mlp_ratio;
  const double proj = 1.0 / std::sqrt(static_cast<double>(d));
  const double residual =
      proj / std::sqrt(2.0 * static_cast<double>(config.layers));

  LmModel model;
  model.config_ = config;
  model.token_embedding_ = RandomNormal(config.vocab_size, d, 0.1, rng);
  model.position_embedding_ = RandomNormal(config.context_length, d, 0.1, rng);
  for (size_t l = 0; l < config.layers; ++l) {
    Block b;
    b.ln1_gain = Tensor::Filled(1, d, 1.0);
    b.ln1_bias = Tensor::Zeros(1, d);
    b.query = RandomNormal(d, d, proj, rng);
    b.key = RandomNormal(d, d, proj, rng);
    b.value = RandomNormal(d, d, proj, rng);
    b.output = RandomNormal(d, d, residual, rng);
    b.ln2_gain = Tensor::Filled(1, d, 1.0);
    b.ln2_bias = Tensor::Zeros(1, d);
    b.mlp_in = RandomNormal(d, hidden, proj, rng);
    b.mlp_in_bias = Tensor::Zeros(1, hidden);
    b.mlp_out = RandomNormal(hidden, d,
                             residual / std::sqrt(double(config.mlp_ratio)),
                             rng);
    b.mlp_out_bias = Tensor::Zeros(1, d);
    model.blocks_.push_back(std::move(b));
  }
  model.final_gain_ = Tensor::Filled(1, d, 1.0);
  model.final_bias_ = Tensor::Zeros(1, d);
  model.unembedding_ = RandomNormal(d, config.vocab_size, proj, rng);
  return model;
}

std::vector<const Tensor*> LmModel::Parameters() const {
  std::vector<const Tensor*> out = {&token_embedding_, &position_embedding_};
  for (const Block& b : blocks_) {
    out.insert(out.end(),
               {&b.ln1_gain, &b.ln1_bias, &b.query, &b.key, &b.value,
                &b.output, &b.ln2_gain, &b.ln2_bias, &b.mlp_in,
                &b.mlp_in_bias, &b.mlp_out, &b.mlp_out_bias});
  }
  out.insert(out.end(), {&final_gain_, &final_bias_, &unembedding_});
  return out;
}

std::vector<Tensor*> LmModel::MutableParameters() {
  std::vector<Tensor*> out;
  for (const Tensor* p : std::as_const(*this).Parameters()) {
    out.push_back(const_cast<Tensor*>(p));
  }
  return out;
}

std::vector<std::string> LmModel::ParameterNames() const {
  std::vector<std::string> names = {"token_embedding", "position_embedding"};
  static constexpr const char* kBlockNames[kPerBlock] = {
      "ln1_gain", "ln1_bias", "query",   "key",         "value",   "output",
      "ln2_gain", "ln2_bias", "mlp_in",  "mlp_in_bias", "mlp_out", "mlp_out_bias"};
  for (size_t l = 0; l < blocks_.size(); ++l) {
    for (const char* n : kBlockNames) {
      names.push_back("block" + std::to_string(l) + "." + n);
    }
  }
  names.insert(names.end(), {"final_gain", "final_bias", "unembedding"});
  return names;
}

size_t LmModel::ParameterCount() const {
  size_t total = 0;
  for (const Tensor* p : Parameters()) total += p->size();
  return total;
}

std::vector<Var> LmModel::BindParameters(Tape& tape, bool trainable) const {
  std::vector<Var> vars;
  for (const Tensor* p : Parameters()) {
    vars.push_back(tape.Parameter(*p, trainable));
  }
  return vars;
}

void LmModel::CheckLength(size_t n) const {
  if (n == 0) throw InvalidArgument("empty input sequence");
  if (n > config_.context_length) {
    throw InvalidArgument("sequence of length " + std::to_string(n) +
                          " exceeds context length " +
                          std::to_string(config_.context_length));
  }
}

Var LmModel::Forward(Tape& /*tape*/, std::span<const Var> params,
                     Var token_embeddings, std::span<const int> attention,
                     bool final_only) const {
  const size_t n = token_embeddings.rows();
  CheckLength(n);
  if (attention.size() != n) {
    throw InvalidArgument("attention mask has " +
                          std::to_string(attention.size()) + " entries for " +
                          std::to_string(n) + " positions");
  }
  if (token_embeddings.cols() != config_.width) {
    throw InvalidArgument("embeddings " +
                          ShapeString(token_embeddings.value().shape()) +
                          " do not match model width " +
                          std::to_string(config_.width));
  }
  const size_t expected = 2 + kPerBlock * blocks_.size() + 3;
  if (params.size() != expected) {
    throw InvalidArgument("expected " + std::to_string(expected) +
                          " bound parameters, got " +
                          std::to_string(params.size()));
  }

  std::vector<char> allowed(n * n, 0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j <= i; ++j) allowed[i * n + j] = attention[j] != 0;
  }

  const size_t heads = config_.heads;
  const size_t head_width = config_.width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));

  Var x = ops::Add(token_embeddings, ops::SliceRows(params[1], 0, n));
  for (size_t l = 0; l < blocks_.size(); ++l) {
    const Var* p = params.data() + 2 + kPerBlock * l;
    Var h = ops::LayerNormRows(x, p[0], p[1]);
    Var q = ops::MatMul(h, p[2]);
    Var k = ops::MatMul(h, p[3]);
    Var v = ops::MatMul(h, p[4]);
    std::vector<Var> head_out;
    head_out.reserve(heads);
    for (size_t hd = 0; hd < heads; ++hd) {
      Var qh = ops::SliceCols(q, hd * head_width, head_width);
      Var kh = ops::SliceCols(k, hd * head_width, head_width);
      Var vh = ops::SliceCols(v, hd * head_width, head_width);
      Var scores = ops::Scale(ops::MatMulTransposeB(qh, kh), inv_sqrt);
      Var probs = ops::MaskedSoftmaxRows(scores, allowed);
      head_out.push_back(ops::MatMul(probs, vh));
    }
    Var merged = heads == 1 ? head_out[0] : ops::ConcatCols(head_out);
    x = ops::Add(x, ops::MatMul(merged, p[5]));
    Var h2 = ops::LayerNormRows(x, p[6], p[7]);
    Var m = ops::Gelu(ops::AddRowVector(ops::MatMul(h2, p[8]), p[9]));
    x = ops::Add(x, ops::AddRowVector(ops::MatMul(m, p[10]), p[11]));
  }
  const Var* f = params.data() + 2 + kPerBlock * blocks_.size();
  if (final_only) x = ops::SliceRows(x, n - 1, 1);
  return ops::MatMul(ops::LayerNormRows(x, f[0], f[1]), f[2]);
}

Var LmModel::ForwardIds(Tape& tape, std::span<const Var> params,
                        std::span<const int> ids,
                        std::span<const int> attention, bool final_only) const {
  CheckLength(ids.size());
  Var embeddings = ops::EmbeddingLookup(params[0], ids);
  return Forward(tape, params, embeddings, attention, final_only);
}

Tensor LmModel::Logits(const TokenSequence& seq) const {
  seq.Validate();
  Tape tape;
  std::vector<Var> params = BindParameters(tape, false);
  return ForwardIds(tape, params, seq.ids, seq.attention).value();
}

Tensor LmModel::EmbedTokens(std::span<const int> ids) const {
  Tensor out = Tensor::Zeros(ids.size(), config_.width);
  for (size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<size_t>(ids[r]) >= config_.vocab_size) {
      throw InvalidArgument("token id " + std::to_string(ids[r]) +
                            " outside vocabulary of size " +
                            std::to_string(config_.vocab_size));
    }
    auto src = token_embedding_.Row(static_cast<size_t>(ids[r]));
    std::copy(src.begin(), src.end(), out.Row(r).begin());
  }
  return out;
}

Var LmModel::FinalLogits(Tape& tape, Var embeddings,
                         std::span<const int> attention) const {
  std::vector<Var> params = BindParameters(tape, false);
  return Forward(tape, params, embeddings, attention, /*final_only=*/true);
}

Prediction PredictFromLogits(std::span<const double> final_logits,
                             std::span<const int> label_ids) {
  if (label_ids.size() < 2) {
    throw InvalidArgument("prediction needs at least two label tokens");
  }
  std::vector<int> order(label_ids.begin(), label_ids.end());
  for (int id : order) {
    if (id < 0 || static_cast<size_t>(id) >= final_logits.size()) {
      throw InvalidArgument("label id " + std::to_string(id) +
                            " outside logits");
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double la = final_logits[static_cast<size_t>(a)];
    const double lb = final_logits[static_cast<size_t>(b)];
    if (la != lb) return la > lb;
    return a < b;
  });
  Prediction p;
  p.label = order[0];
  p.decision = {order[0], order[1]};
  for (int id : label_ids) {
    p.label_logits.push_back(final_logits[static_cast<size_t>(id)]);
  }
  return p;
}

Prediction Predict(const Scorer& model, std::span<const int> label_ids,
                   const TokenSequence& seq) {
  return PredictFromLogits(FinalLogitValues(model, seq), label_ids);
}

double SequenceNll(const LmModel& model, const TokenSequence& seq) {
  seq.Validate();
  if (seq.size() < 2) {
    throw InvalidArgument("sequence NLL needs at least 2 tokens, got " +
                          std::to_string(seq.size()));
  }
  const Tensor logits = model.Logits(seq);
  double total = 0.0;
  size_t scored = 0;
  for (size_t t = 1; t < seq.size(); ++t) {
    if (!seq.attention[t]) continue;
    auto row = logits.Row(t - 1);
    const double max = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - max);
    total += max + std::log(sum) - row[static_cast<size_t>(seq.ids[t])];
    ++scored;
  }
  if (scored == 0) {
    throw InvalidArgument("sequence has no attended positions to score");
  }
  return total / static_cast<double>(scored);
}

LinearProbe::LinearProbe(Tensor embedding, Tensor weights, Tensor bias,
                         Pooling pooling)
    : embedding_(std::move(embedding)),
      weights_(std::move(weights)),
      bias_(std::move(bias)),
      pooling_(pooling) {
  if (weights_.rows() != embedding_.cols()) {
    throw InvalidArgument("probe weights " + ShapeString(weights_.shape()) +
                          " do not match embeddings " +
                          ShapeString(embedding_.shape()));
  }
  if (bias_.rows() != 1 || bias_.cols() != weights_.cols()) {
    throw InvalidArgument("probe bias " + ShapeString(bias_.shape()) +
                          " does not match weights " +
                          ShapeString(weights_.shape()));
  }
}

LinearProbe LinearProbe::Random(size_t vocab, size_t width, size_t outputs,
                                Pooling pooling, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return LinearProbe(RandomNormal(vocab, width, 1.0, rng),
                     RandomNormal(width, outputs, 1.0, rng),
                     RandomNormal(1, outputs, 1.0, rng), pooling);
}

Tensor LinearProbe::EmbedTokens(std::span<const int> ids) const {
  Tensor out = Tensor::Zeros(ids.size(), embedding_.cols());
  for (size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<size_t>(ids[r]) >= embedding_.rows()) {
      throw InvalidArgument("token id " + std::to_string(ids[r]) +
                            " outside probe vocabulary");
    }
    auto src = embedding_.Row(static_cast<size_t>(ids[r]));
    std::copy(src.begin(), src.end(), out.Row(r).begin());
  }
  return out;
}

Var LinearProbe::FinalLogits(Tape& tape, Var embeddings,
                             std::span<const int> attention) const {
  const size_t n = embeddings.rows();
  if (attention.size() != n) {
    throw InvalidArgument("attention mask length does not match embeddings");
  }
  const double attended = static_cast<double>(
      std::count_if(attention.begin(), attention.end(), [](int a) { return a != 0; }));
  Tensor pool = Tensor::Zeros(1, n);
  for (size_t i = 0; i < n; ++i) {
    if (!attention[i]) continue;
    pool.at(0, i) = pooling_ == Pooling::kMean ? 1.0 / attended : 1.0;
  }
  Var pooled = ops::MatMul(tape.Constant(std::move(pool)), embeddings);
  Var w = tape.Parameter(weights_, false);
  Var b = tape.Parameter(bias_, false);
  return ops::AddRowVector(ops::MatMul(pooled, w), b);
}

}  // namespace faithbench
