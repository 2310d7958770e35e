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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails that was not declared with
// --known-failure.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "faithbench/attribution.h"
#include "faithbench/checkpoint.h"
#include "faithbench/config.h"
#include "faithbench/editor.h"
#include "faithbench/errors.h"
#include "faithbench/model.h"
#include "faithbench/ood.h"
#include "faithbench/pipeline.h"
#include "faithbench/stats.h"
#include "faithbench/tensor.h"
#include "faithbench/vocabulary.h"

namespace faithbench {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

Vocabulary WordVocab(size_t words) {
  std::string text;
  for (size_t i = 0; i < words; ++i) text += "t" + std::to_string(i) + " ";
  const std::vector<std::string> labels{"negative", "positive"};
  const std::vector<std::string> texts{text};
  return Vocabulary::Build(labels, texts);
}

TokenSequence RandomPrompt(const Vocabulary& vocab, size_t n,
                           std::mt19937_64& rng) {
  std::vector<int> words;
  for (int id = 0; id < static_cast<int>(vocab.size()); ++id) {
    if (!vocab.IsSpecial(id)) words.push_back(id);
  }
  std::uniform_int_distribution<size_t> pick(0, words.size() - 1);
  std::vector<int> ids;
  for (size_t i = 0; i < n; ++i) ids.push_back(words[pick(rng)]);
  return WithSeparator(TokenSequence::FromIds(ids));
}

ContrastiveDecision Labels(const Vocabulary& vocab) {
  return {vocab.LabelId(size_t{1}), vocab.LabelId(size_t{0})};
}

// Final-position logits for an explicit embedding matrix.
std::vector<double> LogitsAt(const Scorer& model, const Tensor& x,
                             const std::vector<int>& attention) {
  Tape tape;
  const Var out = model.FinalLogits(tape, tape.Constant(x), attention);
  const auto v = out.value().data();
  return {v.begin(), v.end()};
}

double Contrast(const std::vector<double>& logits,
                const ContrastiveDecision& d) {
  return logits[static_cast<size_t>(d.target)] -
         logits[static_cast<size_t>(d.foil)];
}

Outcome GradientCheck() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (size_t trial = 0; trial < 100; ++trial) {
    const Vocabulary vocab = WordVocab(6 + trial % 7);
    ModelConfig c;
    c.vocab_size = vocab.size();
    c.context_length = 16;
    c.heads = 1 + trial % 2;
    c.width = 4 * c.heads * (1 + trial % 3);
    c.layers = 1 + trial % 3;
    const LmModel model = LmModel::Create(c, 1000 + trial);
    const TokenSequence seq = RandomPrompt(vocab, 2 + trial % 9, rng);
    const ContrastiveDecision d = Labels(vocab);
    const Tensor g = ContrastiveGradient(model, seq, d);
    Tensor x = model.EmbedTokens(seq.ids);
    const double eps = 1e-5;
    double diff = 0.0, norm = 0.0;
    for (size_t k = 0; k < x.size(); ++k) {
      const double saved = x.data()[k];
      x.data()[k] = saved + eps;
      const double up = Contrast(LogitsAt(model, x, seq.attention), d);
      x.data()[k] = saved - eps;
      const double down = Contrast(LogitsAt(model, x, seq.attention), d);
      x.data()[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      diff += (g.data()[k] - numeric) * (g.data()[k] - numeric);
      norm += numeric * numeric;
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
  }
  return {worst <= 1e-4, "max relative error " + Fmt("%.2e", worst) +
                             " over 100 model/input pairs"};
}

std::vector<double> ExactShapley(const Scorer& model, const TokenSequence& seq,
                                 int label) {
  const size_t n = seq.size();
  const Tensor full = model.EmbedTokens(seq.ids);
  std::vector<double> value(size_t{1} << n);
  for (size_t mask = 0; mask < value.size(); ++mask) {
    Tensor x = full;
    for (size_t i = 0; i < n; ++i) {
      if (!((mask >> i) & 1)) {
        for (double& v : x.Row(i)) v = 0.0;
      }
    }
    value[mask] = LogitsAt(model, x, seq.attention)[static_cast<size_t>(label)];
  }
  std::vector<double> phi(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t mask = 0; mask < value.size(); ++mask) {
      if ((mask >> i) & 1) continue;
      const size_t s = static_cast<size_t>(std::popcount(mask));
      // s! (n - s - 1)! / n!
      double w = 1.0 / static_cast<double>(n);
      for (size_t k = 1; k <= s; ++k) {
        w *= static_cast<double>(k) / static_cast<double>(n - s - 1 + k);
      }
      phi[i] += w * (value[mask | (size_t{1} << i)] - value[mask]);
    }
  }
  return phi;
}

Outcome ShapleyCheck() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  size_t cases = 0;
  for (size_t n = 2; n <= 8; ++n) {
    for (uint64_t seed = 0; seed < 3; ++seed) {
      const Vocabulary vocab = WordVocab(10);
      ModelConfig c;
      c.vocab_size = vocab.size();
      c.context_length = 16;
      c.width = 8;
      c.layers = 2;
      c.heads = 2;
      const LmModel model = LmModel::Create(c, 300 + 10 * n + seed);
      const TokenSequence seq = RandomPrompt(vocab, n - 1, rng);
      const ContrastiveDecision d = Labels(vocab);
      const ShapComponents shap =
          KernelShapComponents(model, seq, d, ShapConfig{});
      const auto t = ExactShapley(model, seq, d.target);
      const auto f = ExactShapley(model, seq, d.foil);
      for (size_t i = 0; i < n; ++i) {
        worst = std::max({worst, std::abs(shap.target[i] - t[i]),
                          std::abs(shap.foil[i] - f[i])});
      }
      ++cases;
    }
  }
  return {worst <= 1e-6, "max abs error " + Fmt("%.2e", worst) + " over " +
                             std::to_string(cases) + " inputs, n = 2..8"};
}

Outcome IgCheck(const Workspace& workspace, const LmModel& predictor) {
  double probe_worst = 0.0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const LinearProbe probe = LinearProbe::Random(
        20, 6, 4, LinearProbe::Pooling::kSum, 40 + seed);
    const TokenSequence seq = TokenSequence::FromIds({5, 9, 13, 7, 19});
    const ContrastiveDecision d{2, 3};
    const Tensor x = probe.EmbedTokens(seq.ids);
    for (size_t m : {1u, 3u, 20u, 200u}) {
      const IgComponents ig =
          IntegratedGradientsComponents(probe, seq, d, IgConfig{m, {}});
      for (size_t i = 0; i < seq.size(); ++i) {
        double wt = 0.0, wf = 0.0;
        for (size_t k = 0; k < x.cols(); ++k) {
          wt += probe.weights().at(k, 2) * x.at(i, k);
          wf += probe.weights().at(k, 3) * x.at(i, k);
        }
        probe_worst = std::max({probe_worst, std::abs(ig.target[i] - wt),
                                std::abs(ig.foil[i] - wf)});
      }
    }
  }

  // Completeness of the contrastive quantity the attribution explains,
  // q_t - q_f, over every evaluation example.
  std::vector<double> errors;
  for (const TokenSequence& text : workspace.eval) {
    const TokenSequence seq = WithSeparator(text);
    const Prediction p = Predict(predictor, workspace.vocab.label_ids(), seq);
    const IgComponents ig = IntegratedGradientsComponents(
        predictor, seq, p.decision, IgConfig{200, {}});
    const Tensor x = predictor.EmbedTokens(seq.ids);
    const double gap =
        Contrast(LogitsAt(predictor, x, seq.attention), p.decision) -
        Contrast(LogitsAt(predictor, Tensor::Zeros(x.rows(), x.cols()),
                          seq.attention),
                 p.decision);
    double sum = 0.0;
    for (size_t i = 0; i < seq.size(); ++i) sum += ig.target[i] - ig.foil[i];
    errors.push_back(std::abs(sum - gap) / std::abs(gap));
  }
  std::sort(errors.begin(), errors.end());
  const double mean = std::accumulate(errors.begin(), errors.end(), 0.0) /
                      static_cast<double>(errors.size());
  const auto over = std::count_if(errors.begin(), errors.end(),
                                  [](double e) { return e > 0.02; });
  return {probe_worst <= 1e-10 && mean <= 0.02,
          "linear probe max error " + Fmt("%.1e", probe_worst) +
              "; trained predictor at m = 200: mean relative error " +
              Fmt("%.4f", mean) + ", median " +
              Fmt("%.4f", errors[errors.size() / 2]) + ", max " +
              Fmt("%.4f", errors.back()) + ", " + std::to_string(over) +
              " of " + std::to_string(errors.size()) + " above 0.02"};
}

Outcome ErasureCheck() {
  std::mt19937_64 rng(404);
  size_t positions = 0, mismatches = 0;
  for (uint64_t trial = 0; trial < 20; ++trial) {
    const Vocabulary vocab = WordVocab(12);
    ModelConfig c;
    c.vocab_size = vocab.size();
    c.context_length = 24;
    c.width = 8 + 4 * (trial % 3);
    c.layers = 1 + trial % 2;
    c.heads = 2;
    const LmModel model = LmModel::Create(c, 500 + trial);
    const TokenSequence seq = RandomPrompt(vocab, 3 + trial % 10, rng);
    const ContrastiveDecision d = Labels(vocab);
    const auto scores = Erasure(model, seq, d).scores;
    const Tensor full = model.EmbedTokens(seq.ids);
    const auto base = LogitsAt(model, full, seq.attention);
    for (size_t i = 0; i < seq.size(); ++i) {
      Tensor x = full;
      for (double& v : x.Row(i)) v = 0.0;
      const auto erased = LogitsAt(model, x, seq.attention);
      const size_t t = static_cast<size_t>(d.target);
      const size_t f = static_cast<size_t>(d.foil);
      const double expected = (base[t] - erased[t]) - (base[f] - erased[f]);
      mismatches += scores[i] != expected;
      ++positions;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " of " +
                               std::to_string(positions) +
                               " positions differ from explicit passes"};
}

RunConfig PlantedTaskConfig(const fs::path& dir, bool lm_objective) {
  RunConfig c;
  c.synth_count = 4400;
  c.eval_size = 200;
  c.calibration_size = 200;
  c.predictor_objective = lm_objective ? "next-token" : "classification";
  c.predictor_width = c.editor_width = 32;
  c.predictor_layers = c.editor_layers = 2;
  c.predictor_heads = c.editor_heads = 4;
  c.context_length = 64;
  c.predictor_epochs = lm_objective ? 3 : 5;
  // The task predictor sees the whole training split; the LM-objective one
  // only a short run over 1000 texts.
  c.predictor_train_size = lm_objective ? 1000 : 0;
  c.editors = {"e1", "e2"};
  c.editor_epochs = 8;
  c.methods = {"gradnorm1", "gradnorm2", "gradinp", "erasure",
               "kernelshap", "ig", "random", "oracle"};
  c.strategies = {"editor:e1", "editor:e2", "erase", "unk", "mask",
                  "att-zero"};
  c.output_dir = dir.string();
  return c;
}

bool Cached(const fs::path& path, const std::string& hash) {
  if (!fs::exists(path)) return false;
  try {
    const auto& meta = LoadCheckpoint(path).metadata;
    const auto it = meta.find("config_hash");
    return it != meta.end() && it->second == hash;
  } catch (const CheckpointError&) {
    return false;
  }
}

// Trains what the cache lacks, then runs the full sweep and all reports.
// Editors always come from `editor_source`.
void Prepare(const RunConfig& config, const RunConfig& editor_source) {
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  if (!Cached(dir / artifacts::kPredictor, config.Hash())) {
    std::printf("  training %s predictor\n",
                config.predictor_objective.c_str());
    std::fflush(stdout);
    TrainPredictorCommand(config);
  }
  const fs::path source = editor_source.output_dir;
  bool editors_ready = true;
  for (const std::string& id : editor_source.editors) {
    editors_ready = editors_ready &&
                    Cached(source / artifacts::EditorCheckpoint(id),
                           editor_source.Hash());
  }
  if (!editors_ready) {
    std::printf("  training editors\n");
    std::fflush(stdout);
    TrainEditorCommand(editor_source);
  }
  if (source != dir) {
    for (const std::string& id : editor_source.editors) {
      fs::copy_file(source / artifacts::EditorCheckpoint(id),
                    dir / artifacts::EditorCheckpoint(id),
                    fs::copy_options::overwrite_existing);
    }
  }
  OodAuditCommand(config);
  ReportCommand(config);
  CorrelateCommand(config, std::nullopt);
}

// example id -> mask level, for one (method, strategy) cell.
std::map<size_t, double> Cell(const std::vector<RecordSummary>& records,
                              const std::string& method,
                              const std::string& strategy) {
  std::map<size_t, double> out;
  for (const RecordSummary& r : records) {
    if (r.method == method && r.strategy == strategy && !r.skipped) {
      out[r.example_id] = r.MaskLevel();
    }
  }
  return out;
}

double Mean(const std::map<size_t, double>& cell) {
  double sum = 0.0;
  for (const auto& [id, v] : cell) sum += v;
  return cell.empty() ? std::nan("") : sum / static_cast<double>(cell.size());
}

Outcome SeparationCheck(const RunConfig& config, const Workspace& workspace,
                        const LmModel& predictor) {
  size_t correct = 0;
  for (const TokenSequence& seq : workspace.eval) {
    correct += Predict(predictor, workspace.vocab.label_ids(),
                       WithSeparator(seq))
                   .label == *seq.label;
  }
  const double accuracy =
      static_cast<double>(correct) / static_cast<double>(workspace.eval.size());
  const auto records = ReadRecordSummaries(fs::path(config.output_dir) /
                                           artifacts::kRecords);
  const std::string strategy = "editor:e1";
  const auto random = Cell(records, "random", strategy);
  const double oracle = Mean(Cell(records, "oracle", strategy));
  bool pass = accuracy >= 0.99 && oracle <= 0.15;
  std::string detail = "accuracy " + Fmt("%.3f", accuracy) + ", oracle " +
                       Fmt("%.3f", oracle) + ", random " +
                       Fmt("%.3f", Mean(random));
  for (const char* method : {"gradnorm1", "gradnorm2", "erasure"}) {
    const auto cell = Cell(records, method, strategy);
    std::vector<double> a, b;
    for (const auto& [id, v] : cell) {
      const auto it = random.find(id);
      if (it == random.end()) continue;
      a.push_back(v);
      b.push_back(it->second);
    }
    const double p = WilcoxonSignedRankLess(a, b).p_value;
    pass = pass && Mean(cell) < Mean(random) && p < 0.01;
    detail += std::string(", ") + method + " " + Fmt("%.3f", Mean(cell)) +
              " (p " + Fmt("%.1e", p) + ")";
  }
  return {pass, detail};
}

// strategy -> per-level OOD fraction pooled over methods.
std::map<std::string, std::vector<double>> OodByLevel(
    const RunConfig& config) {
  const fs::path dir = config.output_dir;
  const auto records = ReadRecordSummaries(dir / artifacts::kRecords);
  const OodThreshold threshold = ReadCalibration(dir / artifacts::kCalibration);
  std::map<std::string, std::vector<std::vector<double>>> pooled;
  for (const RecordSummary& r : records) {
    if (r.skipped) continue;
    auto& levels = pooled[r.strategy];
    levels.resize(config.levels.size());
    for (size_t l = 0; l < r.level_nll.size() && l < levels.size(); ++l) {
      if (r.level_nll[l]) levels[l].push_back(*r.level_nll[l]);
    }
  }
  std::map<std::string, std::vector<double>> out;
  for (const auto& [strategy, levels] : pooled) {
    for (const auto& nll : levels) {
      out[strategy].push_back(OodPercentage(nll, threshold));
    }
  }
  return out;
}

Outcome OodCheck(const RunConfig& task, const RunConfig& lm) {
  bool pass = true;
  double task_worst = 0.0, task_peak = 0.0;
  for (const auto& [strategy, levels] : OodByLevel(task)) {
    const double mean = std::accumulate(levels.begin(), levels.end(), 0.0) /
                        static_cast<double>(levels.size());
    task_worst = std::max(task_worst, mean);
    for (double v : levels) task_peak = std::max(task_peak, v);
  }
  pass = pass && task_worst <= 0.05;

  const auto ood = OodByLevel(lm);
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (const char* editor : {"editor:e1", "editor:e2"}) {
    for (const char* baseline : {"unk", "mask", "att-zero"}) {
      for (size_t l = 0; l < lm.levels.size(); ++l) {
        const double e = ood.at(editor)[l], b = ood.at(baseline)[l];
        const double ratio =
            e == 0.0 ? (b > 0.0 ? std::numeric_limits<double>::infinity()
                                : 0.0)
                     : b / e;
        worst_ratio = std::min(worst_ratio, ratio);
      }
    }
  }
  pass = pass && worst_ratio >= 2.0;
  std::string detail = "task predictor max level-averaged OOD " +
                       Fmt("%.3f", task_worst) + " (single level " +
                       Fmt("%.3f", task_peak) + ")" +
                       "; LM predictor min baseline/editor ratio " +
                       Fmt("%.2f", worst_ratio) + " (level 0.1:";
  for (const char* s : {"editor:e1", "editor:e2", "unk", "mask", "att-zero"}) {
    detail += std::string(" ") + s + " " + Fmt("%.3f", ood.at(s)[0]);
  }
  return {pass, detail + ")"};
}

Outcome RankConsistencyCheck(const RunConfig& lm) {
  size_t used = 0;
  const RankMatrix m = RankCorrelation(
      lm,
      ReadRecordSummaries(fs::path(lm.output_dir) / artifacts::kRecords),
      &used);
  auto index = [&](const std::string& label) {
    return static_cast<size_t>(
        std::find(m.labels.begin(), m.labels.end(), label) - m.labels.begin());
  };
  const size_t e1 = index("editor:e1"), e2 = index("editor:e2"),
               unk = index("unk");
  const double editors = m.at(e1, e2), baseline = m.at(e1, unk);
  return {editors > baseline,
          "corr(e1, e2) " + Fmt("%.4f", editors) + " over " +
              std::to_string(used - m.undefined[e1][e2]) +
              " examples, corr(e1, unk) " + Fmt("%.4f", baseline) + " over " +
              std::to_string(used - m.undefined[e1][unk]) + " examples"};
}

Outcome StatsCheck() {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 2, 4, 3}, r{4, 3, 2, 1};
  std::vector<double> ramp(200);
  std::iota(ramp.begin(), ramp.end(), 1.0);
  const double s = Spearman(a, b), rev = Spearman(a, r);
  const double p = Percentile(ramp, 99.0);
  return {s == 0.8 && rev == -1.0 && std::abs(p - 198.01) < 1e-9,
          "spearman " + Fmt("%.17g", s) + ", reversed " + Fmt("%.17g", rev) +
              ", percentile " + Fmt("%.10g", p) + " (linear)"};
}

RunConfig SmokeConfig(const fs::path& dir) {
  RunConfig c;
  c.synth_count = 1000;
  c.eval_size = 200;
  c.calibration_size = 50;
  c.predictor_width = c.editor_width = 16;
  c.predictor_layers = c.editor_layers = 1;
  c.predictor_heads = c.editor_heads = 2;
  c.context_length = 32;
  c.predictor_epochs = 2;
  c.editor_epochs = 1;
  c.strategies = {"editor:e1", "erase", "unk", "mask", "att-zero"};
  c.output_dir = dir.string();
  return c;
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome DeterminismCheck(const fs::path& cache) {
  const fs::path a = cache / "smoke-a", b = cache / "smoke-b";
  fs::remove_all(a);
  fs::remove_all(b);
  RunCommand(SmokeConfig(a));
  RunConfig second = SmokeConfig(b);
  second.workers = 2;
  RunCommand(second);
  size_t files = 0, differ = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string ext = entry.path().extension().string();
    if (ext != ".csv" && ext != ".jsonl") continue;
    ++files;
    differ += Slurp(entry.path()) != Slurp(b / entry.path().filename());
  }
  return {files >= 8 && differ == 0,
          std::to_string(differ) + " of " + std::to_string(files) +
              " CSV/JSONL artifacts differ between two runs"};
}

Outcome InvariantCheck() {
  std::vector<std::string> broken;
  std::mt19937_64 rng(1010);
  const Vocabulary vocab = WordVocab(10);
  ModelConfig c;
  c.vocab_size = vocab.size();
  c.context_length = 24;
  c.width = 8;
  c.layers = 2;
  c.heads = 2;
  const LmModel model = LmModel::Create(c, 77);

  // Causality: changing token j leaves logits at positions < j untouched.
  for (size_t trial = 0; trial < 10; ++trial) {
    TokenSequence seq = RandomPrompt(vocab, 8, rng);
    const Tensor before = model.Logits(seq);
    const size_t j = 2 + trial % 6;
    seq.ids[j] = seq.ids[j] == 6 ? 7 : 6;
    const Tensor after = model.Logits(seq);
    for (size_t i = 0; i < j * before.cols(); ++i) {
      if (before.data()[i] != after.data()[i]) {
        broken.push_back("causality");
        break;
      }
    }
  }

  // Mask plans are nested across levels; ties go to the earlier position.
  for (size_t trial = 0; trial < 20; ++trial) {
    AttributionResult result;
    std::uniform_int_distribution<int> coarse(0, 3);
    for (size_t i = 0; i < 12; ++i) result.scores.push_back(coarse(rng));
    std::vector<size_t> maskable(12);
    std::iota(maskable.begin(), maskable.end(), 0);
    std::vector<size_t> prev;
    for (double level : {0.1, 0.2, 0.3, 0.4, 0.5}) {
      const auto plan = SelectTopTokens(result, level, maskable).positions;
      if (!std::equal(prev.begin(), prev.end(), plan.begin())) {
        broken.push_back("nesting");
      }
      for (size_t k = 1; k < plan.size(); ++k) {
        const double hi = result.scores[plan[k - 1]];
        const double lo = result.scores[plan[k]];
        if (hi < lo || (hi == lo && plan[k - 1] > plan[k])) {
          broken.push_back("tie-breaking");
        }
      }
      prev = plan;
    }
  }

  // Splicing keeps every unmasked token in place.
  ModelConfig ec = c;
  ec.context_length = 64;
  const LmModel editor = LmModel::Create(ec, 78);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<int> masked = RandomPrompt(vocab, 9, rng).ids;
    masked.pop_back();
    masked[1] = masked[5] = Vocabulary::kMaskId;
    DecodeConfig dc;
    dc.temperature = 1.0;
    dc.seed = seed;
    const Counterfactual cf = GenerateCounterfactual(
        editor, vocab, masked, vocab.LabelId(size_t{0}), dc, 2);
    std::vector<int> expected;
    for (size_t i = 0, f = 0; i < masked.size(); ++i) {
      if (masked[i] == Vocabulary::kMaskId) {
        expected.insert(expected.end(), cf.fills[f].begin(),
                        cf.fills[f].end());
        ++f;
      } else {
        expected.push_back(masked[i]);
      }
    }
    if (cf.text != expected) broken.push_back("splice");
  }

  // OOD thresholds grow with the percentile.
  std::vector<double> nll;
  std::lognormal_distribution<double> spread(1.0, 0.5);
  for (size_t i = 0; i < 200; ++i) nll.push_back(spread(rng));
  double prev = -1.0;
  for (double p = 50.0; p <= 100.0; p += 0.5) {
    const double t = CalibrateThreshold(nll, p, "p").threshold;
    if (t < prev) broken.push_back("threshold monotonicity");
    prev = t;
  }

  // Tied values share their average rank.
  if (AverageRanks(std::vector<double>{2, 1, 2, 3}) !=
      std::vector<double>{2.5, 1, 2.5, 4}) {
    broken.push_back("average ranks");
  }

  std::set<std::string> unique(broken.begin(), broken.end());
  std::string detail =
      "causality, mask-plan nesting, tie-breaking, splice, threshold "
      "monotonicity, average ranks";
  if (!unique.empty()) {
    detail = "violated:";
    for (const auto& u : unique) detail += " " + u;
  }
  return {unique.empty(), detail};
}

int Main(int argc, char** argv) {
  CLI::App app{"faithbench acceptance checks"};
  std::string cache = "acceptance-cache";
  std::vector<int> known;
  std::vector<int> only;
  app.add_option("--cache", cache, "directory for trained models and runs")
      ->capture_default_str();
  app.add_option("--known-failure", known,
                 "criterion expected to fail; reported but not fatal");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path root = fs::absolute(cache);
  fs::create_directories(root);
  const RunConfig task = PlantedTaskConfig(root / "task", false);
  const RunConfig lm = PlantedTaskConfig(root / "lm", true);

  auto wanted = [&](int n) {
    return only.empty() || std::count(only.begin(), only.end(), n) > 0;
  };
  const bool need_task = wanted(3) || wanted(5) || wanted(6);
  const bool need_lm = wanted(6) || wanted(7);
  std::optional<Workspace> workspace;
  std::optional<Checkpoint> predictor;
  if (need_task) {
    std::printf("preparing task-trained run in %s\n", task.output_dir.c_str());
    std::fflush(stdout);
    Prepare(task, task);
    workspace = PrepareWorkspace(task);
    predictor = LoadCheckpoint(fs::path(task.output_dir) / artifacts::kPredictor);
  }
  if (need_lm) {
    std::printf("preparing LM-objective run in %s\n", lm.output_dir.c_str());
    std::fflush(stdout);
    Prepare(lm, task);
  }

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, GradientCheck},
      {2, ShapleyCheck},
      {3, [&] { return IgCheck(*workspace, predictor->model); }},
      {4, ErasureCheck},
      {5, [&] { return SeparationCheck(task, *workspace, predictor->model); }},
      {6, [&] { return OodCheck(task, lm); }},
      {7, [&] { return RankConsistencyCheck(lm); }},
      {8, StatsCheck},
      {9, [&] { return DeterminismCheck(root); }},
      {10, InvariantCheck},
  };
  int fatal = 0;
  for (const auto& [n, check] : criteria) {
    if (!wanted(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    const bool expected =
        std::count(known.begin(), known.end(), n) > 0;
    std::printf("criterion %d: %s  %s [%.1fs]%s\n", n,
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds,
                !o.pass && expected ? " (known failure)" : "");
    std::fflush(stdout);
    if (!o.pass && !expected) ++fatal;
  }
  return fatal == 0 ? 0 : 1;
}

}  // namespace
}  // namespace faithbench

int main(int argc, char** argv) { return faithbench::Main(argc, argv); }
