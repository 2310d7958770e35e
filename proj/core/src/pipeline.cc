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

#include "faithbench/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "faithbench/errors.h"
#include "faithbench/random.h"
#include "faithbench/stats.h"
#include "json.hpp"

namespace faithbench {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Seed streams derived from RunConfig::seed.
enum SeedStream : uint64_t {
  kSynthStream = 1,
  kSplitStream = 2,
  kShapStream = 3,
  kRandomStream = 4,
};

std::string FormatPercent(double ratio) {
  if (std::isnan(ratio)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * ratio);
  return buf;
}

std::string FormatCoefficient(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  // Avoid "-0.000000" so reruns compare byte for byte.
  return std::string(buf) == "-0.000000" ? "0.000000" : buf;
}

std::string FormatLevel(double level) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", level);
  return buf;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << text;
  if (!out) throw InvalidArgument("failed writing " + path.string());
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename F>
auto RunStage(Manifest& manifest, const std::string& stage, F&& body) {
  manifest.Begin(stage);
  try {
    return body();
  } catch (const std::exception& e) {
    manifest.Fail(stage, e.what());
    throw StageError(stage, e.what());
  }
}

std::vector<DatasetRecord> SyntheticRecords(const RunConfig& config) {
  return GenerateSyntheticDataset(config.Synthetic(),
                                  MixSeed(config.seed, kSynthStream));
}

std::string LabelOf(const Vocabulary& vocab, int id) {
  return id >= 0 && vocab.LabelIndex(id) ? vocab.LabelName(id) : "";
}

std::vector<std::string> StrategyNames(const RunConfig& config) {
  std::vector<std::string> out;
  for (const ReplacementStrategy& s : config.StrategyList()) {
    out.push_back(s.Name());
  }
  return out;
}

std::vector<std::string> MethodNames(const RunConfig& config) {
  std::vector<std::string> out;
  for (Method m : config.MethodList()) out.emplace_back(MethodName(m));
  return out;
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Checkpoint LoadMatching(const fs::path& path, const Workspace& workspace,
                        const std::string& role) {
  Checkpoint ckpt = LoadCheckpoint(path);
  if (ckpt.vocab.tokens() != workspace.vocab.tokens()) {
    throw CheckpointError(role + " checkpoint " + path.string() +
                          " was trained on a different vocabulary");
  }
  return ckpt;
}

struct LoadedModels {
  Checkpoint predictor;
  std::vector<Checkpoint> editors;  // config.editors order; unused ones empty
};

LoadedModels LoadModels(const RunConfig& config, const Workspace& workspace) {
  const fs::path dir = config.output_dir;
  LoadedModels out;
  out.predictor =
      LoadMatching(dir / artifacts::kPredictor, workspace, "predictor");
  std::set<std::string> used;
  for (const ReplacementStrategy& s : config.StrategyList()) {
    if (s.kind == StrategyKind::kEditor) used.insert(s.editor_id);
  }
  for (const std::string& id : config.editors) {
    if (used.count(id) > 0) {
      out.editors.push_back(LoadMatching(
          dir / artifacts::EditorCheckpoint(id), workspace, "editor " + id));
    } else {
      out.editors.emplace_back();
    }
  }
  return out;
}

std::vector<const LmModel*> EditorPointers(const LoadedModels& models) {
  std::vector<const LmModel*> out;
  for (const Checkpoint& c : models.editors) out.push_back(&c.model);
  return out;
}

void SaveOutputs(const RunConfig& config, const Workspace& workspace,
                 const EvaluationResult& result) {
  const fs::path dir = config.output_dir;
  WriteRecords(dir / artifacts::kRecords, result, workspace.vocab);
  WriteAttributions(dir / artifacts::kAttributions, result, workspace);
  if (result.full_sweep) WriteCalibration(dir / artifacts::kCalibration, result);
}

void PrepareOutputDir(const RunConfig& config) {
  config.Validate();
  fs::create_directories(config.output_dir);
  WriteText(fs::path(config.output_dir) / artifacts::kConfig,
            FormatRunConfig(config));
}

}  // namespace

std::string artifacts::EditorCheckpoint(const std::string& id) {
  return "editor-" + id + ".ckpt.json";
}

Workspace PrepareWorkspace(const RunConfig& config) {
  Workspace ws;
  if (config.synthetic()) {
    ws.dataset.records = SyntheticRecords(config);
    ws.dataset.labels = config.Synthetic().Resolved().labels;
  } else {
    ws.dataset = LoadDataset(config.dataset,
                             ParseDatasetFormat(config.dataset_format),
                             config.labels);
  }
  const size_t total = ws.dataset.records.size();
  const size_t held_out = config.eval_size + config.calibration_size;
  if (total <= held_out) {
    throw InvalidArgument("dataset has " + std::to_string(total) +
                          " records; eval and calibration need " +
                          std::to_string(held_out) + " plus training data");
  }
  std::vector<size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(MixSeed(config.seed, kSplitStream));
  std::shuffle(order.begin(), order.end(), rng);
  std::sort(order.begin(), order.begin() + config.eval_size);

  std::vector<std::string> train_texts;
  for (size_t i = held_out; i < total; ++i) {
    train_texts.push_back(ws.dataset.records[order[i]].text);
  }
  ws.vocab = Vocabulary::Build(ws.dataset.labels, train_texts);

  auto encode = [&](size_t begin, size_t end) {
    std::vector<DatasetRecord> part;
    for (size_t i = begin; i < end; ++i) {
      part.push_back(ws.dataset.records[order[i]]);
    }
    return Encode(ws.vocab, part);
  };
  ws.eval = encode(0, config.eval_size);
  ws.eval_ids.assign(order.begin(), order.begin() + config.eval_size);
  ws.calibration = encode(config.eval_size, held_out);
  ws.train = encode(held_out, total);

  std::vector<std::string> oracle = config.oracle_tokens;
  if (oracle.empty() && config.synthetic()) {
    oracle = config.Synthetic().Resolved().markers;
  }
  for (const std::string& token : oracle) {
    const auto id = ws.vocab.Find(token);
    if (!id) {
      throw InvalidArgument("oracle token '" + token +
                            "' is not in the vocabulary");
    }
    ws.oracle_tokens.push_back(*id);
  }
  for (const TokenSequence& seq : ws.eval) {
    if (seq.size() + 1 > config.context_length) {
      throw InvalidArgument("an evaluation text of " +
                            std::to_string(seq.size()) +
                            " tokens exceeds the context length");
    }
  }
  return ws;
}

Checkpoint TrainPredictorStage(const RunConfig& config,
                               const Workspace& workspace) {
  Checkpoint ckpt;
  ckpt.vocab = workspace.vocab;
  ckpt.model = LmModel::Create(config.PredictorModel(workspace.vocab.size()),
                               MixSeed(config.predictor_seed, 0));
  if (config.predictor_zero_head) {
    for (double& v : ckpt.model.unembedding().data()) v = 0.0;
  }
  std::span<const TokenSequence> corpus = workspace.train;
  if (config.predictor_train_size > 0 &&
      config.predictor_train_size < corpus.size()) {
    corpus = corpus.first(config.predictor_train_size);
  }
  const TrainingReport report =
      TrainPredictor(ckpt.model, corpus, config.PredictorObjective(),
                     config.PredictorTraining());
  ckpt.metadata = {
      {"role", "predictor"},
      {"objective", std::string(ObjectiveName(config.PredictorObjective()))},
      {"config_hash", config.Hash()},
      {"seed", std::to_string(config.predictor_seed)},
      {"examples", std::to_string(corpus.size())},
      {"initial_loss", std::to_string(report.initial_loss)},
      {"final_loss", std::to_string(report.epoch_losses.back())},
  };
  return ckpt;
}

std::vector<Checkpoint> TrainEditorStage(const RunConfig& config,
                                         const Workspace& workspace) {
  std::span<const TokenSequence> corpus = workspace.train;
  if (config.editor_train_size > 0 &&
      config.editor_train_size < corpus.size()) {
    corpus = corpus.first(config.editor_train_size);
  }
  for (const TokenSequence& seq : corpus) {
    // masked <sep> label <counterfactual> original <eos>
    if (2 * seq.size() + 4 > config.context_length) {
      throw InvalidArgument("a training text of " + std::to_string(seq.size()) +
                            " tokens does not fit the editor context");
    }
  }
  std::vector<Checkpoint> out;
  for (size_t i = 0; i < config.editors.size(); ++i) {
    Checkpoint ckpt;
    ckpt.vocab = workspace.vocab;
    ckpt.model =
        LmModel::Create(config.EditorModel(workspace.vocab.size()),
                        MixSeed(MixSeed(config.editor_seed, i), 0));
    const TrainingReport report = TrainEditor(ckpt.model, workspace.vocab,
                                              corpus, config.EditorTraining(i));
    ckpt.metadata = {
        {"role", "editor"},
        {"editor_id", config.editors[i]},
        {"config_hash", config.Hash()},
        {"seed", std::to_string(config.editor_seed)},
        {"index", std::to_string(i)},
        {"examples", std::to_string(corpus.size())},
        {"initial_loss", std::to_string(report.initial_loss)},
        {"final_loss", std::to_string(report.epoch_losses.back())},
    };
    out.push_back(std::move(ckpt));
  }
  return out;
}

void ParallelFor(size_t n, size_t workers,
                 const std::function<void(size_t)>& fn) {
  workers = std::max<size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (size_t w = 0; w < workers; ++w) threads.emplace_back(work);
    for (std::thread& t : threads) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

EvaluationResult Evaluate(const RunConfig& config, const Workspace& workspace,
                          const LmModel& predictor,
                          const std::vector<const LmModel*>& editors,
                          bool full_sweep) {
  const std::vector<Method> methods = config.MethodList();
  const std::vector<ReplacementStrategy> strategies = config.StrategyList();
  const EscalationSchedule schedule = config.Schedule();
  schedule.Validate();

  std::vector<std::unique_ptr<Replacer>> replacers;
  for (const ReplacementStrategy& s : strategies) {
    if (s.kind != StrategyKind::kEditor) {
      replacers.push_back(MakeBaselineReplacer(s.kind));
      continue;
    }
    const auto it =
        std::find(config.editors.begin(), config.editors.end(), s.editor_id);
    const size_t index = static_cast<size_t>(it - config.editors.begin());
    if (it == config.editors.end() || index >= editors.size() ||
        editors[index] == nullptr) {
      throw InvalidArgument("no editor model for strategy " + s.Name());
    }
    replacers.push_back(std::make_unique<EditorReplacer>(
        *editors[index], workspace.vocab, config.Decode(), s.editor_id));
  }

  AttributionOptions options;
  options.score = ParseScoreKind(config.score);
  options.ig.steps = config.ig_steps;
  options.shap.samples = config.shap_samples;
  options.shap.seed = MixSeed(config.seed, kShapStream);
  options.random_seed = MixSeed(config.seed, kRandomStream);
  options.oracle_tokens = workspace.oracle_tokens;

  const Predictor view{predictor, workspace.vocab,
                       full_sweep ? &predictor : nullptr};

  struct ExampleOutput {
    std::vector<EvalRecord> records;
    std::vector<std::vector<std::optional<double>>> nll;
    std::vector<AttributionResult> attributions;
  };
  std::vector<ExampleOutput> outputs(workspace.eval.size());

  ParallelFor(workspace.eval.size(), config.workers, [&](size_t e) {
    const size_t example_id = workspace.eval_ids[e];
    const TokenSequence& text = workspace.eval[e];
    const TokenSequence prompt = WithSeparator(text);
    const Prediction p =
        Predict(predictor, workspace.vocab.label_ids(), prompt);
    ExampleOutput& out = outputs[e];
    for (Method method : methods) {
      AttributionResult attribution;
      std::string error;
      try {
        attribution = Attribute(method, predictor, prompt, p.decision,
                                ExampleOptions(options, example_id));
      } catch (const NormalizationError& ex) {
        error = ex.what();
      } catch (const SingularSystem& ex) {
        error = ex.what();
      }
      if (error.empty()) {
        out.attributions.push_back(attribution);
      } else {
        AttributionResult failed;
        failed.method = method;
        failed.decision = p.decision;
        out.attributions.push_back(failed);
      }
      for (size_t s = 0; s < replacers.size(); ++s) {
        std::vector<std::optional<double>> nll(schedule.levels.size());
        if (!error.empty()) {
          EvalRecord r;
          r.example_id = example_id;
          r.method = method;
          r.strategy = strategies[s].Name();
          r.decision = p.decision;
          r.max_level = schedule.max_level();
          r.error = error;
          out.records.push_back(std::move(r));
          out.nll.push_back(std::move(nll));
          continue;
        }
        const std::vector<LevelOutcome> sweep =
            Sweep(view, *replacers[s], text, attribution, schedule,
                  !full_sweep);
        for (size_t l = 0; l < sweep.size(); ++l) nll[l] = sweep[l].outcome.nll;
        out.records.push_back(RecordFromSweep(
            example_id, attribution, strategies[s].Name(), sweep, schedule));
        out.nll.push_back(std::move(nll));
      }
    }
  });

  EvaluationResult result;
  result.full_sweep = full_sweep;
  for (size_t e = 0; e < outputs.size(); ++e) {
    for (auto& r : outputs[e].records) result.records.push_back(std::move(r));
    if (full_sweep) {
      for (auto& n : outputs[e].nll) result.level_nll.push_back(std::move(n));
    }
    for (auto& a : outputs[e].attributions) {
      result.attributions.push_back(std::move(a));
      result.attribution_examples.push_back(workspace.eval_ids[e]);
    }
  }
  if (full_sweep) {
    for (const TokenSequence& seq : workspace.calibration) {
      result.calibration_nll.push_back(
          SequenceNll(predictor, WithSeparator(seq)));
    }
    result.threshold = CalibrateThreshold(
        result.calibration_nll, config.ood_percentile, "predictor");
  }
  return result;
}

void WriteRecords(const fs::path& path, const EvaluationResult& result,
                  const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  for (size_t i = 0; i < result.records.size(); ++i) {
    const EvalRecord& r = result.records[i];
    json levels = json::array();
    for (const LevelOutcome& lo : r.levels) {
      json fills = json::array();
      for (const auto& f : lo.outcome.fills) fills.push_back(Detokenize(vocab, f));
      levels.push_back({
          {"level", lo.level},
          {"positions", lo.positions},
          {"text", Detokenize(vocab, lo.outcome.edited.ids)},
          {"attention", lo.outcome.edited.attention},
          {"fills", fills},
          {"complete", lo.outcome.complete},
          {"error", lo.outcome.error},
          {"predicted", LabelOf(vocab, lo.outcome.predicted)},
          {"flipped", lo.outcome.flipped},
          {"flipped_to_foil", lo.outcome.flipped_to_foil},
          {"nll", lo.outcome.nll ? json(*lo.outcome.nll) : json(nullptr)},
      });
    }
    json line = {
        {"example_id", r.example_id},
        {"method", MethodName(r.method)},
        {"strategy", r.strategy},
        {"target", LabelOf(vocab, r.decision.target)},
        {"foil", LabelOf(vocab, r.decision.foil)},
        {"scores", r.scores},
        {"levels", levels},
        {"min_flip_level",
         r.min_flip_level ? json(*r.min_flip_level) : json(nullptr)},
        {"censored", r.censored},
        {"max_level", r.max_level},
        {"error", r.error},
    };
    if (result.full_sweep) {
      json nll = json::array();
      for (const auto& v : result.level_nll[i]) {
        nll.push_back(v ? json(*v) : json(nullptr));
      }
      line["sweep_nll"] = nll;
    }
    out << line.dump() << '\n';
  }
}

void WriteAttributions(const fs::path& path, const EvaluationResult& result,
                       const Workspace& workspace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  for (size_t i = 0; i < result.attributions.size(); ++i) {
    const AttributionResult& a = result.attributions[i];
    out << json{{"example_id", result.attribution_examples[i]},
                {"method", MethodName(a.method)},
                {"target", LabelOf(workspace.vocab, a.decision.target)},
                {"foil", LabelOf(workspace.vocab, a.decision.foil)},
                {"scores", a.scores}}
               .dump()
        << '\n';
  }
}

void WriteCalibration(const fs::path& path, const EvaluationResult& result) {
  if (!result.threshold) throw InvalidArgument("no calibration to write");
  const OodThreshold& t = *result.threshold;
  WriteText(path, json{{"threshold", t.threshold},
                       {"percentile", t.percentile},
                       {"calibration_size", t.calibration_size},
                       {"predictor_id", t.predictor_id},
                       {"percentile_convention", kPercentileConvention},
                       {"nll", result.calibration_nll}}
                          .dump(2));
}

std::vector<RecordSummary> ReadRecordSummaries(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::vector<RecordSummary> out;
  std::string line;
  size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      RecordSummary r;
      r.example_id = j.at("example_id").get<size_t>();
      r.method = j.at("method").get<std::string>();
      r.strategy = j.at("strategy").get<std::string>();
      if (!j.at("min_flip_level").is_null()) {
        r.min_flip_level = j.at("min_flip_level").get<double>();
      }
      r.max_level = j.at("max_level").get<double>();
      r.skipped = !j.at("error").get<std::string>().empty();
      if (j.contains("sweep_nll")) {
        for (const json& v : j.at("sweep_nll")) {
          r.level_nll.push_back(v.is_null() ? std::nullopt
                                            : std::optional(v.get<double>()));
        }
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DatasetError(std::string("malformed record: ") + e.what(), number);
    }
  }
  return out;
}

OodThreshold ReadCalibration(const fs::path& path) {
  try {
    const json j = json::parse(ReadText(path));
    OodThreshold t;
    t.threshold = j.at("threshold").get<double>();
    t.percentile = j.at("percentile").get<double>();
    t.calibration_size = j.at("calibration_size").get<size_t>();
    t.predictor_id = j.at("predictor_id").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw InvalidArgument("malformed calibration file: " +
                          std::string(e.what()));
  }
}

void WriteMaskTables(const fs::path& dir, const RunConfig& config,
                     const std::vector<RecordSummary>& records) {
  const auto methods = MethodNames(config);
  const auto strategies = StrategyNames(config);
  std::map<std::pair<std::string, std::string>, std::vector<const RecordSummary*>>
      cells;
  for (const RecordSummary& r : records) {
    if (!r.skipped) cells[{r.method, r.strategy}].push_back(&r);
  }
  std::string header = "method";
  for (const std::string& s : strategies) {
    header += "," + CsvField(config.DatasetName() + "/" + s);
  }
  std::string mask = header + "\n", flip = header + "\n";
  for (const std::string& m : methods) {
    mask += CsvField(m);
    flip += CsvField(m);
    for (const std::string& s : strategies) {
      const auto it = cells.find({m, s});
      double mean = std::numeric_limits<double>::quiet_NaN();
      double rate = mean;
      if (it != cells.end() && !it->second.empty()) {
        double sum = 0.0;
        size_t flipped = 0;
        for (const RecordSummary* r : it->second) {
          sum += r->MaskLevel();
          flipped += r->min_flip_level.has_value();
        }
        const double n = static_cast<double>(it->second.size());
        mean = sum / n;
        rate = static_cast<double>(flipped) / n;
      }
      mask += "," + FormatPercent(mean);
      flip += "," + FormatPercent(rate);
    }
    mask += "\n";
    flip += "\n";
  }
  WriteText(dir / artifacts::kMaskPercentage, mask);
  WriteText(dir / artifacts::kFlipRate, flip);
}

void WriteOodTables(const fs::path& dir, const RunConfig& config,
                    const std::vector<RecordSummary>& records,
                    const OodThreshold& threshold) {
  const auto methods = MethodNames(config);
  const auto strategies = StrategyNames(config);
  const size_t levels = config.levels.size();
  // [strategy][method][level] and [strategy][level] NLL pools.
  std::map<std::string, std::map<std::string, std::vector<std::vector<double>>>>
      cell;
  std::map<std::string, std::vector<std::vector<double>>> pooled;
  for (const RecordSummary& r : records) {
    if (r.skipped || r.level_nll.empty()) continue;
    auto& c = cell[r.strategy][r.method];
    auto& p = pooled[r.strategy];
    c.resize(levels);
    p.resize(levels);
    for (size_t l = 0; l < levels && l < r.level_nll.size(); ++l) {
      if (!r.level_nll[l]) continue;
      c[l].push_back(*r.level_nll[l]);
      p[l].push_back(*r.level_nll[l]);
    }
  }
  auto mean_over_levels = [&](const std::vector<std::vector<double>>& per) {
    if (per.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (const auto& v : per) sum += OodPercentage(v, threshold);
    return sum / static_cast<double>(per.size());
  };
  std::string grid = "strategy";
  for (const std::string& m : methods) grid += "," + CsvField(m);
  grid += ",all\n";
  std::string by_level = "strategy";
  for (double level : config.levels) by_level += "," + FormatLevel(level);
  by_level += ",mean\n";
  for (const std::string& s : strategies) {
    grid += CsvField(s);
    for (const std::string& m : methods) {
      const auto sit = cell.find(s);
      const bool has = sit != cell.end() && sit->second.count(m) > 0;
      grid += "," + FormatPercent(has ? mean_over_levels(sit->second.at(m))
                                      : std::numeric_limits<double>::quiet_NaN());
    }
    const auto pit = pooled.find(s);
    const auto empty = std::vector<std::vector<double>>{};
    const auto& per = pit == pooled.end() ? empty : pit->second;
    grid += "," + FormatPercent(mean_over_levels(per)) + "\n";
    by_level += CsvField(s);
    for (size_t l = 0; l < levels; ++l) {
      by_level += "," + FormatPercent(
                            l < per.size() ? OodPercentage(per[l], threshold)
                                           : std::numeric_limits<double>::quiet_NaN());
    }
    by_level += "," + FormatPercent(mean_over_levels(per)) + "\n";
  }
  WriteText(dir / artifacts::kOod, grid);
  WriteText(dir / artifacts::kOodLevels, by_level);
}

RankMatrix RankCorrelation(const RunConfig& config,
                           const std::vector<RecordSummary>& records,
                           size_t* examples_used) {
  const auto methods = MethodNames(config);
  const auto strategies = StrategyNames(config);
  // example -> strategy -> method -> record
  std::map<size_t, std::map<std::string, std::map<std::string, const RecordSummary*>>>
      by_example;
  std::set<size_t> excluded;
  for (const RecordSummary& r : records) {
    by_example[r.example_id][r.strategy][r.method] = &r;
    if (r.skipped) excluded.insert(r.example_id);
  }
  std::vector<std::vector<std::vector<double>>> ranks(strategies.size());
  size_t used = 0;
  for (const auto& [example, per_strategy] : by_example) {
    if (excluded.count(example) > 0) continue;
    bool complete = true;
    for (const std::string& s : strategies) {
      const auto sit = per_strategy.find(s);
      if (sit == per_strategy.end()) {
        complete = false;
        break;
      }
      for (const std::string& m : methods) {
        if (sit->second.count(m) == 0) complete = false;
      }
    }
    if (!complete) continue;
    ++used;
    for (size_t s = 0; s < strategies.size(); ++s) {
      std::vector<double> levels;
      for (const std::string& m : methods) {
        const RecordSummary* r = per_strategy.at(strategies[s]).at(m);
        levels.push_back(r->min_flip_level
                             ? *r->min_flip_level
                             : std::numeric_limits<double>::infinity());
      }
      ranks[s].push_back(AverageRanks(levels));
    }
  }
  if (examples_used != nullptr) *examples_used = used;
  return CorrelationMatrix(strategies, ranks);
}

void WriteMatrixCsv(const fs::path& path, const RankMatrix& matrix) {
  std::string out = "strategy";
  for (const std::string& l : matrix.labels) out += "," + CsvField(l);
  out += "\n";
  for (size_t i = 0; i < matrix.size(); ++i) {
    out += CsvField(matrix.labels[i]);
    for (size_t j = 0; j < matrix.size(); ++j) {
      out += "," + FormatCoefficient(matrix.at(i, j));
    }
    out += "\n";
  }
  WriteText(path, out);
}

void WriteCorrelation(const fs::path& dir, const RunConfig& config,
                      const RankMatrix& matrix, size_t examples_used,
                      const std::optional<OodThreshold>& threshold) {
  WriteMatrixCsv(dir / artifacts::kCorrelation, matrix);
  std::string undefined = "strategy";
  for (const std::string& l : matrix.labels) undefined += "," + CsvField(l);
  undefined += "\n";
  for (size_t i = 0; i < matrix.size(); ++i) {
    undefined += CsvField(matrix.labels[i]);
    for (size_t j = 0; j < matrix.size(); ++j) {
      undefined += "," + std::to_string(matrix.undefined[i][j]);
    }
    undefined += "\n";
  }
  WriteText(dir / artifacts::kCorrelationUndefined, undefined);

  json values = json::array();
  for (const auto& row : matrix.values) {
    json r = json::array();
    for (double v : row) r.push_back(std::isnan(v) ? json(nullptr) : json(v));
    values.push_back(r);
  }
  json meta = {
      {"config_hash", config.Hash()},
      {"methods", config.methods},
      {"examples_used", examples_used},
      {"percentile_convention", kPercentileConvention},
      {"seeds",
       {{"seed", config.seed},
        {"predictor_seed", config.predictor_seed},
        {"editor_seed", config.editor_seed},
        {"decode_seed", config.decode_seed}}},
  };
  if (threshold) {
    meta["calibration_size"] = threshold->calibration_size;
    meta["percentile"] = threshold->percentile;
    meta["threshold"] = threshold->threshold;
  }
  WriteText(dir / artifacts::kCorrelationBundle,
            json{{"labels", matrix.labels},
                 {"values", values},
                 {"undefined", matrix.undefined},
                 {"metadata", meta}}
                .dump(2));
}

Manifest::Manifest(fs::path dir, const RunConfig& config)
    : dir_(std::move(dir)), config_(config) {
  const fs::path path = dir_ / artifacts::kManifest;
  if (!fs::exists(path)) return;
  try {
    const json j = json::parse(ReadText(path));
    if (j.at("config_hash").get<std::string>() != config.Hash()) return;
    for (const json& s : j.at("stages")) {
      stages_.push_back({s.at("name").get<std::string>(),
                         s.at("status").get<std::string>(),
                         s.value("error", std::string()),
                         s.at("outputs").get<std::vector<std::string>>()});
    }
  } catch (const std::exception&) {
    stages_.clear();
  }
}

void Manifest::Begin(const std::string& stage) {
  std::erase_if(stages_, [&](const Stage& s) { return s.name == stage; });
  stages_.push_back({stage, "running", "", {}});
  Save();
}

void Manifest::Finish(const std::string& stage,
                      const std::vector<std::string>& outputs) {
  for (Stage& s : stages_) {
    if (s.name == stage) {
      s.status = "complete";
      s.outputs = outputs;
    }
  }
  Save();
}

void Manifest::Fail(const std::string& stage, const std::string& error) {
  for (Stage& s : stages_) {
    if (s.name == stage) {
      s.status = "failed";
      s.error = error;
    }
  }
  Save();
}

void Manifest::Save() const {
  json stages = json::array();
  bool complete = true;
  for (const Stage& s : stages_) {
    stages.push_back({{"name", s.name},
                      {"status", s.status},
                      {"error", s.error},
                      {"outputs", s.outputs}});
    complete = complete && s.status == "complete";
  }
  json config = json::object();
  for (const auto& [k, v] : config_.ToKeyValues()) config[k] = v;
  const json doc = {
      {"tool", "faithbench"},
      {"version", kVersion},
      {"checkpoint_version", kCheckpointVersion},
      {"config_hash", config_.Hash()},
      {"seeds",
       {{"seed", config_.seed},
        {"predictor_seed", config_.predictor_seed},
        {"editor_seed", config_.editor_seed},
        {"decode_seed", config_.decode_seed}}},
      {"percentile_convention", kPercentileConvention},
      {"config", config},
      {"stages", stages},
      {"complete", complete},
  };
  WriteText(dir_ / artifacts::kManifest, doc.dump(2) + "\n");
}

void SynthDataCommand(const RunConfig& config, const std::string& out_path) {
  try {
    config.Validate();
    if (!config.synthetic()) {
      throw InvalidArgument("synth-data needs an empty 'dataset' key");
    }
    WriteJsonl(out_path, SyntheticRecords(config));
  } catch (const std::exception& e) {
    throw StageError("synth-data", e.what());
  }
}

void TrainPredictorCommand(const RunConfig& config) {
  PrepareOutputDir(config);
  Manifest manifest(config.output_dir, config);
  const Workspace ws =
      RunStage(manifest, "prepare-data", [&] { return PrepareWorkspace(config); });
  manifest.Finish("prepare-data", {});
  RunStage(manifest, "train-predictor", [&] {
    SaveCheckpoint(TrainPredictorStage(config, ws),
                   fs::path(config.output_dir) / artifacts::kPredictor);
  });
  manifest.Finish("train-predictor", {artifacts::kPredictor});
}

void TrainEditorCommand(const RunConfig& config) {
  PrepareOutputDir(config);
  Manifest manifest(config.output_dir, config);
  const Workspace ws =
      RunStage(manifest, "prepare-data", [&] { return PrepareWorkspace(config); });
  manifest.Finish("prepare-data", {});
  std::vector<std::string> outputs;
  RunStage(manifest, "train-editor", [&] {
    const auto editors = TrainEditorStage(config, ws);
    for (size_t i = 0; i < editors.size(); ++i) {
      outputs.push_back(artifacts::EditorCheckpoint(config.editors[i]));
      SaveCheckpoint(editors[i], fs::path(config.output_dir) / outputs.back());
    }
  });
  manifest.Finish("train-editor", outputs);
}

void EvaluateCommand(const RunConfig& config) {
  PrepareOutputDir(config);
  Manifest manifest(config.output_dir, config);
  RunStage(manifest, "evaluate", [&] {
    const Workspace ws = PrepareWorkspace(config);
    const LoadedModels models = LoadModels(config, ws);
    SaveOutputs(config, ws,
                Evaluate(config, ws, models.predictor.model,
                         EditorPointers(models), false));
  });
  manifest.Finish("evaluate", {artifacts::kRecords, artifacts::kAttributions});
}

void OodAuditCommand(const RunConfig& config) {
  PrepareOutputDir(config);
  Manifest manifest(config.output_dir, config);
  const fs::path dir = config.output_dir;
  RunStage(manifest, "ood-audit", [&] {
    const Workspace ws = PrepareWorkspace(config);
    const LoadedModels models = LoadModels(config, ws);
    const EvaluationResult result = Evaluate(
        config, ws, models.predictor.model, EditorPointers(models), true);
    SaveOutputs(config, ws, result);
    WriteOodTables(dir, config, ReadRecordSummaries(dir / artifacts::kRecords),
                   *result.threshold);
  });
  manifest.Finish("ood-audit",
                  {artifacts::kRecords, artifacts::kAttributions,
                   artifacts::kCalibration, artifacts::kOod,
                   artifacts::kOodLevels});
}

void ReportCommand(const RunConfig& config) {
  config.Validate();
  Manifest manifest(config.output_dir, config);
  const fs::path dir = config.output_dir;
  std::vector<std::string> outputs = {artifacts::kMaskPercentage,
                                      artifacts::kFlipRate};
  RunStage(manifest, "report", [&] {
    const auto records = ReadRecordSummaries(dir / artifacts::kRecords);
    WriteMaskTables(dir, config, records);
    const bool swept = std::any_of(records.begin(), records.end(),
                                   [](const RecordSummary& r) {
                                     return !r.level_nll.empty();
                                   });
    if (swept && fs::exists(dir / artifacts::kCalibration)) {
      WriteOodTables(dir, config, records,
                     ReadCalibration(dir / artifacts::kCalibration));
      outputs.push_back(artifacts::kOod);
      outputs.push_back(artifacts::kOodLevels);
    }
  });
  manifest.Finish("report", outputs);
}

void CorrelateCommand(const RunConfig& config,
                      const std::optional<std::string>& against_dir) {
  config.Validate();
  Manifest manifest(config.output_dir, config);
  const fs::path dir = config.output_dir;
  std::vector<std::string> outputs = {artifacts::kCorrelation,
                                      artifacts::kCorrelationUndefined,
                                      artifacts::kCorrelationBundle};
  RunStage(manifest, "correlate", [&] {
    size_t used = 0;
    const RankMatrix m = RankCorrelation(
        config, ReadRecordSummaries(dir / artifacts::kRecords), &used);
    std::optional<OodThreshold> threshold;
    if (fs::exists(dir / artifacts::kCalibration)) {
      threshold = ReadCalibration(dir / artifacts::kCalibration);
    }
    WriteCorrelation(dir, config, m, used, threshold);
    if (against_dir) {
      const RankMatrix other = RankCorrelation(
          config,
          ReadRecordSummaries(fs::path(*against_dir) / artifacts::kRecords));
      WriteMatrixCsv(dir / artifacts::kCorrelationDifference,
                     MatrixDifference(m, other));
      outputs.push_back(artifacts::kCorrelationDifference);
    }
  });
  manifest.Finish("correlate", outputs);
}

void RunCommand(const RunConfig& config) {
  PrepareOutputDir(config);
  Manifest manifest(config.output_dir, config);
  const fs::path dir = config.output_dir;
  const Workspace ws =
      RunStage(manifest, "prepare-data", [&] { return PrepareWorkspace(config); });
  if (config.synthetic()) WriteJsonl((dir / artifacts::kDataset).string(),
                                     ws.dataset.records);
  manifest.Finish("prepare-data",
                  config.synthetic() ? std::vector<std::string>{artifacts::kDataset}
                                     : std::vector<std::string>{});
  const Checkpoint predictor = RunStage(manifest, "train-predictor", [&] {
    Checkpoint c = TrainPredictorStage(config, ws);
    SaveCheckpoint(c, dir / artifacts::kPredictor);
    return c;
  });
  manifest.Finish("train-predictor", {artifacts::kPredictor});
  std::vector<std::string> editor_files;
  const std::vector<Checkpoint> editors = RunStage(manifest, "train-editor", [&] {
    auto out = TrainEditorStage(config, ws);
    for (size_t i = 0; i < out.size(); ++i) {
      editor_files.push_back(artifacts::EditorCheckpoint(config.editors[i]));
      SaveCheckpoint(out[i], dir / editor_files.back());
    }
    return out;
  });
  manifest.Finish("train-editor", editor_files);
  RunStage(manifest, "evaluate", [&] {
    std::vector<const LmModel*> pointers;
    for (const Checkpoint& c : editors) pointers.push_back(&c.model);
    SaveOutputs(config, ws,
                Evaluate(config, ws, predictor.model, pointers, true));
  });
  manifest.Finish("evaluate", {artifacts::kRecords, artifacts::kAttributions,
                               artifacts::kCalibration});
  ReportCommand(config);
  CorrelateCommand(config, std::nullopt);
}

}  // namespace faithbench
