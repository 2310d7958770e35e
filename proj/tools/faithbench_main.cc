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

// faithbench: counterfactual-editor evaluation of contrastive attributions.
//
//   faithbench run --config smoke.ini
//   faithbench evaluate --config smoke.ini --workers 4

#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "faithbench/config.h"
#include "faithbench/errors.h"
#include "faithbench/pipeline.h"

namespace {

using faithbench::RunConfig;

// Every RunConfig key becomes a global option so config files and flags
// share one namespace.
void AddConfigOptions(CLI::App& app, std::map<std::string, std::string>& raw) {
  const RunConfig defaults;
  for (const std::string& key : RunConfig::Keys()) {
    const std::string flag = "--" + key;
    app.add_option(flag, raw[key], std::string(RunConfig::Help(key)))
        ->default_str(defaults.Get(key))
        ->group("Run configuration");
  }
}

RunConfig BuildConfig(const CLI::App& app,
                      const std::map<std::string, std::string>& raw) {
  RunConfig config;
  for (const std::string& key : RunConfig::Keys()) {
    if (app.count("--" + key) > 0) config.Set(key, raw.at(key));
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive attribution faithfulness with counterfactual editors"};
  app.set_version_flag("--version", std::string(faithbench::kVersion));
  app.set_config("--config", "", "key = value run configuration file");
  app.require_subcommand(1);
  app.fallthrough();

  std::map<std::string, std::string> raw;
  AddConfigOptions(app, raw);

  std::string synth_out = "synthetic.jsonl";
  auto* synth = app.add_subcommand("synth-data", "write the synthetic dataset as JSONL");
  synth->add_option("-o,--out", synth_out, "output path")->capture_default_str();
  auto* train_predictor =
      app.add_subcommand("train-predictor", "train the predictor checkpoint");
  auto* train_editor =
      app.add_subcommand("train-editor", "train one checkpoint per editor id");
  auto* evaluate = app.add_subcommand(
      "evaluate", "attribute and escalate; stop at the first flip");
  auto* ood = app.add_subcommand(
      "ood-audit", "full escalation sweep with NLL out-of-distribution audit");
  auto* report = app.add_subcommand("report", "mask-percentage and flip-rate tables");
  std::optional<std::string> against;
  auto* correlate = app.add_subcommand(
      "correlate", "Spearman rank-consistency matrix across strategies");
  correlate->add_option("--against", against,
                        "second run directory for a matrix difference");
  auto* run = app.add_subcommand("run", "every stage end to end");
  auto* print = app.add_subcommand("print-config", "print the resolved configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = BuildConfig(app, raw);
    if (*print) {
      config.Validate();
      std::cout << faithbench::FormatRunConfig(config);
    } else if (*synth) {
      faithbench::SynthDataCommand(config, synth_out);
    } else if (*train_predictor) {
      faithbench::TrainPredictorCommand(config);
    } else if (*train_editor) {
      faithbench::TrainEditorCommand(config);
    } else if (*evaluate) {
      faithbench::EvaluateCommand(config);
    } else if (*ood) {
      faithbench::OodAuditCommand(config);
    } else if (*report) {
      faithbench::ReportCommand(config);
    } else if (*correlate) {
      faithbench::CorrelateCommand(config, against);
    } else if (*run) {
      faithbench::RunCommand(config);
    }
  } catch (const faithbench::StageError& e) {
    std::fprintf(stderr, "faithbench: stage %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "faithbench: stage config: %s\n", e.what());
    return 2;
  }
  return 0;
}
