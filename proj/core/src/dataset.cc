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

#include "faithbench/dataset.h"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <boost/tokenizer.hpp>
#include "json.hpp"

#include "faithbench/errors.h"

namespace faithbench {
namespace {

using json = nlohmann::json;

std::vector<std::string> DefaultMarkers(size_t k) {
  static const char* kGreek[] = {"alpha", "beta",  "gamma", "delta",
                                 "epsilon", "zeta", "eta",   "theta"};
  std::vector<std::string> out;
  for (size_t i = 0; i < k; ++i) {
    out.push_back(i < 8 ? kGreek[i] : "marker" + std::to_string(i));
  }
  return out;
}

std::vector<std::string> DefaultLabels(size_t k) {
  if (k == 2) return {"positive", "negative"};
  std::vector<std::string> out;
  for (size_t i = 0; i < k; ++i) out.push_back("class" + std::to_string(i));
  return out;
}

std::string DistractorWord(size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 2) digits = "0" + digits;
  return "w" + digits;
}

void AddRecord(Dataset& ds, std::string text, std::string label, size_t line,
               const std::set<std::string>& declared) {
  if (text.empty()) throw DatasetError("empty text", line);
  if (!declared.empty() && !declared.count(label)) {
    throw DatasetError("unknown label '" + label + "'", line);
  }
  ds.records.push_back({std::move(text), std::move(label)});
}

void FinishLabels(Dataset& ds, const std::vector<std::string>& declared) {
  if (ds.records.empty()) throw DatasetError("empty dataset");
  if (!declared.empty()) {
    ds.labels = declared;
    return;
  }
  std::set<std::string> seen;
  for (const auto& r : ds.records) seen.insert(r.label);
  ds.labels.assign(seen.begin(), seen.end());
}

}  // namespace

DatasetFormat ParseDatasetFormat(std::string_view name) {
  if (name == "jsonl") return DatasetFormat::kJsonl;
  if (name == "csv") return DatasetFormat::kCsv;
  throw InvalidArgument("unknown dataset format '" + std::string(name) + "'");
}

Dataset ParseDataset(std::string_view contents, DatasetFormat format,
                     const std::vector<std::string>& declared_labels) {
  const std::set<std::string> declared(declared_labels.begin(),
                                       declared_labels.end());
  Dataset ds;
  std::istringstream in{std::string(contents)};
  std::string line;
  size_t line_no = 0;
  if (format == DatasetFormat::kJsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json row;
      try {
        row = json::parse(line);
      } catch (const json::parse_error& e) {
        throw DatasetError(std::string("malformed JSON: ") + e.what(), line_no);
      }
      if (!row.is_object() || !row.contains("text") || !row.contains("label") ||
          !row["text"].is_string() || !row["label"].is_string()) {
        throw DatasetError("expected string fields 'text' and 'label'",
                           line_no);
      }
      AddRecord(ds, row["text"].get<std::string>(),
                row["label"].get<std::string>(), line_no, declared);
    }
  } else {
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    std::optional<size_t> text_col, label_col;
    size_t columns = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> fields;
      try {
        Tokenizer tok(line);
        fields.assign(tok.begin(), tok.end());
      } catch (const boost::escaped_list_error& e) {
        throw DatasetError(std::string("malformed CSV: ") + e.what(), line_no);
      }
      if (!text_col) {
        for (size_t i = 0; i < fields.size(); ++i) {
          if (fields[i] == "text") text_col = i;
          if (fields[i] == "label") label_col = i;
        }
        if (!text_col || !label_col) {
          throw DatasetError("CSV header must name 'text' and 'label'", line_no);
        }
        columns = fields.size();
        continue;
      }
      if (fields.size() != columns) {
        throw DatasetError("expected " + std::to_string(columns) +
                               " fields, got " + std::to_string(fields.size()),
                           line_no);
      }
      AddRecord(ds, fields[*text_col], fields[*label_col], line_no, declared);
    }
  }
  FinishLabels(ds, declared_labels);
  return ds;
}

Dataset LoadDataset(const std::string& path, DatasetFormat format,
                    const std::vector<std::string>& declared_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseDataset(buf.str(), format, declared_labels);
}

void WriteJsonl(const std::string& path,
                const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write '" + path + "'");
  for (const DatasetRecord& r : records) {
    out << json{{"text", r.text}, {"label", r.label}}.dump() << '\n';
  }
}

SyntheticSpec SyntheticSpec::Resolved() const {
  SyntheticSpec s = *this;
  if (s.classes < 2) throw InvalidArgument("synthetic task needs k >= 2 classes");
  if (s.markers.empty()) s.markers = DefaultMarkers(s.classes);
  if (s.labels.empty()) s.labels = DefaultLabels(s.classes);
  if (s.markers.size() != s.classes || s.labels.size() != s.classes) {
    throw InvalidArgument("need exactly one marker and one label per class");
  }
  if (s.vocab_size < 4) throw InvalidArgument("need at least 4 distractor words");
  if (s.min_length < 2 || s.max_length < s.min_length) {
    throw InvalidArgument("invalid synthetic length range");
  }
  if (s.noise < 0.0 || s.noise > 1.0) throw InvalidArgument("noise must lie in [0, 1]");
  return s;
}

std::vector<DatasetRecord> GenerateSyntheticDataset(const SyntheticSpec& spec,
                                                    uint64_t seed) {
  const SyntheticSpec s = spec.Resolved();
  const size_t v = s.vocab_size;

  // Three distinct successors per word with probabilities 0.6 / 0.3 / 0.1.
  std::mt19937_64 grammar(s.grammar_seed);
  std::vector<std::vector<size_t>> successors(v);
  for (size_t w = 0; w < v; ++w) {
    std::vector<size_t> pool(v);
    for (size_t i = 0; i < v; ++i) pool[i] = i;
    std::shuffle(pool.begin(), pool.end(), grammar);
    successors[w].assign(pool.begin(), pool.begin() + 3);
  }
  static constexpr double kCumulative[] = {0.6, 0.9, 1.0};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<size_t> any_word(0, v - 1);
  std::uniform_int_distribution<size_t> any_class(0, s.classes - 1);
  std::uniform_int_distribution<size_t> any_length(s.min_length, s.max_length);

  std::vector<DatasetRecord> out;
  out.reserve(s.count);
  for (size_t n = 0; n < s.count; ++n) {
    const size_t cls = any_class(rng);
    const size_t length = any_length(rng);
    std::uniform_int_distribution<size_t> any_position(0, length - 1);
    const size_t marker_at = any_position(rng);
    std::vector<std::string> words;
    size_t prev = any_word(rng);
    words.push_back(DistractorWord(prev));
    while (words.size() < length) {
      size_t next;
      if (unit(rng) < s.noise) {
        next = any_word(rng);
      } else {
        const double u = unit(rng);
        size_t pick = 0;
        while (u >= kCumulative[pick]) ++pick;
        next = successors[prev][pick];
      }
      words.push_back(DistractorWord(next));
      prev = next;
    }
    // The marker overwrites a chain word, so hiding it breaks a transition.
    words[marker_at] = s.markers[cls];
    std::string text;
    for (size_t i = 0; i < words.size(); ++i) {
      if (i) text.push_back(' ');
      text += words[i];
    }
    out.push_back({std::move(text), s.labels[cls]});
  }
  return out;
}

std::vector<TokenSequence> Encode(const Vocabulary& vocab,
                                  const std::vector<DatasetRecord>& records) {
  std::vector<TokenSequence> out;
  out.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    TokenSequence seq = Tokenize(vocab, records[i].text);
    const auto& labels = vocab.labels();
    auto it = std::find(labels.begin(), labels.end(), records[i].label);
    if (it == labels.end()) {
      throw DatasetError("unknown label '" + records[i].label + "'", i + 1);
    }
    seq.label = vocab.LabelId(static_cast<size_t>(it - labels.begin()));
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace faithbench
