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

#include "faithbench/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faithbench/errors.h"

namespace faithbench {

double Percentile(std::span<const double> values, double p) {
  if (values.empty()) throw InvalidArgument("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) {
    throw InvalidArgument("percentile must lie in [0, 100]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * p / 100.0;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> AverageRanks(std::span<const double> values) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j + 1);
    for (size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double Spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw InvalidArgument("spearman needs two vectors of equal length >= 2");
  }
  const std::vector<double> ra = AverageRanks(a);
  const std::vector<double> rb = AverageRanks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw UndefinedCorrelation("spearman of a constant vector");
  }
  return sab / std::sqrt(saa * sbb);
}

SignedRankTest WilcoxonSignedRankLess(std::span<const double> a,
                                      std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("paired test needs equal-length samples");
  }
  std::vector<double> diffs;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) diffs.push_back(b[i] - a[i]);
  }
  SignedRankTest out;
  out.nonzero = diffs.size();
  if (diffs.empty()) return out;
  std::vector<double> magnitudes(diffs.size());
  for (size_t i = 0; i < diffs.size(); ++i) magnitudes[i] = std::fabs(diffs[i]);
  const std::vector<double> ranks = AverageRanks(magnitudes);
  for (size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0.0) out.statistic += ranks[i];
  }
  const double n = static_cast<double>(diffs.size());
  double tie_term = 0.0;
  std::vector<double> sorted = magnitudes;
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i < sorted.size();) {
    size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return out;
  const double z = (out.statistic - mean - 0.5) / std::sqrt(var);
  out.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  return out;
}

}  // namespace faithbench
