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

#ifndef FAITHBENCH_STATS_H_
#define FAITHBENCH_STATS_H_

#include <span>
#include <vector>

namespace faithbench {

// Percentile `p` in [0, 100] by linear interpolation between order
// statistics: h = (N - 1) p / 100. Throws InvalidArgument on empty input.
double Percentile(std::span<const double> values, double p);

// 1-based ranks, ascending; tied values share the average of their ranks.
std::vector<double> AverageRanks(std::span<const double> values);

// Pearson correlation of average ranks. Throws UndefinedCorrelation when
// either input has no variance.
double Spearman(std::span<const double> a, std::span<const double> b);

struct SignedRankTest {
  double statistic = 0.0;  // W+, the rank sum of positive b - a
  size_t nonzero = 0;      // pairs with a != b
  double p_value = 1.0;
};

// One-sided Wilcoxon signed-rank test of H1: a tends to be smaller than b.
// Zero differences are dropped; the normal approximation uses a tie
// correction and a continuity correction of 0.5.
SignedRankTest WilcoxonSignedRankLess(std::span<const double> a,
                                      std::span<const double> b);

}  // namespace faithbench

#endif  // FAITHBENCH_STATS_H_
