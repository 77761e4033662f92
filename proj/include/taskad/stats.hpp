// Copyright 2026 The Taskad Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace taskad::stats {

using json = nlohmann::json;

inline constexpr double kDefaultAlpha = 0.05;

// Distribution functions. All are deterministic; F-family results are accurate
// to about 1e-10 and the studentized range to about 1e-7 (absolute).

double normal_cdf(double x);
/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_beta(double x, double a, double b);
double f_cdf(double x, double df1, double df2);
double f_sf(double x, double df1, double df2);
/// Two-sided p-value of Student's t.
double t_two_sided_p(double t, double df);
/// P(Q <= q) for the studentized range of k means with df degrees of freedom
/// (df may be real-valued; pass infinity for the normal limit).
double studentized_range_cdf(double q, int k, double df);
double studentized_range_sf(double q, int k, double df);

struct Sample {
  std::string group_name;
  std::vector<double> values;
};

enum class SdPolicy {
  Undefined,  // n == 1 yields no sd
  Zero,       // n == 1 yields sd 0
  Throw,      // n == 1 throws InsufficientData
};

struct Descriptives {
  std::size_t n = 0;
  double median = 0.0;
  double mean = 0.0;
  std::optional<double> sd;  // n - 1 denominator
  double min = 0.0;
  double max = 0.0;
};

Descriptives descriptives(const Sample& sample, SdPolicy policy = SdPolicy::Undefined);

struct TestResult {
  double statistic = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;
  double p_value = 1.0;
  double alpha = kDefaultAlpha;

  bool significant() const { return p_value < alpha; }
};

struct PairwiseResult {
  std::pair<std::string, std::string> pair;
  double mean_difference = 0.0;  // first minus second
  double statistic = 0.0;        // studentized range q
  double df = 0.0;               // Welch-Satterthwaite
  double p_value = 1.0;
  bool significant = false;
};

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

enum class LeveneCenter { Mean, Median };

TestResult levene(std::span<const Sample> groups, LeveneCenter center = LeveneCenter::Mean,
                  double alpha = kDefaultAlpha);
TestResult welch_anova(std::span<const Sample> groups, double alpha = kDefaultAlpha);
std::vector<PairwiseResult> games_howell(std::span<const Sample> groups,
                                         double alpha = kDefaultAlpha);
TTestResult welch_t_test(const Sample& a, const Sample& b);

json to_json(const Descriptives& d);
json to_json(const TestResult& r);
json to_json(const PairwiseResult& r);

}  // namespace taskad::stats
