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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "taskad/error.hpp"
#include "taskad/stats.hpp"

namespace taskad::stats {

namespace {

struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double var = 0.0;  // n - 1 denominator
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = static_cast<double>(v.size());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / m.n;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.var = v.size() > 1 ? ss / (m.n - 1.0) : 0.0;
  return m;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_groups(std::span<const Sample> groups) {
  if (groups.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "need at least two groups");
  }
  for (const auto& g : groups) {
    if (g.values.size() < 2) {
      throw Error(ErrorCode::InsufficientData, "group '" + g.group_name + "' has fewer than two values",
                  g.group_name);
    }
    for (double x : g.values) {
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::InsufficientData, "group '" + g.group_name + "' has a non-finite value",
                    g.group_name);
      }
    }
  }
}

// One-way ANOVA F on arbitrary groups; 0/0 is reported as F = 0.
TestResult one_way_f(const std::vector<std::vector<double>>& groups, double alpha) {
  const double k = static_cast<double>(groups.size());
  double total_n = 0.0, grand = 0.0;
  std::vector<Moments> ms;
  for (const auto& g : groups) {
    ms.push_back(moments(g));
    total_n += ms.back().n;
    grand += ms.back().mean * ms.back().n;
  }
  grand /= total_n;
  double between = 0.0, within = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    between += ms[i].n * (ms[i].mean - grand) * (ms[i].mean - grand);
    for (double x : groups[i]) within += (x - ms[i].mean) * (x - ms[i].mean);
  }
  TestResult r;
  r.alpha = alpha;
  r.df1 = k - 1.0;
  r.df2 = total_n - k;
  constexpr double kFloor = 1e-300;
  const bool equal_means = std::all_of(ms.begin(), ms.end(),
                                       [&](const Moments& m) { return m.mean == ms[0].mean; });
  if (equal_means || between <= kFloor) {
    r.statistic = 0.0;
    r.p_value = 1.0;
  } else if (within <= kFloor) {
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.statistic = (between / r.df1) / (within / r.df2);
    r.p_value = f_sf(r.statistic, r.df1, r.df2);
  }
  return r;
}

}  // namespace

Descriptives descriptives(const Sample& sample, SdPolicy policy) {
  const auto& v = sample.values;
  if (v.empty()) throw Error(ErrorCode::EmptySample, "sample '" + sample.group_name + "' is empty");
  Descriptives d;
  d.n = v.size();
  auto m = moments(v);
  d.mean = m.mean;
  d.median = median_of(v);
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  d.min = *lo;
  d.max = *hi;
  if (d.n > 1) {
    d.sd = std::sqrt(m.var);
  } else if (policy == SdPolicy::Zero) {
    d.sd = 0.0;
  } else if (policy == SdPolicy::Throw) {
    throw Error(ErrorCode::InsufficientData, "sd undefined for a single value", sample.group_name);
  }
  return d;
}

TestResult levene(std::span<const Sample> groups, LeveneCenter center, double alpha) {
  check_groups(groups);
  std::vector<std::vector<double>> deviations;
  for (const auto& g : groups) {
    const double c = center == LeveneCenter::Mean ? moments(g.values).mean : median_of(g.values);
    std::vector<double> z;
    z.reserve(g.values.size());
    for (double x : g.values) z.push_back(std::fabs(x - c));
    deviations.push_back(std::move(z));
  }
  return one_way_f(deviations, alpha);
}

TestResult welch_anova(std::span<const Sample> groups, double alpha) {
  check_groups(groups);
  const double k = static_cast<double>(groups.size());
  std::vector<Moments> ms;
  for (const auto& g : groups) {
    ms.push_back(moments(g.values));
    if (!(ms.back().var > 0.0)) {
      throw Error(ErrorCode::ZeroVariance, "group '" + g.group_name + "' has zero variance",
                  g.group_name);
    }
  }
  double w_sum = 0.0, weighted_mean = 0.0;
  std::vector<double> w;
  for (const auto& m : ms) {
    w.push_back(m.n / m.var);
    w_sum += w.back();
    weighted_mean += w.back() * m.mean;
  }
  weighted_mean /= w_sum;
  double a = 0.0, lambda = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    a += w[i] * (ms[i].mean - weighted_mean) * (ms[i].mean - weighted_mean);
    const double r = 1.0 - w[i] / w_sum;
    lambda += r * r / (ms[i].n - 1.0);
  }
  a /= (k - 1.0);
  const double b = 1.0 + 2.0 * (k - 2.0) / (k * k - 1.0) * lambda;

  TestResult result;
  result.alpha = alpha;
  result.statistic = a / b;
  result.df1 = k - 1.0;
  result.df2 = (k * k - 1.0) / (3.0 * lambda);
  result.p_value = f_sf(result.statistic, result.df1, result.df2);
  return result;
}

std::vector<PairwiseResult> games_howell(std::span<const Sample> groups, double alpha) {
  check_groups(groups);
  const int k = static_cast<int>(groups.size());
  std::vector<Moments> ms;
  for (const auto& g : groups) ms.push_back(moments(g.values));

  std::vector<PairwiseResult> out;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      PairwiseResult r;
      r.pair = {groups[i].group_name, groups[j].group_name};
      r.mean_difference = ms[i].mean - ms[j].mean;
      const double si = ms[i].var / ms[i].n, sj = ms[j].var / ms[j].n;
      const double se = std::sqrt(0.5 * (si + sj));
      if (se > 0.0) {
        r.statistic = std::fabs(r.mean_difference) / se;
        r.df = (si + sj) * (si + sj) /
               (si * si / (ms[i].n - 1.0) + sj * sj / (ms[j].n - 1.0));
        r.p_value = studentized_range_sf(r.statistic, k, r.df);
      } else {
        // Both groups constant: identical means are indistinguishable, any
        // difference is certain.
        r.df = ms[i].n + ms[j].n - 2.0;
        r.statistic = r.mean_difference == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.p_value = r.mean_difference == 0.0 ? 1.0 : 0.0;
      }
      r.significant = r.p_value < alpha;
      out.push_back(std::move(r));
    }
  }
  return out;
}

TTestResult welch_t_test(const Sample& a, const Sample& b) {
  const Sample pair[] = {a, b};
  check_groups(pair);
  auto ma = moments(a.values), mb = moments(b.values);
  const double sa = ma.var / ma.n, sb = mb.var / mb.n;
  if (!(sa + sb > 0.0)) throw Error(ErrorCode::ZeroVariance, "both groups have zero variance");
  TTestResult r;
  r.t = (ma.mean - mb.mean) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (ma.n - 1.0) + sb * sb / (mb.n - 1.0));
  r.p_value = t_two_sided_p(r.t, r.df);
  return r;
}

json to_json(const Descriptives& d) {
  json j{{"n", d.n}, {"median", d.median}, {"mean", d.mean}, {"min", d.min}, {"max", d.max}};
  j["sd"] = d.sd ? json(*d.sd) : json("undefined");
  return j;
}

json to_json(const TestResult& r) {
  return json{{"statistic", r.statistic}, {"df1", r.df1},     {"df2", r.df2},
              {"p_value", r.p_value},     {"alpha", r.alpha}, {"significant", r.significant()}};
}

json to_json(const PairwiseResult& r) {
  return json{{"pair", {r.pair.first, r.pair.second}},
              {"mean_difference", r.mean_difference},
              {"statistic", r.statistic},
              {"df", r.df},
              {"p_value", r.p_value},
              {"significant", r.significant}};
}

}  // namespace taskad::stats
