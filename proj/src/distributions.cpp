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

#include <array>
#include <cmath>
#include <limits>

#include "taskad/stats.hpp"

namespace taskad::stats {

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half).
constexpr std::array<double, 8> kNodes = {
    0.0950125098376374401853193, 0.2816035507792589132304605, 0.4580167776572273863424194,
    0.6178762444026437484466718, 0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
constexpr std::array<double, 8> kWeights = {
    0.1894506104550684962853967, 0.1826034150449235888667637, 0.1691565193950025381893121,
    0.1495959888165767320815017, 0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

// Composite Gauss-Legendre over [a, b] with `panels` equal panels.
template <class F>
double integrate(F&& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    const double half = 0.5 * h;
    double acc = 0.0;
    for (std::size_t i = 0; i < kNodes.size(); ++i) {
      acc += kWeights[i] * (f(mid - half * kNodes[i]) + f(mid + half * kNodes[i]));
    }
    total += acc * half;
  }
  return total;
}

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

// P(range of k iid standard normals <= w).
double normal_range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  if (k == 2) return std::erf(w / 2.0);  // 2*Phi(w/sqrt 2) - 1
  const double inv_sqrt_2pi = 0.3989422804014326779;
  auto integrand = [&](double z) {
    const double inner = normal_cdf(z) - normal_cdf(z - w);
    if (inner <= 0.0) return 0.0;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z) * std::pow(inner, k - 1);
  };
  const double value = k * integrate(integrand, -8.5, 8.5 + w, 16);
  return std::min(1.0, std::max(0.0, value));
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double regularized_beta(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_cdf(double x, double df1, double df2) {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return regularized_beta(df1 * x / (df1 * x + df2), df1 / 2.0, df2 / 2.0);
}

double f_sf(double x, double df1, double df2) {
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return regularized_beta(df2 / (df2 + df1 * x), df2 / 2.0, df1 / 2.0);
}

double t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return regularized_beta(df / (df + t * t), df / 2.0, 0.5);
}

double studentized_range_cdf(double q, int k, double df) {
  if (!(q > 0.0)) return 0.0;
  if (std::isinf(q)) return 1.0;
  if (std::isinf(df) || df > 1e6) return normal_range_cdf(q, k);

  // s = sqrt(chi2_df / df) has density c * s^(df-1) * exp(-df s^2 / 2).
  const double log_c = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) -
                       (0.5 * df - 1.0) * std::log(2.0);
  const double spread = 1.0 / std::sqrt(2.0 * df);
  const double mode = df > 1.0 ? std::sqrt((df - 1.0) / df) : 0.0;
  const double lo = std::max(0.0, mode - 14.0 * spread);
  const double hi = std::max(mode, 1.0) + 14.0 * spread;
  auto density = [&](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(log_c + (df - 1.0) * std::log(s) - 0.5 * df * s * s);
  };
  double value;
  if (lo == 0.0) {
    // s = hi * u^2 smooths the s^(df-1) behaviour at the origin.
    auto g = [&](double u) {
      const double s = hi * u * u;
      return density(s) * normal_range_cdf(q * s, k) * 2.0 * hi * u;
    };
    value = integrate(g, 0.0, 1.0, 32);
  } else {
    auto g = [&](double s) { return density(s) * normal_range_cdf(q * s, k); };
    value = integrate(g, lo, hi, 32);
  }
  return std::min(1.0, std::max(0.0, value));
}

double studentized_range_sf(double q, int k, double df) {
  return 1.0 - studentized_range_cdf(q, k, df);
}

}  // namespace taskad::stats
