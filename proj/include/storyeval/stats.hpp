// Copyright 2026 The storyeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Descriptive statistics, Welch's t-test with Cohen's d, and the Student-t
// distribution function.

#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "storyeval/error.hpp"

namespace storyeval {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;          // sample SD, n-1 denominator
  bool degenerate = false;  // n == 1, SD reported as 0
};

inline double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Sample variance, two-pass.
inline double variance_of(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

inline Summary summarize(std::span<const double> xs) {
  if (xs.empty()) throw ValidationError("summarize: empty sample");
  for (double x : xs) {
    if (!std::isfinite(x)) throw ValidationError("summarize: non-finite value");
  }
  Summary s;
  s.n = xs.size();
  s.mean = mean_of(xs);
  s.sd = std::sqrt(variance_of(xs, s.mean));
  s.degenerate = xs.size() == 1;
  return s;
}

// Two-decimal fixed rendering without a negative zero.
inline std::string format_fixed2(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
}

// "M.MM (S.SS)"
inline std::string format_mean_sd(double mean, double sd) { return format_fixed2(mean) + " (" + format_fixed2(sd) + ")"; }

inline std::string format_mean_sd(const Summary& s) { return format_mean_sd(s.mean, s.sd); }

// ---------------------------------------------------------------------------
// Student-t distribution

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
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

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta: shape parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * detail::beta_continued_fraction(1.0 - x, b, a) / b;
}

inline double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("student t: degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(x, 0.5 * df, 0.5);
  return t > 0 ? 1.0 - tail : tail;
}

// Two-sided p-value P(|T| >= |t|).
inline double student_t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5);
}

// ---------------------------------------------------------------------------
// Welch's t-test

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
  double d = 0.0;  // Cohen's d with pooled SD
  bool degenerate = false;
};

inline WelchResult significance(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("significance: each sample needs at least 2 values");
  for (auto xs : {a, b}) {
    for (double x : xs) {
      if (!std::isfinite(x)) throw ValidationError("significance: non-finite value");
    }
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = variance_of(a, ma);
  const double vb = variance_of(b, mb);
  const double diff = ma - mb;
  const double sa = va / na;
  const double sb = vb / nb;
  const double se2 = sa + sb;
  const double pooled = std::sqrt(((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0));

  WelchResult r;
  if (se2 == 0.0) {
    r.degenerate = true;
    r.df = na + nb - 2.0;
    if (diff == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
      r.d = 0.0;
    } else {
      constexpr double inf = std::numeric_limits<double>::infinity();
      r.t = diff > 0 ? inf : -inf;
      r.p = 0.0;
      r.d = r.t;
    }
    return r;
  }
  r.t = diff / std::sqrt(se2);
  r.df = (se2 * se2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p = student_t_two_sided_p(r.t, r.df);
  r.d = diff / pooled;
  return r;
}

}  // namespace storyeval
