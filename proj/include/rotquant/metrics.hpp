// Copyright 2026 The rotquant Authors.
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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "rotquant/core.hpp"
#include "rotquant/error.hpp"

namespace rotquant {

namespace constants {
/// Bound on E|sum x_i eps_i|^3 for unit x: (E M^4)^{3/4} <= 3^{3/4}.
inline const double c3 = std::pow(3.0, 0.75);
/// Berry-Esseen constant for independent non-identical summands.
inline constexpr double berry_esseen = 0.5606;
/// Upper bound on the W1 Berry-Esseen constant.
inline constexpr double c_w = 3.0;
/// 0.5606 * C3 rounded up.
inline constexpr double dk_two_rht = 1.28;
/// E|G| for G ~ N(0, 1).
inline const double mean_abs_gaussian = std::sqrt(2.0 / std::numbers::pi);
}  // namespace constants

/// Sums over a vector needed by the flatness checks: S2, S3 and max x^2.
struct FlatnessStats {
  double s2 = 0.0;
  double s3 = 0.0;
  double m2 = 0.0;

  double rho3() const {
    if (!(s2 > 0.0)) throw ArgumentError("rho3 of the zero vector");
    return s3 / std::pow(s2, 1.5);
  }
  double linf_sq() const {
    if (!(s2 > 0.0)) throw ArgumentError("linf_sq of the zero vector");
    return m2 / s2;
  }
};

/// One pass over `x`, touching each element exactly once.
template <std::ranges::input_range R>
FlatnessStats moment_scan(R&& x) {
  FlatnessStats st;
  bool any = false;
  for (double v : x) {
    any = true;
    const double sq = v * v;
    st.s2 += sq;
    st.s3 += sq * std::abs(v);
    st.m2 = std::max(st.m2, sq);
  }
  if (!any) throw ArgumentError("moment_scan of an empty vector");
  return st;
}

inline double rho3(std::span<const double> x) { return moment_scan(x).rho3(); }
inline double linf_sq(std::span<const double> x) { return moment_scan(x).linf_sq(); }

inline double normal_cdf(double t) noexcept { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

inline double normal_pdf(double t) noexcept {
  return std::exp(-0.5 * t * t) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
}

/// Inverse of normal_cdf: Acklam's rational approximation followed by one
/// Halley step against erfc. Upper half handled by symmetry so the tail is
/// refined in relative precision.
inline double normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ArgumentError("normal_quantile argument must lie in (0, 1)");
  if (q > 0.5) return -normal_quantile(1.0 - q);

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (q < p_low) {
    const double r = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  } else {
    const double r = q - 0.5;
    const double s = r * r;
    x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * r /
        (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
  }
  const double e = normal_cdf(x) - q;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Sorted draws of a scalar statistic.
class EmpiricalSample {
 public:
  explicit EmpiricalSample(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ArgumentError("empirical sample needs at least one value");
    std::sort(values_.begin(), values_.end());
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// sup_t |F_n(t) - Phi(t)|, exact for an empirical CDF against a continuous one.
inline double empirical_kolmogorov(const EmpiricalSample& s) {
  const auto v = s.values();
  const double n = static_cast<double>(v.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double phi = normal_cdf(v[i]);
    worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - phi));
    worst = std::max(worst, std::abs(static_cast<double>(i) / n - phi));
  }
  return worst;
}

/// Quantile coupling against Phi at plotting positions (i - 0.5) / n.
inline double empirical_w1(const EmpiricalSample& s) {
  const auto v = s.values();
  if (v.size() < 2) throw ArgumentError("empirical_w1 needs at least two values");
  const double n = static_cast<double>(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    total += std::abs(v[i] - normal_quantile((static_cast<double>(i) + 0.5) / n));
  }
  return total / n;
}

/// Cov over the final sign plane of (U_i, U_j), U = H D' Ht D y, given the
/// previous plane D = `signs`: 2 * sum_{l<m, l^m = i^j} s_l s_m y_l y_m.
inline double conditional_cov_exact(std::span<const double> y, const SignPlane& signs, std::size_t i,
                                    std::size_t j) {
  const std::size_t d = y.size();
  if (signs.size() != d) throw DimensionError("sign plane length does not match vector length");
  if (!is_power_of_two(d)) throw DimensionError("conditional_cov_exact needs a power-of-two length");
  if (i == j) throw ArgumentError("conditional covariance needs i != j");
  if (i >= d || j >= d) throw ArgumentError("coordinate index out of range");
  const std::size_t alpha = i ^ j;
  double sum = 0.0;
  for (std::size_t l = 0; l < d; ++l) {
    const std::size_t m = l ^ alpha;
    if (l < m) sum += signs.sign(l) * signs.sign(m) * y[l] * y[m];
  }
  return 2.0 * sum;
}

/// Small dense row-major matrix.
struct Matrix {
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t rows;
  std::size_t cols;
  std::vector<double> data;
};

/// Unbiased sample covariance of k-dimensional blocks stored back to back.
inline Matrix empirical_block_cov(std::span<const double> blocks, std::size_t k) {
  if (k == 0 || blocks.size() % k != 0) throw DimensionError("block data is not a multiple of the block size");
  const std::size_t n = blocks.size() / k;
  if (n < 2) throw ArgumentError("empirical_block_cov needs at least two blocks");
  std::vector<double> mean(k, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t a = 0; a < k; ++a) mean[a] += blocks[t * k + a];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  Matrix cov(k, k);
  for (std::size_t t = 0; t < n; ++t) {
    const double* row = blocks.data() + t * k;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a; b < k; ++b) cov(a, b) += (row[a] - mean[a]) * (row[b] - mean[b]);
    }
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      cov(a, b) /= static_cast<double>(n - 1);
      cov(b, a) = cov(a, b);
    }
  }
  return cov;
}

/// Mean, sample standard deviation and standard error of a sequence.
struct SampleSummary {
  double mean = 0.0;
  double stddev = 0.0;
  double std_err = 0.0;
  std::size_t n = 0;
};

inline SampleSummary summarize(std::span<const double> xs) {
  SampleSummary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  // Deviations from the first sample: a constant sample gives exactly zero spread.
  const double x0 = xs.front();
  double sum = 0.0;
  for (double x : xs) sum += x - x0;
  const double shift = sum / static_cast<double>(xs.size());
  s.mean = x0 + shift;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - x0 - shift) * (x - x0 - shift);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    s.std_err = s.stddev / std::sqrt(static_cast<double>(xs.size()));
  }
  return s;
}

}  // namespace rotquant
