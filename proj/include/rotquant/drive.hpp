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

// DRIVE 1-bit quantization: x_hat = S * R^{-1} sign(R x).
//
// Biased mode uses S = ||R x||_1 / d, which minimizes the squared error of a
// single realization. Unbiased mode uses S = ||x||_2 / (c_d sqrt(d)), where
// c_d sqrt(d) is the expected l1 norm of a uniformly random unit vector.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rotquant/core.hpp"
#include "rotquant/error.hpp"
#include "rotquant/metrics.hpp"
#include "rotquant/parallel.hpp"
#include "rotquant/random.hpp"

namespace rotquant {

/// c_d = sqrt(d / pi) * Gamma(d / 2) / Gamma((d + 1) / 2).
///
/// Small d uses tgamma directly. For d > 64 the log of the Gamma ratio is
/// expanded in 1/z, z = d / 2, which keeps full double precision where a
/// difference of two lgamma values would cancel.
inline double scaling_constant_cd(std::size_t d) {
  if (d < 1) throw ArgumentError("c_d needs d >= 1");
  const double dd = static_cast<double>(d);
  if (d <= 64) {
    return std::sqrt(dd / std::numbers::pi) * std::tgamma(0.5 * dd) / std::tgamma(0.5 * (dd + 1.0));
  }
  // log(Gamma(z + 1/2) / (Gamma(z) sqrt(z))), odd powers only; next term is O(z^-9).
  const double iz = 2.0 / dd;
  const double iz2 = iz * iz;
  const double log_ratio = iz * (-1.0 / 8.0 + iz2 * (1.0 / 192.0 + iz2 * (-1.0 / 640.0 + iz2 * (17.0 / 14336.0))));
  return constants::mean_abs_gaussian * (1.0 + std::expm1(-log_ratio));
}

enum class DriveMode { biased, unbiased };

/// How the unbiased scale is formed. Only `expected_norm` carries the
/// variance guarantee; `realized_norm` uses ||x||^2 / ||R x||_1.
enum class UnbiasedScale { expected_norm, realized_norm };

inline const char* to_string(DriveMode m) { return m == DriveMode::biased ? "biased" : "unbiased"; }

/// Wire object: signs of R x plus one scale. The rotation itself travels as its seed.
struct DrivePayload {
  DriveMode mode;
  RotationSpec spec;
  double scale;
  BitVector signs;

  /// Exact encoded size in bytes (see codec.hpp).
  std::size_t wire_bytes() const { return 24 + 8 + (signs.size() + 7) / 8; }
  friend bool operator==(const DrivePayload&, const DrivePayload&) = default;
};

inline DrivePayload drive_encode(std::span<const double> x, const Rotation& rot, DriveMode mode,
                                 UnbiasedScale variant = UnbiasedScale::expected_norm) {
  const std::size_t d = rot.dim();
  if (x.size() != d) throw DimensionError("input length does not match rotation dimension");
  const double norm = norm2(x);
  if (!(norm > 0.0)) throw ArgumentError("DRIVE cannot encode the zero vector");

  std::vector<double> y(x.begin(), x.end());
  rot.apply(y);
  const double l1 = norm1(y);
  double scale;
  if (mode == DriveMode::biased) {
    scale = l1 / static_cast<double>(d);
  } else if (variant == UnbiasedScale::expected_norm) {
    scale = norm / (scaling_constant_cd(d) * std::sqrt(static_cast<double>(d)));
  } else {
    scale = norm * norm / l1;
  }
  return DrivePayload{mode, rot.spec(), scale, sign_vector(y)};
}

inline DrivePayload drive_encode(std::span<const double> x, const RotationSpec& spec, DriveMode mode,
                                 UnbiasedScale variant = UnbiasedScale::expected_norm) {
  if (spec.dim.value() != x.size()) throw DimensionError("input length does not match rotation dimension");
  return drive_encode(x, Rotation(spec), mode, variant);
}

inline std::vector<double> drive_decode(const DrivePayload& p, const Rotation& rot) {
  const std::size_t d = rot.dim();
  if (p.signs.size() != d) {
    throw FormatError("signs", "length " + std::to_string(p.signs.size()) + " does not match d=" +
                                   std::to_string(d));
  }
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = p.signs.test(i) ? -p.scale : p.scale;
  rot.invert(out);
  return out;
}

inline std::vector<double> drive_decode(const DrivePayload& p) { return drive_decode(p, Rotation(p.spec)); }

/// Monte Carlo error of DRIVE on a fixed input; all quantities normalized by ||x||^2.
struct DriveErrorReport {
  double vnmse = 0.0;
  double vnmse_std_err = 0.0;
  double bias_sq_norm = 0.0;  ///< unbiased estimate of ||E x_hat - x||^2 / ||x||^2; may be slightly negative
  double bias_sq_std_err = 0.0;
  double variance_norm = 0.0;  ///< vnmse - bias_sq_norm
  double variance_std_err = 0.0;
  /// Biased mode only: 1 - mean(||R x~||_1^2) / d, the closed-form vNMSE.
  std::optional<double> eq1_prediction;
  std::size_t trials = 0;
};

struct DriveOptions {
  UnbiasedScale variant = UnbiasedScale::expected_norm;
  Exec exec{};
  std::size_t bias_batches = 32;
};

namespace detail {

/// Estimates ||mu||^2 from independent batch means via the cross terms only,
/// sum_{a != b} <m_a, m_b> / (B (B - 1)); standard error by delete-one jackknife.
inline std::pair<double, double> squared_mean_norm(const std::vector<std::vector<double>>& means) {
  const std::size_t batches = means.size();
  const std::size_t d = means.front().size();
  std::vector<double> total(d, 0.0);
  std::vector<double> sq(batches, 0.0);
  double sq_sum = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < d; ++i) {
      total[i] += means[b][i];
      sq[b] += means[b][i] * means[b][i];
    }
    sq_sum += sq[b];
  }
  double total_sq = 0.0;
  for (double v : total) total_sq += v * v;
  if (batches < 2) return {total_sq, std::numeric_limits<double>::infinity()};
  const double nb = static_cast<double>(batches);
  const double estimate = (total_sq - sq_sum) / (nb * (nb - 1.0));
  if (batches < 3) return {estimate, std::numeric_limits<double>::infinity()};

  std::vector<double> loo(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double dot = 0.0;  // <total, m_b>
    for (std::size_t i = 0; i < d; ++i) dot += total[i] * means[b][i];
    const double rest_sq = total_sq - 2.0 * dot + sq[b];
    loo[b] = (rest_sq - (sq_sum - sq[b])) / ((nb - 1.0) * (nb - 2.0));
  }
  double loo_mean = 0.0;
  for (double v : loo) loo_mean += v;
  loo_mean /= nb;
  double ss = 0.0;
  for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
  return {estimate, std::sqrt((nb - 1.0) / nb * ss)};
}

}  // namespace detail

/// Runs `trials` independent rotations seeded derive_seed(tmpl.seed, t).
inline DriveErrorReport measure_drive_error(std::span<const double> x, const RotationSpec& tmpl, DriveMode mode,
                                            std::size_t trials, const DriveOptions& opt = {}) {
  if (trials < 2) throw ArgumentError("measure_drive_error needs at least 2 trials");
  const std::size_t d = tmpl.dim.value();
  if (x.size() != d) throw DimensionError("input length does not match rotation dimension");
  const double norm = norm2(x);
  if (!(norm > 0.0)) throw ArgumentError("DRIVE cannot encode the zero vector");
  const double norm_sq = norm * norm;

  struct Batch {
    std::vector<double> err;
    std::vector<double> eq1;
    std::vector<double> mean_dev;  // mean of (x_hat - x) / ||x||
  };
  auto batches = run_batches(trials, opt.bias_batches, opt.exec, [&](std::size_t, std::size_t begin, std::size_t end) {
    Batch b;
    b.mean_dev.assign(d, 0.0);
    std::vector<double> y(d);
    for (std::size_t t = begin; t < end; ++t) {
      const Rotation rot(tmpl.with_seed(derive_seed(tmpl.seed, t)));
      const DrivePayload p = drive_encode(x, rot, mode, opt.variant);
      const std::vector<double> xh = drive_decode(p, rot);
      double err = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double dev = xh[i] - x[i];
        err += dev * dev;
        b.mean_dev[i] += dev / norm;
      }
      b.err.push_back(err / norm_sq);
      y.assign(x.begin(), x.end());
      rot.apply(y);
      const double l1 = norm1(y) / norm;
      b.eq1.push_back(1.0 - l1 * l1 / static_cast<double>(d));
    }
    for (auto& v : b.mean_dev) v /= static_cast<double>(end - begin);
    return b;
  });

  std::vector<double> errs;
  std::vector<double> eq1s;
  std::vector<std::vector<double>> means;
  errs.reserve(trials);
  for (auto& b : batches) {
    errs.insert(errs.end(), b.err.begin(), b.err.end());
    eq1s.insert(eq1s.end(), b.eq1.begin(), b.eq1.end());
    means.push_back(std::move(b.mean_dev));
  }
  const SampleSummary err = summarize(errs);
  const auto [bias_sq, bias_se] = detail::squared_mean_norm(means);

  DriveErrorReport r;
  r.trials = trials;
  r.vnmse = err.mean;
  r.vnmse_std_err = err.std_err;
  r.bias_sq_norm = bias_sq;
  r.bias_sq_std_err = bias_se;
  r.variance_norm = err.mean - bias_sq;
  r.variance_std_err = std::hypot(err.std_err, bias_se);
  if (mode == DriveMode::biased) r.eq1_prediction = summarize(eq1s).mean;
  return r;
}

struct DmeReport {
  double nmse = 0.0;
  double std_err = 0.0;
  std::size_t clients = 0;
  std::size_t trials = 0;
};

/// N clients encode independently (seed derive_seed(master, t * N + c)); the
/// server averages the decoded vectors. With N = 1 the seeds coincide with
/// measure_drive_error's.
inline DmeReport dme_simulate(const std::vector<std::vector<double>>& xs, const RotationSpec& tmpl, DriveMode mode,
                              std::size_t trials, const DriveOptions& opt = {}) {
  if (xs.empty()) throw ArgumentError("dme_simulate needs at least one client");
  if (trials < 1) throw ArgumentError("dme_simulate needs at least one trial");
  const std::size_t d = tmpl.dim.value();
  for (const auto& x : xs) {
    if (x.size() != d) throw ArgumentError("all client vectors must have dimension " + std::to_string(d));
  }
  const std::size_t n = xs.size();
  std::vector<double> x_avg(d, 0.0);
  double denom = 0.0;
  for (const auto& x : xs) {
    for (std::size_t i = 0; i < d; ++i) x_avg[i] += x[i] / static_cast<double>(n);
    const double nx = norm2(x);
    denom += nx * nx / static_cast<double>(n);
  }
  if (!(denom > 0.0)) throw ArgumentError("dme_simulate needs a nonzero client vector");

  const std::vector<double> errs = parallel_map(trials, opt.exec, [&](std::size_t t) {
    std::vector<double> est(d, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      const Rotation rot(tmpl.with_seed(derive_seed(tmpl.seed, t * n + c)));
      const auto xh = drive_decode(drive_encode(xs[c], rot, mode, opt.variant), rot);
      for (std::size_t i = 0; i < d; ++i) est[i] += xh[i] / static_cast<double>(n);
    }
    double err = 0.0;
    for (std::size_t i = 0; i < d; ++i) err += (est[i] - x_avg[i]) * (est[i] - x_avg[i]);
    return err / denom;
  });
  const SampleSummary s = summarize(errs);
  return DmeReport{s.mean, s.std_err, n, trials};
}

}  // namespace rotquant
