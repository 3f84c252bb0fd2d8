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

// Bounded-support quantization of the rotated, normalized coordinates
// U = sqrt(d) R x / ||x||. Coordinates with |U_i| > t_p are sent exactly;
// the rest are stochastically rounded onto 2^b uniform levels spanning
// [-t_p, t_p]. t_p is the two-sided normal quantile for tail mass p.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rotquant/core.hpp"
#include "rotquant/error.hpp"
#include "rotquant/metrics.hpp"
#include "rotquant/parallel.hpp"
#include "rotquant/random.hpp"
#include "rotquant/report.hpp"

namespace rotquant {

/// t with P(|G| > t) = p.
inline double threshold_for_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("tail mass p must lie in (0, 1)");
  return -normal_quantile(0.5 * p);
}

struct BsqConfig {
  int bits = 0;
  double p = 0.0;
  double t_p = 0.0;
  std::vector<double> levels;  ///< 2^bits points, symmetric, endpoints exactly +-t_p

  static constexpr int kMaxBits = 24;

  static BsqConfig make(int bits, double p) {
    if (bits < 1 || bits > kMaxBits) {
      throw ArgumentError("bits must lie in 1.." + std::to_string(kMaxBits) + ", got " + std::to_string(bits));
    }
    BsqConfig cfg;
    cfg.bits = bits;
    cfg.p = p;
    cfg.t_p = threshold_for_p(p);
    const std::size_t n = std::size_t{1} << bits;
    const double span = static_cast<double>(n - 1);
    cfg.levels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      cfg.levels[i] = cfg.t_p * (2.0 * static_cast<double>(i) - span) / span;
    }
    return cfg;
  }

  std::size_t level_count() const noexcept { return levels.size(); }

  /// Cell index i with levels[i] <= z <= levels[i + 1], for |z| <= t_p.
  std::size_t cell_of(double z) const noexcept {
    const std::size_t cells = levels.size() - 1;
    const double w = 2.0 * t_p / static_cast<double>(cells);
    auto i = static_cast<std::ptrdiff_t>(std::floor((z + t_p) / w));
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(cells) - 1);
    while (i > 0 && z < levels[static_cast<std::size_t>(i)]) --i;
    while (static_cast<std::size_t>(i) + 1 < cells && z > levels[static_cast<std::size_t>(i) + 1]) ++i;
    return static_cast<std::size_t>(i);
  }

  friend bool operator==(const BsqConfig&, const BsqConfig&) = default;
};

/// e(z) = E[(z_hat - z)^2 | z]: (z - q_i)(q_{i+1} - z) inside a cell, zero
/// beyond the thresholds where values travel exactly.
class ErrorFunction {
 public:
  explicit ErrorFunction(const BsqConfig& cfg) : cfg_(&cfg) {}

  double operator()(double z) const noexcept {
    if (std::abs(z) > cfg_->t_p) return 0.0;
    return inside(z);
  }

  /// The cell quadratic, also at the thresholds where e itself jumps to zero.
  double inside(double z) const noexcept {
    const std::size_t i = cfg_->cell_of(z);
    return std::max(0.0, (z - cfg_->levels[i]) * (cfg_->levels[i + 1] - z));
  }

 private:
  const BsqConfig* cfg_;
};

/// Total variation of e: each cell of width w rises to w^2/4 and falls back,
/// contributing w^2/2, plus the jumps at +-t_p (zero when the grid ends there).
inline double tv_of_error_function(const BsqConfig& cfg) {
  double tv = 0.0;
  for (std::size_t i = 0; i + 1 < cfg.levels.size(); ++i) {
    const double w = cfg.levels[i + 1] - cfg.levels[i];
    tv += 0.5 * w * w;
  }
  const ErrorFunction e(cfg);
  tv += std::abs(e.inside(cfg.t_p)) + std::abs(e.inside(-cfg.t_p));
  return tv;
}

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
template <std::size_t N>
struct GaussLegendre {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussLegendre() {
    for (std::size_t i = 0; i < (N + 1) / 2; ++i) {
      double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(N) + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t k = 2; k <= N; ++k) {
          const double kk = static_cast<double>(k);
          const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
          p0 = p1;
          p1 = p2;
        }
        dp = static_cast<double>(N) * (x * p1 - p0) / (x * x - 1.0);
        const double step = p1 / dp;
        x -= step;
        if (std::abs(step) < 1e-16) break;
      }
      nodes[i] = -x;
      nodes[N - 1 - i] = x;
      weights[i] = weights[N - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

inline const GaussLegendre<32>& gauss_legendre32() {
  static const GaussLegendre<32> rule;
  return rule;
}

}  // namespace detail

/// E[e(G)], G ~ N(0, 1): 32-point Gauss-Legendre on every cell.
inline double expected_error_gaussian(const BsqConfig& cfg) {
  const auto& gl = detail::gauss_legendre32();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cfg.levels.size(); ++i) {
    const double lo = cfg.levels[i];
    const double hi = cfg.levels[i + 1];
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    double cell = 0.0;
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const double z = mid + half * gl.nodes[k];
      cell += gl.weights[k] * (z - lo) * (hi - z) * normal_pdf(z);
    }
    total += half * cell;
  }
  return total;
}

struct Outlier {
  std::uint32_t index;
  double value;  ///< normalized coordinate U_i, |value| > t_p

  friend bool operator==(const Outlier&, const Outlier&) = default;
};

struct BsqPayload {
  RotationSpec spec;
  BsqConfig config;
  double scale;                       ///< ||x|| / sqrt(d)
  std::vector<std::uint32_t> levels;  ///< level index of each in-range coordinate, ascending coordinate order
  std::vector<Outlier> outliers;      ///< ascending index

  double sent_fraction() const noexcept {
    return static_cast<double>(outliers.size()) / static_cast<double>(spec.dim.value());
  }

  /// Exact serialized size: header, fixed fields, outlier records, packed levels.
  std::size_t wire_bytes() const noexcept {
    const std::size_t level_bits = static_cast<std::size_t>(config.bits) * levels.size();
    return 24 + 25 + 12 * outliers.size() + (level_bits + 7) / 8;
  }

  friend bool operator==(const BsqPayload&, const BsqPayload&) = default;
};

/// Quantization noise comes from its own stream, splitmix64(noise_seed), one
/// uniform per in-range coordinate in index order.
inline BsqPayload bsq_encode(std::span<const double> x, const RotationSpec& spec, const BsqConfig& cfg,
                             std::uint64_t noise_seed) {
  const Rotation rot(spec);
  const std::vector<double> u = normalized_rotated(x, rot);
  const std::size_t d = u.size();
  if (d > (std::size_t{1} << 32)) throw ArgumentError("dimension exceeds 32-bit outlier indices");

  BsqPayload out{spec, cfg, norm2(x) / std::sqrt(static_cast<double>(d)), {}, {}};
  Xoshiro256pp noise(splitmix64(noise_seed));
  for (std::size_t i = 0; i < d; ++i) {
    const double z = u[i];
    if (std::abs(z) > cfg.t_p) {
      out.outliers.push_back({static_cast<std::uint32_t>(i), z});
      continue;
    }
    const std::size_t cell = cfg.cell_of(z);
    const double lo = cfg.levels[cell];
    const double hi = cfg.levels[cell + 1];
    const double up = (z - lo) / (hi - lo);
    out.levels.push_back(static_cast<std::uint32_t>(noise.uniform() < up ? cell + 1 : cell));
  }
  return out;
}

/// Normalized coordinates U_hat as carried by the payload (before un-rotation).
inline std::vector<double> bsq_reconstruct_rotated(const BsqPayload& p) {
  const std::size_t d = p.spec.dim.value();
  if (p.outliers.size() + p.levels.size() != d) {
    throw FormatError("levels", "in-range and outlier counts do not sum to d=" + std::to_string(d));
  }
  std::vector<double> u(d, 0.0);
  std::vector<char> taken(d, 0);
  std::int64_t prev = -1;
  for (const auto& o : p.outliers) {
    if (o.index >= d) throw FormatError("outliers.index", "index " + std::to_string(o.index) + " out of range");
    if (static_cast<std::int64_t>(o.index) <= prev) {
      throw FormatError("outliers.index", "indices overlap or are not strictly increasing at " +
                                              std::to_string(o.index));
    }
    if (!(std::abs(o.value) > p.config.t_p)) {
      throw FormatError("outliers.value", "outlier at " + std::to_string(o.index) + " lies inside [-t_p, t_p]");
    }
    prev = o.index;
    taken[o.index] = 1;
    u[o.index] = o.value;
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < d; ++i) {
    if (taken[i]) continue;
    const std::uint32_t level = p.levels[next++];
    if (level >= p.config.level_count()) {
      throw FormatError("levels", "level index " + std::to_string(level) + " out of range");
    }
    u[i] = p.config.levels[level];
  }
  return u;
}

inline std::vector<double> bsq_decode(const BsqPayload& p) {
  std::vector<double> u = bsq_reconstruct_rotated(p);
  for (auto& v : u) v *= p.scale;
  Rotation(p.spec).invert(u);
  return u;
}

/// Fraction of rotated coordinates beyond t_p, pooled over rotations seeded
/// derive_seed(tmpl.seed, t).
struct OutlierFraction {
  double fraction = 0.0;
  double std_err = 0.0;  ///< across per-rotation fractions
  std::size_t draws = 0;
  std::size_t rotations = 0;
};

inline OutlierFraction measure_outlier_fraction(std::span<const double> x, const RotationSpec& tmpl, double t_p,
                                                std::size_t rotations, Exec exec = {}) {
  if (rotations < 1) throw ArgumentError("need at least one rotation");
  const std::vector<double> fracs = parallel_map(rotations, exec, [&](std::size_t t) {
    const auto u = normalized_rotated(x, Rotation(tmpl.with_seed(derive_seed(tmpl.seed, t))));
    std::size_t n = 0;
    for (double v : u) n += std::abs(v) > t_p ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(u.size());
  });
  const SampleSummary s = summarize(fracs);
  return {s.mean, s.std_err, rotations * x.size(), rotations};
}

/// Checks |E[e(U)] - E[e(G)]| <= 1.28 TV(e) / sqrt(d) with a 4 sigma sampling slack.
/// `check = Check::exceeds` turns the row into a negative control.
inline VerifyReport verify_tv_transfer(std::span<const double> x, const RotationSpec& tmpl, const BsqConfig& cfg,
                                       std::size_t trials, Exec exec = {}, Check check = Check::at_most) {
  if (trials < 1) throw ArgumentError("need at least one trial");
  const std::size_t d = tmpl.dim.value();
  const ErrorFunction e(cfg);
  const std::vector<double> per_trial = parallel_map(trials, exec, [&](std::size_t t) {
    const auto u = normalized_rotated(x, Rotation(tmpl.with_seed(derive_seed(tmpl.seed, t))));
    double s = 0.0;
    for (double v : u) s += e(v);
    return s / static_cast<double>(d);
  });
  const SampleSummary s = summarize(per_trial);
  const double reference = expected_error_gaussian(cfg);
  const double tv = tv_of_error_function(cfg);

  VerifyReport r;
  r.experiment = "bsq_tv_transfer";
  r.citation = "|E e(U) - E e(G)| <= TV(e) d_K(U, G) <= 1.28 TV(e) / sqrt(d) (two RHTs)";
  r.d = d;
  r.statistic_name = "abs_gap";
  r.statistic = std::abs(s.mean - reference);
  r.bound = constants::dk_two_rht * tv / std::sqrt(static_cast<double>(d));
  r.slack = 4.0 * s.std_err;
  r.slack_rule = "4 sigma over per-rotation means";
  r.check = check;
  r.trials = trials;
  r.std_err = s.std_err;
  r.note = "layers=" + std::to_string(tmpl.layers) + " b=" + std::to_string(cfg.bits) +
           " p=" + std::to_string(cfg.p) + " E_rht=" + std::to_string(s.mean) +
           " E_gauss=" + std::to_string(reference) + " TV=" + std::to_string(tv);
  if (d == 1) r.note += " degenerate(d=1)";
  if (!(s.std_err < r.bound / 3.0)) r.note += " sampling_error_not_below_bound/3";
  return r.finalize();
}

}  // namespace rotquant
