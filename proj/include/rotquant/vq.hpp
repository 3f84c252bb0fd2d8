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
#include <cstdint>
#include <functional>
#include <limits>
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

/// M centroids in R^k, row-major. The radius is always recomputed from the
/// centroids, never taken on trust.
class Codebook {
 public:
  Codebook(std::size_t k_blk, std::vector<double> centroids, std::uint64_t train_seed = 0,
           std::size_t n_samples = 0, std::size_t iters = 0)
      : k_(k_blk), centroids_(std::move(centroids)), train_seed_(train_seed), n_samples_(n_samples), iters_(iters) {
    if (k_ == 0) throw ArgumentError("codebook block size must be positive");
    if (centroids_.empty() || centroids_.size() % k_ != 0) {
      throw ArgumentError("codebook needs at least one centroid of length k_blk");
    }
    for (std::size_t c = 0; c < size(); ++c) {
      double sq = 0.0;
      for (double v : centroid(c)) {
        if (!std::isfinite(v)) throw ArgumentError("codebook centroid " + std::to_string(c) + " is not finite");
        sq += v * v;
      }
      radius_ = std::max(radius_, std::sqrt(sq));
    }
  }

  std::size_t k_blk() const noexcept { return k_; }
  std::size_t size() const noexcept { return centroids_.size() / k_; }
  double radius() const noexcept { return radius_; }
  std::uint64_t train_seed() const noexcept { return train_seed_; }
  std::size_t n_samples() const noexcept { return n_samples_; }
  std::size_t iters() const noexcept { return iters_; }
  std::span<const double> data() const noexcept { return centroids_; }
  std::span<const double> centroid(std::size_t c) const { return {centroids_.data() + c * k_, k_}; }

  /// Nearest centroid by squared l2 distance; the lowest index wins ties.
  std::pair<std::size_t, double> nearest(std::span<const double> v) const noexcept {
    std::size_t best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < size(); ++c) {
      const double* row = centroids_.data() + c * k_;
      double sq = 0.0;
      for (std::size_t a = 0; a < k_; ++a) {
        const double diff = v[a] - row[a];
        sq += diff * diff;
      }
      if (sq < best_sq) {
        best_sq = sq;
        best = c;
      }
    }
    return {best, best_sq};
  }

  friend bool operator==(const Codebook&, const Codebook&) = default;

 private:
  std::size_t k_;
  std::vector<double> centroids_;
  double radius_ = 0.0;
  std::uint64_t train_seed_;
  std::size_t n_samples_;
  std::size_t iters_;
};

/// Lloyd's algorithm on n_samples standard Gaussian blocks with k-means++
/// seeding. Stops after `iters` rounds or when inertia improves by less than
/// a relative 1e-6. Empty clusters move to the worst-served sample.
inline Codebook train_gaussian_codebook(std::size_t k_blk, std::size_t m, std::uint64_t train_seed,
                                        std::size_t n_samples, std::size_t iters = 50) {
  if (k_blk == 0 || m == 0) throw ArgumentError("codebook needs k_blk >= 1 and M >= 1");
  if (n_samples < m) {
    throw ArgumentError("n_samples (" + std::to_string(n_samples) + ") must be at least M (" + std::to_string(m) + ")");
  }
  const std::size_t k = k_blk;
  std::vector<double> pts(n_samples * k);
  GaussianSource gauss(splitmix64(train_seed));
  for (auto& v : pts) v = gauss();
  const auto point = [&](std::size_t i) { return std::span<const double>(pts.data() + i * k, k); };
  const auto dist_sq = [k](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t t = 0; t < k; ++t) s += (a[t] - b[t]) * (a[t] - b[t]);
    return s;
  };

  // k-means++
  Xoshiro256pp pick(splitmix64(train_seed ^ 0x6b6d65616e73ULL));
  std::vector<double> cents;
  cents.reserve(m * k);
  const std::size_t first = static_cast<std::size_t>(pick.uniform() * static_cast<double>(n_samples));
  cents.insert(cents.end(), pts.begin() + static_cast<std::ptrdiff_t>(first * k),
               pts.begin() + static_cast<std::ptrdiff_t>((first + 1) * k));
  std::vector<double> d2(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) d2[i] = dist_sq(point(i), point(first));
  for (std::size_t c = 1; c < m; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen = n_samples - 1;
    if (total > 0.0) {
      double target = pick.uniform() * total;
      for (std::size_t i = 0; i < n_samples; ++i) {
        target -= d2[i];
        if (target < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<std::size_t>(pick.uniform() * static_cast<double>(n_samples));
    }
    cents.insert(cents.end(), pts.begin() + static_cast<std::ptrdiff_t>(chosen * k),
                 pts.begin() + static_cast<std::ptrdiff_t>((chosen + 1) * k));
    const std::span<const double> cnew(cents.data() + c * k, k);
    for (std::size_t i = 0; i < n_samples; ++i) d2[i] = std::min(d2[i], dist_sq(point(i), cnew));
  }

  std::vector<std::size_t> assign(n_samples);
  std::vector<double> sums(m * k);
  std::vector<std::size_t> counts(m);
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < iters; ++it) {
    const Codebook current(k, cents);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
      const auto [c, sq] = current.nearest(point(i));
      assign[i] = c;
      d2[i] = sq;
      inertia += sq;
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n_samples; ++i) {
      ++counts[assign[i]];
      for (std::size_t t = 0; t < k; ++t) sums[assign[i] * k + t] += pts[i * k + t];
    }
    for (std::size_t c = 0; c < m; ++c) {
      if (counts[c] == 0) {
        const auto far = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
        for (std::size_t t = 0; t < k; ++t) cents[c * k + t] = pts[far * k + t];
        d2[far] = 0.0;
        continue;
      }
      for (std::size_t t = 0; t < k; ++t) cents[c * k + t] = sums[c * k + t] / static_cast<double>(counts[c]);
    }
    if (prev_inertia < std::numeric_limits<double>::infinity() &&
        prev_inertia - inertia < 1e-6 * prev_inertia) {
      break;
    }
    prev_inertia = inertia;
  }
  return Codebook(k, std::move(cents), train_seed, n_samples, iters);
}

struct VqPayload {
  RotationSpec spec;
  std::size_t k_blk;
  double scale;  ///< ||x|| / sqrt(d)
  std::vector<std::uint32_t> indices;

  friend bool operator==(const VqPayload&, const VqPayload&) = default;
};

/// Quantizes U = sqrt(d) R x / ||x|| block by block; blocks are contiguous.
inline VqPayload vq_encode(std::span<const double> x, const RotationSpec& spec, const Codebook& cb) {
  const std::size_t d = spec.dim.value();
  const std::size_t k = cb.k_blk();
  if (d % k != 0) {
    throw ArgumentError("dimension " + std::to_string(d) + " is not divisible by block size " + std::to_string(k));
  }
  const std::vector<double> u = normalized_rotated(x, Rotation(spec));
  VqPayload out{spec, k, norm2(x) / std::sqrt(static_cast<double>(d)), {}};
  out.indices.reserve(d / k);
  for (std::size_t b = 0; b < d / k; ++b) {
    out.indices.push_back(static_cast<std::uint32_t>(cb.nearest({u.data() + b * k, k}).first));
  }
  return out;
}

inline std::vector<double> vq_decode(const VqPayload& p, const Codebook& cb) {
  const std::size_t d = p.spec.dim.value();
  const std::size_t k = cb.k_blk();
  if (p.k_blk != k) throw FormatError("k_blk", "payload block size does not match codebook");
  if (p.indices.size() * k != d) throw FormatError("indices", "index count does not cover d");
  std::vector<double> y(d);
  for (std::size_t b = 0; b < p.indices.size(); ++b) {
    const std::uint32_t idx = p.indices[b];
    if (idx >= cb.size()) {
      throw FormatError("indices", "index " + std::to_string(idx) + " at block " + std::to_string(b) +
                                       " exceeds codebook size " + std::to_string(cb.size()));
    }
    const auto c = cb.centroid(idx);
    for (std::size_t a = 0; a < k; ++a) y[b * k + a] = p.scale * c[a];
  }
  Rotation(p.spec).invert(y);
  return y;
}

/// Vector before the final RHT layer and the sign plane that layer applies to it.
/// layers = 3: y = R_1 x (D_1 then Ht), plane D_2.  layers = 2: y = x, plane D_1.
inline std::pair<std::vector<double>, SignPlane> prefinal_state(std::span<const double> x_unit, int layers,
                                                                const Rotation& rot3) {
  std::vector<double> y(x_unit.begin(), x_unit.end());
  if (layers == 3) {
    rot3.plane(1).apply(y);
    fwht_inplace(y);
    return {std::move(y), rot3.plane(2)};
  }
  return {std::move(y), rot3.plane(1)};
}

struct ConditionalCovReport {
  double rms = 0.0;
  double std_err = 0.0;      ///< delta-method error of the RMS
  double mean_cov = 0.0;
  double mean_cov_se = 0.0;
  double mean_linf_sq = 0.0;  ///< mean of ||y||_inf^2 over the pre-final vectors
  std::size_t trials = 0;
};

/// C_{i,j} over `trials` independent draws of the earlier planes; draw t uses
/// the planes of RotationSpec(d, 3, derive_seed(seed, t)).
inline ConditionalCovReport rms_conditional_cov(std::span<const double> x, std::size_t i, std::size_t j, int layers,
                                                std::size_t trials, std::uint64_t seed, Exec exec = {}) {
  if (layers != 2 && layers != 3) throw ArgumentError("rms_conditional_cov supports layers 2 or 3");
  if (i == j) throw ArgumentError("conditional covariance needs i != j");
  if (trials < 100) throw ArgumentError("rms_conditional_cov needs at least 100 trials");
  const Dim dim(x.size());
  if (i >= x.size() || j >= x.size()) throw ArgumentError("coordinate index out of range");
  const std::vector<double> xu = normalized(x);

  struct Draw {
    double cov = 0.0;
    double linf_sq = 0.0;
  };
  const std::vector<Draw> draws = parallel_map(trials, exec, [&](std::size_t t) {
    const Rotation rot(RotationSpec(dim, 3, derive_seed(seed, t)));
    const auto [y, plane] = prefinal_state(xu, layers, rot);
    double m2 = 0.0;
    for (double v : y) m2 = std::max(m2, v * v);
    return Draw{conditional_cov_exact(y, plane, i, j), m2};
  });

  std::vector<double> cov(trials), sq(trials), linf(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    cov[t] = draws[t].cov;
    sq[t] = draws[t].cov * draws[t].cov;
    linf[t] = draws[t].linf_sq;
  }
  const SampleSummary c = summarize(cov);
  const SampleSummary s = summarize(sq);
  ConditionalCovReport r;
  r.rms = std::sqrt(s.mean);
  r.std_err = r.rms > 0.0 ? s.std_err / (2.0 * r.rms) : 0.0;
  r.mean_cov = c.mean;
  r.mean_cov_se = c.std_err;
  r.mean_linf_sq = summarize(linf).mean;
  r.trials = trials;
  return r;
}

/// A_k = 4 C_k + 4 sqrt(k) + 1 with C_k = 11.1 + 0.83 ln k. Diagnostic only.
inline double stein_diagnostic_constant(std::size_t k_blk) {
  if (k_blk < 1) throw ArgumentError("k_blk must be positive");
  const double k = static_cast<double>(k_blk);
  return 4.0 * (11.1 + 0.83 * std::log(k)) + 4.0 * std::sqrt(k) + 1.0;
}

struct VqReport {
  std::size_t d = 0;
  int layers = 3;
  double err_rht = 0.0;
  double err_rht_se = 0.0;
  double err_gauss = 0.0;
  double err_gauss_se = 0.0;
  double gap = 0.0;
  double gap_se = 0.0;
  double scaled_gap = 0.0;  ///< gap * sqrt(d / ln d)
  double rms_cov = 0.0;     ///< over all pairs inside the first block
  double stein_bound = 0.0;
  std::size_t trials = 0;
};

struct UniversalityOptions {
  int layers = 3;
  std::size_t trials = 10000;
  std::uint64_t master_seed = 1;
  std::size_t gauss_samples = 1000000;
  std::uint64_t gauss_seed = 0x5eed6a55ULL;
  Exec exec{};
};

struct UniversalityResult {
  std::vector<VqReport> rows;
  bool gap_decreasing = false;    ///< gap[i+1] <= gap[i] + 4 sigma
  bool scaled_trend_ok = false;   ///< gap * sqrt(d / ln d) non-increasing within 4 sigma
};

/// E min_c ||Z - c||^2 for Z ~ N(0, I_k), from `samples` seeded draws in fixed batches.
inline SampleSummary gaussian_block_error(const Codebook& cb, std::size_t samples, std::uint64_t seed,
                                          Exec exec = {}) {
  const std::size_t k = cb.k_blk();
  const auto batches = run_batches(samples, kDefaultBatches, exec, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    GaussianSource g(derive_seed(seed, b));
    std::vector<double> errs(hi - lo), z(k);
    for (auto& e : errs) {
      for (auto& v : z) v = g();
      e = cb.nearest(z).second;
    }
    return errs;
  });
  std::vector<double> all;
  all.reserve(samples);
  for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
  return summarize(all);
}

/// First-block quantization error of the rotated input against the Gaussian
/// reference, one row per dimension. `make_input(d)` re-embeds the input.
inline UniversalityResult verify_codebook_universality(const std::function<std::vector<double>(std::size_t)>& make_input,
                                                       const Codebook& cb, const std::vector<std::size_t>& dims,
                                                       const UniversalityOptions& opt = {}) {
  const std::size_t k = cb.k_blk();
  const SampleSummary gauss = gaussian_block_error(cb, opt.gauss_samples, opt.gauss_seed, opt.exec);
  UniversalityResult res;
  for (std::size_t d : dims) {
    if (d % k != 0) throw ArgumentError("dimension " + std::to_string(d) + " not divisible by k_blk");
    const Dim dim(d);
    const std::vector<double> x = make_input(d);
    const std::vector<double> errs = parallel_map(opt.trials, opt.exec, [&](std::size_t t) {
      const Rotation rot(RotationSpec(dim, opt.layers, derive_seed(opt.master_seed, t)));
      const auto u = normalized_rotated(x, rot);
      return cb.nearest({u.data(), k}).second;
    });
    const SampleSummary r = summarize(errs);

    double cov_sq = 0.0;
    std::size_t pairs = 0;
    if (k >= 2 && opt.layers >= 2) {
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
          const auto c = rms_conditional_cov(x, a, b, opt.layers, std::max<std::size_t>(100, opt.trials / 10),
                                             opt.master_seed ^ 0xc0feULL, opt.exec);
          cov_sq += c.rms * c.rms;
          ++pairs;
        }
      }
    }

    VqReport row;
    row.d = d;
    row.layers = opt.layers;
    row.err_rht = r.mean;
    row.err_rht_se = r.std_err;
    row.err_gauss = gauss.mean;
    row.err_gauss_se = gauss.std_err;
    row.gap = std::abs(r.mean - gauss.mean);
    row.gap_se = std::hypot(r.std_err, gauss.std_err);
    const double dd = static_cast<double>(d);
    row.scaled_gap = d > 1 ? row.gap * std::sqrt(dd / std::log(dd)) : row.gap;
    row.rms_cov = pairs ? std::sqrt(cov_sq / static_cast<double>(pairs)) : 0.0;
    row.stein_bound = stein_diagnostic_constant(k);
    row.trials = opt.trials;
    res.rows.push_back(row);
  }

  res.gap_decreasing = true;
  res.scaled_trend_ok = true;
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    const auto& a = res.rows[i - 1];
    const auto& b = res.rows[i];
    const double sigma = std::hypot(a.gap_se, b.gap_se);
    if (b.gap > a.gap + 4.0 * sigma) res.gap_decreasing = false;
    const auto factor = [](std::size_t d) {
      const double dd = static_cast<double>(d);
      return d > 1 ? std::sqrt(dd / std::log(dd)) : 1.0;
    };
    const double scaled_sigma = std::hypot(a.gap_se * factor(a.d), b.gap_se * factor(b.d));
    if (b.scaled_gap > a.scaled_gap + 4.0 * scaled_sigma) res.scaled_trend_ok = false;
  }
  return res;
}

}  // namespace rotquant
