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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rotquant/bsq.hpp"
#include "rotquant/generators.hpp"

namespace rq = rotquant;

namespace {

std::vector<double> random_vector(std::size_t d, std::uint64_t seed) {
  rq::GaussianSource g(seed);
  std::vector<double> x(d);
  for (auto& v : x) v = g();
  return x;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TEST(Threshold, Values) {
  EXPECT_NEAR(rq::threshold_for_p(0.1), 1.6448536269514727149, 1e-13);
  EXPECT_NEAR(rq::threshold_for_p(0.05), 1.9599639845400542355, 1e-13);
  EXPECT_NEAR(rq::threshold_for_p(0.01), 2.5758293035489007610, 1e-13);
  EXPECT_THROW(rq::threshold_for_p(0.0), rq::ArgumentError);
  EXPECT_THROW(rq::threshold_for_p(1.0), rq::ArgumentError);
}

TEST(BsqConfig, Grid) {
  const auto cfg = rq::BsqConfig::make(2, 0.01);
  ASSERT_EQ(cfg.level_count(), 4u);
  EXPECT_EQ(cfg.levels.front(), -cfg.t_p);
  EXPECT_EQ(cfg.levels.back(), cfg.t_p);
  EXPECT_NEAR(cfg.levels[1], -cfg.t_p / 3.0, 1e-15);
  EXPECT_NEAR(cfg.levels[2], cfg.t_p / 3.0, 1e-15);
  EXPECT_THROW(rq::BsqConfig::make(0, 0.01), rq::ArgumentError);
  EXPECT_THROW(rq::BsqConfig::make(25, 0.01), rq::ArgumentError);
}

TEST(BsqConfig, CellOf) {
  const auto cfg = rq::BsqConfig::make(3, 0.05);
  for (std::size_t i = 0; i + 1 < cfg.level_count(); ++i) {
    const double mid = 0.5 * (cfg.levels[i] + cfg.levels[i + 1]);
    EXPECT_EQ(cfg.cell_of(mid), i);
  }
  EXPECT_EQ(cfg.cell_of(-cfg.t_p), 0u);
  EXPECT_EQ(cfg.cell_of(cfg.t_p), cfg.level_count() - 2);
}

TEST(ErrorFunction, Shape) {
  const auto cfg = rq::BsqConfig::make(2, 0.01);
  const rq::ErrorFunction e(cfg);
  const double w = 2.0 * cfg.t_p / 3.0;
  EXPECT_DOUBLE_EQ(e(cfg.levels[1]), 0.0);
  EXPECT_NEAR(e(0.0), w * w / 4.0, 1e-15);
  EXPECT_EQ(e(cfg.t_p + 1e-9), 0.0);
  EXPECT_EQ(e(-cfg.t_p - 5.0), 0.0);
}

TEST(TotalVariation, Examples) {
  const auto two = rq::BsqConfig::make(2, 0.01);
  EXPECT_NEAR(rq::tv_of_error_function(two), 2.0 * two.t_p * two.t_p / 3.0, 1e-14);
  const auto one = rq::BsqConfig::make(1, 0.1);
  EXPECT_NEAR(rq::tv_of_error_function(one), 2.0 * one.t_p * one.t_p, 1e-14);
}

// Variation summed along a fine partition approaches TV from below.
TEST(TotalVariation, PartitionRefinementOracle) {
  for (int bits : {1, 2, 3, 5}) {
    const auto cfg = rq::BsqConfig::make(bits, 0.05);
    const rq::ErrorFunction e(cfg);
    const double lo = -cfg.t_p - 1.0;
    const double hi = cfg.t_p + 1.0;
    const int n = 1000000;
    double tv = 0.0;
    double prev = e(lo);
    for (int k = 1; k <= n; ++k) {
      const double z = lo + (hi - lo) * k / n;
      const double cur = e(z);
      tv += std::abs(cur - prev);
      prev = cur;
    }
    const double exact = rq::tv_of_error_function(cfg);
    EXPECT_LE(tv, exact * (1.0 + 1e-12)) << bits;
    EXPECT_NEAR(tv, exact, 1e-4 * exact) << bits;
  }
}

TEST(GaussianError, MatchesHighPrecisionQuadrature) {
  EXPECT_NEAR(rq::expected_error_gaussian(rq::BsqConfig::make(1, 0.01)), 5.65303929463204444782, 1e-12);
  EXPECT_NEAR(rq::expected_error_gaussian(rq::BsqConfig::make(2, 0.01)), 0.488259822471567122339, 1e-13);
  EXPECT_NEAR(rq::expected_error_gaussian(rq::BsqConfig::make(3, 0.1)), 0.0331751407702426241737, 1e-14);
  EXPECT_NEAR(rq::expected_error_gaussian(rq::BsqConfig::make(4, 0.01)), 0.0194652127146297835200, 1e-14);
}

TEST(GaussianError, DecreasesWithBits) {
  double prev = INFINITY;
  for (int b = 1; b <= 12; ++b) {
    const double v = rq::expected_error_gaussian(rq::BsqConfig::make(b, 0.01));
    EXPECT_LT(v, prev) << b;
    prev = v;
  }
}

// Every normalized coordinate of a flat vector is +-1, beyond t_p for p = 0.5,
// so with no rotation each value travels verbatim.
TEST(Bsq, PureOutlierRoundTrip) {
  const std::size_t d = 64;
  std::vector<double> x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = (i % 3 == 0 ? -1.0 : 1.0) * 0.37;
  const auto cfg = rq::BsqConfig::make(2, 0.5);
  const auto p = rq::bsq_encode(x, rq::RotationSpec(rq::Dim(d), 0, 0), cfg, 1);
  EXPECT_EQ(p.outliers.size(), d);
  EXPECT_TRUE(p.levels.empty());
  EXPECT_DOUBLE_EQ(p.sent_fraction(), 1.0);
  const auto xh = rq::bsq_decode(p);
  for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(xh[i], x[i], 1e-15);
}

TEST(Bsq, HighResolutionRoundTrip) {
  const std::size_t d = 1024;
  const auto x = random_vector(d, 8);
  const auto cfg = rq::BsqConfig::make(16, 0.01);
  const auto p = rq::bsq_encode(x, rq::RotationSpec(rq::Dim(d), 2, 3), cfg, 4);
  const auto xh = rq::bsq_decode(p);
  const double w = 2.0 * cfg.t_p / 65535.0;
  double err = 0.0;
  for (std::size_t i = 0; i < d; ++i) err += (xh[i] - x[i]) * (xh[i] - x[i]);
  EXPECT_LE(std::sqrt(err), p.scale * w * std::sqrt(static_cast<double>(d)));
}

// For a fixed rotation the stochastic rounding is unbiased coordinate by coordinate.
TEST(Bsq, ConditionallyUnbiased) {
  const std::size_t d = 64;
  const auto x = random_vector(d, 12);
  const rq::RotationSpec spec(rq::Dim(d), 2, 5);
  const auto cfg = rq::BsqConfig::make(2, 0.05);
  const auto u = rq::normalized_rotated(x, rq::Rotation(spec));
  std::vector<double> mean(d, 0.0);
  const int n = 100000;
  for (int s = 0; s < n; ++s) {
    const auto uh = rq::bsq_reconstruct_rotated(rq::bsq_encode(x, spec, cfg, static_cast<std::uint64_t>(s)));
    for (std::size_t i = 0; i < d; ++i) mean[i] += uh[i] / n;
  }
  const double w = 2.0 * cfg.t_p / 3.0;
  for (std::size_t i = 0; i < d; ++i) {
    // Per-draw variance is at most w^2 / 4.
    EXPECT_NEAR(mean[i], u[i], 5.0 * 0.5 * w / std::sqrt(static_cast<double>(n))) << i;
  }
}

TEST(Bsq, Deterministic) {
  const auto x = random_vector(256, 1);
  const rq::RotationSpec spec(rq::Dim(256), 2, 9);
  const auto cfg = rq::BsqConfig::make(3, 0.01);
  EXPECT_EQ(rq::bsq_encode(x, spec, cfg, 7), rq::bsq_encode(x, spec, cfg, 7));
  EXPECT_NE(rq::bsq_encode(x, spec, cfg, 7).levels, rq::bsq_encode(x, spec, cfg, 8).levels);
}

TEST(Bsq, BandwidthAccounting) {
  const std::size_t d = 4096;
  const auto x = rq::gen_adversarial(rq::InputKind::two_spike, d);
  const auto cfg = rq::BsqConfig::make(3, 0.01);
  const auto p = rq::bsq_encode(x, rq::RotationSpec(rq::Dim(d), 2, 1), cfg, 2);
  EXPECT_EQ(p.outliers.size() + p.levels.size(), d);
  EXPECT_EQ(p.wire_bytes(), 24 + 25 + 12 * p.outliers.size() + (3 * p.levels.size() + 7) / 8);
  EXPECT_NEAR(p.sent_fraction(), 0.01, 0.006);
}

TEST(Bsq, OutlierFractionMatchesP) {
  const std::size_t d = 1024;
  const auto x = rq::gen_adversarial(rq::InputKind::two_spike, d);
  for (double p : {0.1, 0.01}) {
    const auto f = rq::measure_outlier_fraction(x, rq::RotationSpec(rq::Dim(d), 2, 1), rq::threshold_for_p(p), 200);
    EXPECT_NEAR(f.fraction, p, 4.0 * f.std_err + 0.002) << p;
    EXPECT_EQ(f.draws, 200 * d);
  }
}

// One RHT maps a two-spike input onto {0, +-sqrt 2}, which never crosses
// t_{0.1} ~ 1.645: the outlier budget is missed completely.
TEST(Bsq, OneLayerContrast) {
  const std::size_t d = 1024;
  const auto x = rq::gen_adversarial(rq::InputKind::two_spike, d);
  const auto f = rq::measure_outlier_fraction(x, rq::RotationSpec(rq::Dim(d), 1, 1), rq::threshold_for_p(0.1), 50);
  EXPECT_EQ(f.fraction, 0.0);
}

TEST(Bsq, ReconstructRejectsMalformed) {
  const auto x = random_vector(16, 2);
  const auto cfg = rq::BsqConfig::make(2, 0.5);
  const auto good = rq::bsq_encode(x, rq::RotationSpec(rq::Dim(16), 2, 1), cfg, 1);
  ASSERT_GE(good.outliers.size(), 2u);
  ASSERT_GE(good.levels.size(), 1u);

  const auto field_of = [](const rq::BsqPayload& p) {
    try {
      rq::bsq_reconstruct_rotated(p);
    } catch (const rq::FormatError& e) {
      return e.field();
    }
    return std::string("none");
  };
  auto p = good;
  p.levels.pop_back();
  EXPECT_EQ(field_of(p), "levels");
  p = good;
  p.levels[0] = 4;
  EXPECT_EQ(field_of(p), "levels");
  p = good;
  p.outliers[0].index = 16;
  EXPECT_EQ(field_of(p), "outliers.index");
  p = good;
  p.outliers[1].index = p.outliers[0].index;
  EXPECT_EQ(field_of(p), "outliers.index");
  p = good;
  p.outliers[0].value = 0.1;
  EXPECT_EQ(field_of(p), "outliers.value");
  EXPECT_EQ(field_of(good), "none");
}

TEST(TvTransfer, PassesForTwoLayers) {
  const std::size_t d = 1024;
  const auto x = rq::gen_adversarial(rq::InputKind::two_spike, d);
  const auto r = rq::verify_tv_transfer(x, rq::RotationSpec(rq::Dim(d), 2, 1), rq::BsqConfig::make(2, 0.01), 300);
  EXPECT_TRUE(r.pass) << r.statistic << " vs " << r.bound;
  EXPECT_EQ(r.experiment, "bsq_tv_transfer");
}

TEST(TvTransfer, GridMidpointsWithoutRotationExceedBound) {
  const std::size_t d = 1024;
  const auto cfg = rq::BsqConfig::make(2, 0.01);
  const auto g = rq::gen_grid_midpoints(d, cfg);
  const auto r = rq::verify_tv_transfer(g, rq::RotationSpec(rq::Dim(d), 0, 1), cfg, 10, {}, rq::Check::exceeds);
  EXPECT_GT(r.statistic, r.bound);
  EXPECT_TRUE(r.pass);
}

TEST(TvTransfer, DimensionOneIsFlagged) {
  const std::vector<double> x{1.0};
  const auto r = rq::verify_tv_transfer(x, rq::RotationSpec(rq::Dim(1), 2, 1), rq::BsqConfig::make(2, 0.01), 10);
  EXPECT_NE(r.note.find("degenerate(d=1)"), std::string::npos);
}

TEST(Threshold, NearOne) {
  const double t = rq::threshold_for_p(0.9999);
  EXPECT_NEAR(t, 5e-5 * std::sqrt(2.0 * M_PI), 1e-12);
  EXPECT_GT(t, 0.0);
}

TEST(TotalVariation, UnitThreshold) {
  const double p = std::erfc(1.0 / std::sqrt(2.0));
  const auto one = rq::BsqConfig::make(1, p);
  EXPECT_NEAR(one.t_p, 1.0, 1e-14);
  EXPECT_NEAR(rq::tv_of_error_function(one), 2.0, 1e-13);
}

// TV = 2 t^2 / (2^b - 1): one more bit cuts it by (2^(b+1) - 1) / (2^b - 1), about half.
TEST(TotalVariation, ExtraBitRoughlyHalves) {
  for (int b = 1; b < 12; ++b) {
    const double a = rq::tv_of_error_function(rq::BsqConfig::make(b, 0.01));
    const double c = rq::tv_of_error_function(rq::BsqConfig::make(b + 1, 0.01));
    const double n = std::ldexp(1.0, b);
    EXPECT_NEAR(a / c, (2.0 * n - 1.0) / (n - 1.0), 1e-12) << b;
  }
}

// Uniform partition refined with the grid levels, where e has its kinks.
TEST(TotalVariation, PartitionOracleAbsolute) {
  for (int bits : {1, 2, 3}) {
    const auto cfg = rq::BsqConfig::make(bits, 0.01);
    const rq::ErrorFunction e(cfg);
    const double lo = -cfg.t_p - 1.0;
    const double hi = cfg.t_p + 1.0;
    const int n = 1000000;
    std::vector<double> pts(cfg.levels.begin(), cfg.levels.end());
    for (int k = 0; k <= n; ++k) pts.push_back(lo + (hi - lo) * k / n);
    std::sort(pts.begin(), pts.end());
    double tv = 0.0;
    for (std::size_t k = 1; k < pts.size(); ++k) tv += std::abs(e(pts[k]) - e(pts[k - 1]));
    EXPECT_NEAR(tv, rq::tv_of_error_function(cfg), 1e-6) << bits;
  }
}

TEST(GaussianError, Limits) {
  EXPECT_LE(rq::expected_error_gaussian(rq::BsqConfig::make(16, 0.01)), 1e-6);
  double prev = INFINITY;
  for (double p : {0.01, 0.1, 0.5, 0.9, 0.9999}) {
    const double v = rq::expected_error_gaussian(rq::BsqConfig::make(2, p));
    EXPECT_LT(v, prev) << p;
    prev = v;
  }
  EXPECT_LT(prev, 1e-12);
  for (double p : {0.1, 0.01}) {
    double last = INFINITY;
    for (int b = 1; b <= 8; ++b) {
      const double v = rq::expected_error_gaussian(rq::BsqConfig::make(b, p));
      EXPECT_LE(v, last) << b << " " << p;
      last = v;
    }
  }
}

TEST(Bsq, NearlyAllOutliers) {
  const std::size_t d = 256;
  const auto x = random_vector(d, 30);
  const auto p = rq::bsq_encode(x, rq::RotationSpec(rq::Dim(d), 2, 1), rq::BsqConfig::make(2, 0.9999), 3);
  EXPECT_EQ(p.outliers.size(), d);
  const auto xh = rq::bsq_decode(p);
  for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(xh[i], x[i], 1e-12);
}

// A coordinate sitting on a grid level rounds to that level whatever the noise.
TEST(Bsq, GridLevelIsStoredExactly) {
  const auto cfg = rq::BsqConfig::make(2, 0.01);
  const double z = cfg.levels[2];
  const std::vector<double> x{z, std::sqrt(2.0 - z * z)};
  const rq::RotationSpec spec(rq::Dim(2), 0, 0);
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto p = rq::bsq_encode(x, spec, cfg, s);
    ASSERT_EQ(p.levels.size(), 2u);
    EXPECT_EQ(p.levels[0], 2u) << s;
    EXPECT_NEAR(rq::bsq_reconstruct_rotated(p)[0], z, 1e-15);
  }
}

TEST(Bsq, SixteenBitsAtHalfMass) {
  const std::size_t d = 1024;
  std::vector<double> x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = std::sin(0.01 * static_cast<double>(i)) + 0.2;
  const auto xh = rq::bsq_decode(rq::bsq_encode(x, rq::RotationSpec(rq::Dim(d), 2, 8), rq::BsqConfig::make(16, 0.5), 9));
  const double n = rq::norm2(x);
  EXPECT_LE(sq_dist(xh, x) / (n * n), 1e-7);
}
