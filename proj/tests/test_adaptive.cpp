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
#include <ranges>
#include <vector>

#include "rotquant/adaptive.hpp"
#include "rotquant/generators.hpp"
#include "rotquant/harness.hpp"

namespace rq = rotquant;

TEST(Thresholds, Defaults) {
  EXPECT_NEAR(rq::default_eta3(1024), std::pow(3.0, 0.75) / 32.0, 1e-15);
  EXPECT_NEAR(rq::default_eta_inf(1024), 2.0 * std::log(2048.0) / 1024.0, 1e-15);
}

TEST(Decide, Examples) {
  const std::size_t d = 1024;
  const auto hot = rq::decide_layers(rq::gen_adversarial(rq::InputKind::one_hot, d));
  EXPECT_EQ(hot.scalar_layers, 2);
  EXPECT_EQ(hot.vq_layers, 3);
  EXPECT_DOUBLE_EQ(hot.rho3, 1.0);
  EXPECT_DOUBLE_EQ(hot.linf_sq, 1.0);

  const auto spike = rq::decide_layers(rq::gen_adversarial(rq::InputKind::two_spike, d));
  EXPECT_EQ(spike.scalar_layers, 2);
  EXPECT_EQ(spike.vq_layers, 3);
  EXPECT_NEAR(spike.rho3, 1.0 / std::sqrt(2.0), 1e-15);

  const auto flat = rq::decide_layers(rq::gen_adversarial(rq::InputKind::flat, d));
  EXPECT_EQ(flat.scalar_layers, 1);
  EXPECT_EQ(flat.vq_layers, 2);
  EXPECT_NEAR(flat.rho3, 1.0 / 32.0, 1e-15);
  EXPECT_NEAR(flat.linf_sq, 1.0 / 1024.0, 1e-18);
}

TEST(Decide, ExplicitThresholds) {
  const std::vector<double> x{3.0, 4.0};
  const auto loose = rq::decide_layers(x, 1.0, 1.0);
  EXPECT_EQ(loose.scalar_layers, 1);
  EXPECT_EQ(loose.vq_layers, 2);
  const auto tight = rq::decide_layers(x, 0.5, 0.5);
  EXPECT_EQ(tight.scalar_layers, 2);
  EXPECT_EQ(tight.vq_layers, 3);
  // Boundary is inclusive.
  const auto edge = rq::decide_layers(x, 91.0 / 125.0, 16.0 / 25.0);
  EXPECT_EQ(edge.scalar_layers, 1);
  EXPECT_EQ(edge.vq_layers, 2);
}

TEST(Decide, Bounds) {
  const auto dec = rq::decide_layers(std::vector<double>(64, 1.0));
  EXPECT_NEAR(dec.dk_bound(), 0.5606 * dec.eta3, 1e-15);
  EXPECT_NEAR(dec.w1_bound(), 3.0 * dec.eta3, 1e-15);
  EXPECT_NEAR(dec.rms_cov_bound(), 2.0 * std::sqrt(dec.eta_inf), 1e-15);
}

TEST(Decide, SinglePass) {
  const auto x = rq::gen_adversarial(rq::InputKind::dirichlet_random, 4096, 3);
  std::size_t reads = 0;
  auto counted = x | std::views::transform([&](double v) {
                   ++reads;
                   return v;
                 });
  const auto dec = rq::decide_layers(counted);
  EXPECT_EQ(reads, x.size());
  const auto ref = rq::decide_layers(x);
  EXPECT_EQ(dec.rho3, ref.rho3);
  EXPECT_EQ(dec.linf_sq, ref.linf_sq);
}

TEST(Decide, ScaleAndPermutationInvariance) {
  auto x = rq::gen_adversarial(rq::InputKind::dirichlet_random, 512, 9);
  const auto base = rq::decide_layers(x);
  std::vector<double> scaled = x;
  for (auto& v : scaled) v *= 1e-3;
  const auto s = rq::decide_layers(scaled);
  EXPECT_NEAR(s.rho3, base.rho3, 1e-12 * base.rho3);
  EXPECT_NEAR(s.linf_sq, base.linf_sq, 1e-12 * base.linf_sq);
  EXPECT_EQ(s.scalar_layers, base.scalar_layers);
  EXPECT_EQ(s.vq_layers, base.vq_layers);
  std::reverse(x.begin(), x.end());
  std::rotate(x.begin(), x.begin() + 100, x.end());
  const auto p = rq::decide_layers(x);
  EXPECT_NEAR(p.rho3, base.rho3, 1e-12 * base.rho3);
  EXPECT_NEAR(p.linf_sq, base.linf_sq, 1e-12 * base.linf_sq);
}

TEST(Pipeline, LowersButNeverRaises) {
  const std::size_t d = 256;
  const auto flat = rq::gen_adversarial(rq::InputKind::flat, d);
  const auto hot = rq::gen_adversarial(rq::InputKind::one_hot, d);
  const rq::RotationSpec two(rq::Dim(d), 2, 5);
  const rq::RotationSpec three(rq::Dim(d), 3, 5);

  EXPECT_EQ(rq::pipeline_with_adaptivity(flat, rq::Task::scalar, two).first.layers, 1);
  EXPECT_EQ(rq::pipeline_with_adaptivity(flat, rq::Task::vq, three).first.layers, 2);
  EXPECT_EQ(rq::pipeline_with_adaptivity(hot, rq::Task::scalar, two).first.layers, 2);
  EXPECT_EQ(rq::pipeline_with_adaptivity(hot, rq::Task::vq, three).first.layers, 3);
  EXPECT_EQ(rq::pipeline_with_adaptivity(hot, rq::Task::vq, two.with_layers(1)).first.layers, 1);
  const auto [spec, dec] = rq::pipeline_with_adaptivity(flat, rq::Task::vq, three);
  EXPECT_EQ(spec.seed, 5u);
  EXPECT_EQ(dec.vq_layers, 2);
}

TEST(Decide, EmptyInput) {
  EXPECT_THROW(rq::decide_layers(std::vector<double>{}), rq::ArgumentError);
}

TEST(Decide, RotatedOneHotIsFlat) {
  const std::size_t d = 1024;
  const auto y = rq::apply_rotation(rq::gen_adversarial(rq::InputKind::one_hot, d), rq::RotationSpec(rq::Dim(d), 1, 7));
  const auto dec = rq::decide_layers(y);
  EXPECT_EQ(dec.scalar_layers, 1);
  EXPECT_EQ(dec.vq_layers, 2);
}

// Whatever the check lets through with one RHT meets the one-RHT d_K bound.
TEST(Pipeline, OneLayerScalarBoundHolds) {
  const std::size_t d = 1024;
  const auto flat = rq::gen_adversarial(rq::InputKind::flat, d);
  const auto [spec, dec] = rq::pipeline_with_adaptivity(flat, rq::Task::scalar, rq::RotationSpec(rq::Dim(d), 2, 3));
  ASSERT_EQ(spec.layers, 1);
  EXPECT_EQ(dec.scalar_layers, 1);
  rq::ScalarExperiment e;
  e.input = rq::InputKind::dirichlet_random;
  e.dims = {d};
  e.layers = 1;
  e.draws = 200000;
  const auto x = rq::gen_adversarial(e.input, d, e.master_seed);
  ASSERT_EQ(rq::decide_layers(x).scalar_layers, 1);
  for (const auto& r : rq::run_verify_scalar(e)) EXPECT_TRUE(r.pass) << r.experiment << " " << r.statistic;
}
