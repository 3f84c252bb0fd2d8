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


// One line per acceptance criterion. Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "oracles/cd_table.hpp"
#include "rotquant/rotquant.hpp"

namespace rq = rotquant;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void need(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void rows(const std::vector<rq::VerifyReport>& rs) {
    for (const auto& r : rs) {
      need(r.pass, r.experiment + " d=" + std::to_string(r.d) + " " + r.statistic_name + "=" +
                       std::to_string(r.statistic) + " bound=" + std::to_string(r.bound));
    }
  }
};

rq::Exec exec() { return {std::max(1U, std::thread::hardware_concurrency())}; }

std::vector<double> gaussian(std::size_t d, std::uint64_t seed) {
  rq::GaussianSource g(seed);
  std::vector<double> x(d);
  for (auto& v : x) v = g();
  return x;
}

// Unit-vector covariance of coordinates i, j under the final plane, over all 2^d planes.
double brute_force_cov(const std::vector<double>& y, const rq::SignPlane& prev, std::size_t i, std::size_t j) {
  const std::size_t d = y.size();
  std::vector<double> z = y;
  prev.apply(z);
  rq::fwht_inplace(z);
  double sum = 0.0;
  const std::size_t planes = std::size_t{1} << d;
  for (std::size_t mask = 0; mask < planes; ++mask) {
    std::vector<double> u = z;
    for (std::size_t m = 0; m < d; ++m) {
      if ((mask >> m) & 1U) u[m] = -u[m];
    }
    rq::fwht_inplace(u);
    sum += u[i] * u[j];
  }
  return sum / static_cast<double>(planes);
}

Outcome scalar_rows(const char* prefix) {
  rq::ScalarExperiment e;
  e.exec = exec();
  Outcome o;
  for (const auto& r : rq::run_verify_scalar(e)) {
    if (r.experiment.rfind(prefix, 0) == 0) o.rows({r});
  }
  return o;
}

Outcome c3_drive_biased() {
  Outcome o;
  for (auto kind : {rq::InputKind::two_spike, rq::InputKind::one_hot}) {
    rq::DriveExperiment e;
    e.input = kind;
    e.exec = exec();
    o.rows(rq::run_verify_drive(e));
  }
  return o;
}

Outcome c4_drive_unbiased() {
  rq::DriveExperiment e;
  e.input = rq::InputKind::one_hot;
  e.mode = rq::DriveMode::unbiased;
  e.dims = {64, 256, 1024, 4096};
  e.exec = exec();
  Outcome o;
  o.rows(rq::run_verify_drive(e));
  return o;
}

Outcome c5_dme() {
  rq::DmeExperiment e;
  e.exec = exec();
  Outcome o;
  o.rows(rq::run_dme(e));
  return o;
}

Outcome c6_outliers() {
  rq::BsqExperiment e;
  e.negative_control = false;
  e.tv_rotations = 2;
  e.exec = exec();
  Outcome o;
  for (const auto& r : rq::run_verify_bsq(e)) {
    if (r.experiment == "bsq_outlier_fraction") o.rows({r});
  }
  return o;
}

Outcome c7_tv_transfer() {
  rq::BsqExperiment e;
  e.dims = {1024};
  e.ps = {};
  e.exec = exec();
  Outcome o;
  const auto rows = rq::run_verify_bsq(e);
  o.rows(rows);
  o.need(std::any_of(rows.begin(), rows.end(),
                     [](const auto& r) { return r.experiment == "bsq_tv_negative_control"; }),
         "negative control missing");
  return o;
}

Outcome c8_bottleneck() {
  Outcome o;
  std::vector<std::size_t> dims;
  for (std::size_t d = 4; d <= 256; d *= 2) dims.push_back(d);
  o.rows(rq::run_bottleneck(dims, 100, 1));
  const auto y = rq::gen_adversarial(rq::InputKind::two_spike, 8);
  for (std::size_t mask = 0; mask < 256; ++mask) {
    rq::BitVector b(8);
    for (std::size_t m = 0; m < 8; ++m) b.set(m, (mask >> m) & 1U);
    const rq::SignPlane plane(b);
    const double exact = rq::conditional_cov_exact(y, plane, 0, 1);
    o.need(std::abs(exact * exact - 1.0) <= 1e-14, "plane " + std::to_string(mask) + " not +-1");
    o.need(std::abs(exact - 8.0 * brute_force_cov(y, plane, 0, 1)) <= 1e-12,
           "plane " + std::to_string(mask) + " disagrees with brute force");
  }
  return o;
}

Outcome c9_decorrelation() {
  rq::DecorrelationExperiment e;
  e.exec = exec();
  Outcome o;
  o.rows(rq::run_decorrelation(e));
  return o;
}

Outcome c10_universality() {
  rq::VqExperiment e;
  e.exec = exec();
  Outcome o;
  o.rows(rq::run_verify_vq(e));
  return o;
}

Outcome c11_adaptive() {
  rq::AdaptiveExperiment e;
  e.exec = exec();
  Outcome o;
  o.rows(rq::run_adaptive(e));
  return o;
}

Outcome c12_cd() {
  Outcome o;
  o.rows(rq::run_cd_expansion(4, 20));
  for (std::size_t m = 0; m <= 20; ++m) {
    const double c = rq::scaling_constant_cd(std::size_t{1} << m);
    o.need(std::abs(c - kCdTable[m]) <= 1e-12 * kCdTable[m], "c_d table at m=" + std::to_string(m));
  }
  return o;
}

Outcome c13_structural() {
  Outcome o;
  // Trivial examples.
  o.need(rq::fwht({5.0}) == std::vector<double>{5.0}, "fwht d=1");
  o.need(rq::fwht({1.0, 1.0, 1.0, 1.0}) == std::vector<double>{2.0, 0.0, 0.0, 0.0}, "fwht flat d=4");
  const std::vector<double> x4{1.0, -2.0, 3.0, 0.5};
  o.need(rq::apply_rotation(x4, rq::RotationSpec(rq::Dim(4), 0, 5)) == x4, "layers=0 identity");
  const auto sv = rq::sign_vector(std::vector<double>{0.5, -0.5, 0.0});
  o.need(!sv.test(0) && sv.test(1) && !sv.test(2), "sign convention");
  o.need(rq::normal_cdf(0.0) == 0.5, "Phi(0)");
  const auto st = rq::moment_scan(std::vector<double>{3.0, 4.0});
  o.need(st.s2 == 25.0 && st.s3 == 91.0 && st.m2 == 16.0, "moment_scan (3,4)");
  o.need(rq::scaling_constant_cd(1) == 1.0, "c_1");
  o.need(rq::decide_layers(rq::gen_adversarial(rq::InputKind::one_hot, 8)).rho3 == 1.0, "rho3 one_hot");

  // Codec round trip and fuzz.
  std::size_t fuzz_cases = 0, escapes = 0;
  for (std::uint64_t s = 0; s < 300; ++s) {
    rq::Xoshiro256pp rng(s);
    const std::size_t d = std::size_t{1} << (rng() % 11);
    const rq::RotationSpec spec(rq::Dim(d), static_cast<int>(rng() % 4), rng());
    const auto x = gaussian(d, rng());
    const auto dp = rq::drive_encode(x, spec, s % 2 ? rq::DriveMode::biased : rq::DriveMode::unbiased);
    const auto bp = rq::bsq_encode(x, spec, rq::BsqConfig::make(1 + static_cast<int>(rng() % 12), 0.05), rng());
    const std::vector<std::vector<std::uint8_t>> streams{rq::serialize(dp), rq::serialize(bp), rq::serialize(x)};
    o.need(rq::deserialize_as<rq::DrivePayload>(streams[0]) == dp, "drive round trip");
    o.need(rq::deserialize_as<rq::BsqPayload>(streams[1]) == bp, "bsq round trip");
    o.need(rq::deserialize_as<std::vector<double>>(streams[2]) == x, "vector round trip");
    for (const auto& good : streams) {
      for (int m = 0; m < 12; ++m) {
        auto b = good;
        const std::size_t at = rng() % b.size();
        if (m % 3 == 2) {
          b.resize(at);
        } else {
          b[at] ^= static_cast<std::uint8_t>(1U << (rng() % 8));
        }
        ++fuzz_cases;
        try {
          rq::deserialize(b);
        } catch (const rq::FormatError&) {
        } catch (...) {
          ++escapes;
        }
      }
    }
  }
  o.need(escapes == 0, std::to_string(escapes) + " non-format exceptions in fuzz");
  o.need(fuzz_cases >= 10000, "fuzz too small");

  // One RHT of a unit vector with entries in {0, +-1/sqrt(2)} stays on that set.
  const std::vector<double> spike{std::sqrt(0.5), std::sqrt(0.5), 0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    for (double v : rq::apply_rotation(spike, rq::RotationSpec(rq::Dim(4), 1, seed))) {
      const double a = std::abs(v);
      o.need(a < 1e-15 || std::abs(a - std::sqrt(0.5)) < 1e-15, "discrete support");
    }
  }
  const auto hot = rq::gen_adversarial(rq::InputKind::one_hot, 1024);
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    for (double v : rq::apply_rotation(hot, rq::RotationSpec(rq::Dim(1024), 1, seed))) {
      o.need(std::abs(std::abs(v) - 1.0 / 32.0) < 1e-15, "one_hot support");
    }
  }

  // Reports do not depend on the thread count.
  const auto same = [&](auto run, auto e, const char* name) {
    e.exec = {1};
    const auto a = run(e);
    e.exec = {7};
    const auto b = run(e);
    bool eq = a.size() == b.size();
    for (std::size_t i = 0; eq && i < a.size(); ++i) eq = rq::to_json(a[i]).dump() == rq::to_json(b[i]).dump();
    o.need(eq, std::string(name) + " differs across thread counts");
  };
  rq::ScalarExperiment se;
  se.dims = {256};
  se.rotations = 300;
  same(rq::run_verify_scalar, se, "scalar");
  rq::DriveExperiment de;
  de.dims = {256, 1024};
  de.trials = 500;
  de.mode = rq::DriveMode::unbiased;
  same(rq::run_verify_drive, de, "drive");
  rq::DmeExperiment me;
  me.d = 256;
  me.trials = 100;
  same(rq::run_dme, me, "dme");
  rq::BsqExperiment be;
  be.dims = {256};
  be.draws = 50000;
  be.tv_rotations = 50;
  same(rq::run_verify_bsq, be, "bsq");
  rq::DecorrelationExperiment ce;
  ce.dims = {256};
  ce.trials = 100;
  same(rq::run_decorrelation, ce, "decorrelation");
  rq::VqExperiment ve;
  ve.dims = {64, 256};
  ve.trials = 200;
  ve.train_samples = 5000;
  ve.gauss_samples = 20000;
  same(rq::run_verify_vq, ve, "vq");
  rq::AdaptiveExperiment ae;
  ae.d = 256;
  ae.soundness_inputs = 3;
  ae.draws = 20000;
  same(rq::run_adaptive, ae, "adaptive");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"scalar d_K under two RHTs", [] { return scalar_rows("scalar_dk"); }},
      {"scalar W1 under two RHTs", [] { return scalar_rows("scalar_w1"); }},
      {"biased DRIVE vNMSE", c3_drive_biased},
      {"unbiased DRIVE variance and bias trend", c4_drive_unbiased},
      {"distributed mean estimation", c5_dme},
      {"outlier fraction", c6_outliers},
      {"TV transfer with negative control", c7_tv_transfer},
      {"two-RHT covariance bottleneck", c8_bottleneck},
      {"three-RHT decorrelation", c9_decorrelation},
      {"codebook universality", c10_universality},
      {"adaptive layer selection", c11_adaptive},
      {"c_d expansion and table", c12_cd},
      {"structural checks", c13_structural},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %zu: %s (%.1f s)%s%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                o.detail.empty() ? "" : " -- ", o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
