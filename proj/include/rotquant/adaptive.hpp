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

// Runtime choice of how many RHT layers an input actually needs, from one
// O(d) scan of its moments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ranges>
#include <span>
#include <utility>

#include "rotquant/core.hpp"
#include "rotquant/error.hpp"
#include "rotquant/metrics.hpp"

namespace rotquant {

struct AdaptiveDecision {
  double rho3 = 0.0;
  double linf_sq = 0.0;
  double eta3 = 0.0;
  double eta_inf = 0.0;
  int scalar_layers = 2;
  int vq_layers = 3;

  /// Guarantees implied by the decision when it relaxes a layer.
  double dk_bound() const noexcept { return constants::berry_esseen * eta3; }
  double w1_bound() const noexcept { return constants::c_w * eta3; }
  double rms_cov_bound() const noexcept { return 2.0 * std::sqrt(eta_inf); }
};

inline double default_eta3(std::size_t d) { return constants::c3 / std::sqrt(static_cast<double>(d)); }

inline double default_eta_inf(std::size_t d) {
  const double dd = static_cast<double>(d);
  return 2.0 * std::log(2.0 * dd) / dd;
}

/// Decision from precomputed moments, so callers can supply their own scan.
inline AdaptiveDecision decide_from_stats(const FlatnessStats& st, std::size_t d, std::optional<double> eta3,
                                          std::optional<double> eta_inf) {
  AdaptiveDecision out;
  out.rho3 = st.rho3();
  out.linf_sq = st.linf_sq();
  out.eta3 = eta3.value_or(default_eta3(d));
  out.eta_inf = eta_inf.value_or(default_eta_inf(d));
  out.scalar_layers = out.rho3 <= out.eta3 ? 1 : 2;
  out.vq_layers = out.linf_sq <= out.eta_inf ? 2 : 3;
  return out;
}

/// One pass over x. Accepts any sized range of doubles.
template <std::ranges::sized_range R>
AdaptiveDecision decide_layers(R&& x, std::optional<double> eta3 = std::nullopt,
                               std::optional<double> eta_inf = std::nullopt) {
  const auto d = static_cast<std::size_t>(std::ranges::size(x));
  const FlatnessStats st = moment_scan(std::forward<R>(x));
  return decide_from_stats(st, d, eta3, eta_inf);
}

inline AdaptiveDecision decide_layers(std::span<const double> x, std::optional<double> eta3 = std::nullopt,
                                      std::optional<double> eta_inf = std::nullopt) {
  return decide_layers<std::span<const double>>(std::move(x), eta3, eta_inf);
}

enum class Task { scalar, vq };

/// base_spec with layers lowered where the decision allows; never raised.
inline std::pair<RotationSpec, AdaptiveDecision> pipeline_with_adaptivity(std::span<const double> x, Task task,
                                                                          const RotationSpec& base_spec,
                                                                          std::optional<double> eta3 = std::nullopt,
                                                                          std::optional<double> eta_inf = std::nullopt) {
  const AdaptiveDecision dec = decide_layers(x, eta3, eta_inf);
  const int wanted = task == Task::scalar ? dec.scalar_layers : dec.vq_layers;
  return {base_spec.with_layers(std::min(base_spec.layers, wanted)), dec};
}

}  // namespace rotquant
