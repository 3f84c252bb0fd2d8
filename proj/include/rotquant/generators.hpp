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
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rotquant/bsq.hpp"
#include "rotquant/core.hpp"
#include "rotquant/error.hpp"
#include "rotquant/random.hpp"

namespace rotquant {

enum class InputKind { one_hot, two_spike, flat, grid_midpoints, dirichlet_random };

inline const char* to_string(InputKind k) {
  switch (k) {
    case InputKind::one_hot: return "one_hot";
    case InputKind::two_spike: return "two_spike";
    case InputKind::flat: return "flat";
    case InputKind::grid_midpoints: return "grid_midpoints";
    case InputKind::dirichlet_random: return "dirichlet_random";
  }
  return "?";
}

inline InputKind parse_input_kind(std::string_view s) {
  for (auto k : {InputKind::one_hot, InputKind::two_spike, InputKind::flat, InputKind::grid_midpoints,
                 InputKind::dirichlet_random}) {
    if (s == to_string(k)) return k;
  }
  throw ArgumentError("unknown input kind '" + std::string(s) + "'");
}

enum class PadPolicy { reject, pad };

/// Zero-pads to the next power of two. The norm is unchanged.
inline std::vector<double> pad_to_power_of_two(std::vector<double> x) {
  if (x.empty()) throw ArgumentError("cannot pad an empty vector");
  x.resize(std::bit_ceil(x.size()), 0.0);
  return x;
}

/// Unit vector whose unrotated normalized coordinates sqrt(d) x_i all sit at
/// midpoints of the quantizer's cells: v = 2 t_p / 3 on round(d / v^2)
/// coordinates and 0 elsewhere. Each coordinate then has the largest
/// possible error w^2 / 4. Meant for b = 2, where 0 and +-2t/3 are midpoints.
inline std::vector<double> gen_grid_midpoints(std::size_t d, const BsqConfig& cfg) {
  const double v = 2.0 * cfg.t_p / 3.0;
  auto n1 = static_cast<std::size_t>(std::llround(static_cast<double>(d) / (v * v)));
  n1 = std::clamp<std::size_t>(n1, 1, d);
  std::vector<double> x(d, 0.0);
  for (std::size_t i = 0; i < n1; ++i) x[i] = (i % 2 == 0) ? v : -v;
  return normalized(x);
}

namespace detail {

inline std::vector<double> raw_input(InputKind kind, std::size_t d, std::uint64_t seed) {
  std::vector<double> x(d, 0.0);
  switch (kind) {
    case InputKind::one_hot:
      x[0] = 1.0;
      return x;
    case InputKind::two_spike:
      if (d < 2) throw ArgumentError("two_spike needs d >= 2");
      x[0] = x[1] = std::sqrt(0.5);
      return x;
    case InputKind::flat:
      for (auto& v : x) v = 1.0 / std::sqrt(static_cast<double>(d));
      return x;
    case InputKind::grid_midpoints:
      return gen_grid_midpoints(d, BsqConfig::make(2, 0.01));
    case InputKind::dirichlet_random: {
      Xoshiro256pp rng(splitmix64(seed));
      double total = 0.0;
      for (auto& v : x) {
        v = -std::log1p(-rng.uniform());
        total += v;
      }
      for (auto& v : x) {
        const double mag = std::sqrt(v / total);
        v = (rng() >> 63) ? -mag : mag;
      }
      return x;
    }
  }
  throw ArgumentError("unknown input kind");
}

}  // namespace detail

/// Unit-norm adversarial inputs. `seed` matters only for dirichlet_random,
/// which draws weights w ~ Dirichlet(1, ..., 1) and returns +-sqrt(w_i).
/// With PadPolicy::pad a non-power-of-two d is generated at length d, then
/// zero-padded.
inline std::vector<double> gen_adversarial(InputKind kind, std::size_t d, std::uint64_t seed = 0,
                                           PadPolicy pad = PadPolicy::reject) {
  if (d == 0) throw ArgumentError("dimension must be positive");
  if (is_power_of_two(d)) return detail::raw_input(kind, d, seed);
  if (pad == PadPolicy::reject) throw DimensionError("dimension " + std::to_string(d) + " is not a power of two");
  return pad_to_power_of_two(detail::raw_input(kind, d, seed));
}

}  // namespace rotquant
