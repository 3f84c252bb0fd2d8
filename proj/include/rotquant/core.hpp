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

// Fast Walsh-Hadamard transform and composed randomized Hadamard rotations.
//
// The Hadamard matrix is always Sylvester (natural) ordered, H_{ij} =
// (-1)^{popcount(i & j)}. The XOR identity H_{ir} H_{jr} = H_{i^j, r} that
// the conditional-covariance code relies on holds only in this ordering.
//
// A rotation with k layers is R_k = Ht D_k Ht D_{k-1} ... Ht D_1 where Ht is
// H / sqrt(d) and D_l are +-1 diagonals regenerated from (seed, layer), so
// encoder and decoder share the rotation without transmitting it.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rotquant/error.hpp"
#include "rotquant/random.hpp"

namespace rotquant {

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

/// Dimension d = 2^m, m >= 0.
class Dim {
 public:
  explicit Dim(std::size_t d) : d_(d) {
    if (!is_power_of_two(d)) {
      throw DimensionError("dimension " + std::to_string(d) + " is not a power of two");
    }
  }

  std::size_t value() const noexcept { return d_; }
  unsigned log2() const noexcept { return static_cast<unsigned>(std::countr_zero(d_)); }

  friend bool operator==(const Dim&, const Dim&) = default;

 private:
  std::size_t d_;
};

/// Bit vector with little-endian bit order inside bytes: element i lives in
/// bit (i % 8) of byte (i / 8). This is also the wire layout.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size) : size_(size), bytes_((size + 7) / 8, 0) {}

  std::size_t size() const noexcept { return size_; }

  bool test(std::size_t i) const noexcept { return (bytes_[i >> 3] >> (i & 7)) & 1U; }

  void set(std::size_t i, bool value) noexcept {
    const auto mask = static_cast<std::uint8_t>(1U << (i & 7));
    if (value) {
      bytes_[i >> 3] |= mask;
    } else {
      bytes_[i >> 3] &= static_cast<std::uint8_t>(~mask);
    }
  }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
    return n;
  }

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

  /// Rebuilds from packed bytes; bits past `size` must be zero.
  static BitVector from_bytes(std::size_t size, std::span<const std::uint8_t> bytes) {
    if (bytes.size() != (size + 7) / 8) {
      throw FormatError("bits", "expected " + std::to_string((size + 7) / 8) + " bytes, got " +
                                    std::to_string(bytes.size()));
    }
    BitVector out(size);
    out.bytes_.assign(bytes.begin(), bytes.end());
    if (size % 8 != 0 && (out.bytes_.back() >> (size % 8)) != 0) {
      throw FormatError("bits", "non-zero padding bits");
    }
    return out;
  }

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint8_t> bytes_;
};

/// Diagonal of one RHT layer. Bit set means -1.
class SignPlane {
 public:
  SignPlane() = default;
  explicit SignPlane(BitVector bits) : bits_(std::move(bits)) {}

  std::size_t size() const noexcept { return bits_.size(); }
  double sign(std::size_t i) const noexcept { return bits_.test(i) ? -1.0 : 1.0; }
  const BitVector& bits() const noexcept { return bits_; }

  void apply(std::span<double> v) const noexcept {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (bits_.test(i)) v[i] = -v[i];
    }
  }

  friend bool operator==(const SignPlane&, const SignPlane&) = default;

 private:
  BitVector bits_;
};

/// Reproducible description of R_k. layers == 0 is the identity.
struct RotationSpec {
  RotationSpec(Dim dim_, int layers_, std::uint64_t seed_) : dim(dim_), layers(layers_), seed(seed_) {
    if (layers < 0 || layers > 3) {
      throw ArgumentError("rotation layers must be in 0..3, got " + std::to_string(layers));
    }
  }

  RotationSpec with_seed(std::uint64_t s) const { return {dim, layers, s}; }
  RotationSpec with_layers(int k) const { return {dim, k, seed}; }

  Dim dim;
  int layers;
  std::uint64_t seed;

  friend bool operator==(const RotationSpec&, const RotationSpec&) = default;
};

enum class Normalization { none, orthonormal };

/// In-place Sylvester FWHT. With `orthonormal` the result is scaled by
/// 1/sqrt(d) once after the butterfly passes, so applying it twice is the identity.
inline void fwht_inplace(std::span<double> v, Normalization norm = Normalization::orthonormal) {
  const std::size_t d = v.size();
  if (!is_power_of_two(d)) {
    throw DimensionError("fwht length " + std::to_string(d) + " is not a power of two");
  }
  for (std::size_t h = 1; h < d; h <<= 1) {
    for (std::size_t i = 0; i < d; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = v[j];
        const double b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
    }
  }
  if (norm == Normalization::orthonormal && d > 1) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (auto& x : v) x *= scale;
  }
}

inline std::vector<double> fwht(std::vector<double> v, Normalization norm = Normalization::orthonormal) {
  fwht_inplace(v, norm);
  return v;
}

/// Sign plane D_layer of `spec`. Stream seed is splitmix64(seed ^ layer); signs
/// are the bits of successive xoshiro256++ words, most significant bit first.
inline SignPlane derive_signs(const RotationSpec& spec, int layer) {
  if (layer < 1 || layer > spec.layers) {
    throw ArgumentError("layer " + std::to_string(layer) + " outside 1.." + std::to_string(spec.layers));
  }
  const std::size_t d = spec.dim.value();
  Xoshiro256pp rng(splitmix64(spec.seed ^ static_cast<std::uint64_t>(layer)));
  BitVector bits(d);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < d; ++i) {
    if (i % 64 == 0) word = rng();
    bits.set(i, (word >> (63 - i % 64)) & 1U);
  }
  return SignPlane(std::move(bits));
}

/// R_k with its sign planes materialized; reuse across many vectors.
class Rotation {
 public:
  explicit Rotation(const RotationSpec& spec) : spec_(spec) {
    planes_.reserve(static_cast<std::size_t>(spec.layers));
    for (int l = 1; l <= spec.layers; ++l) planes_.push_back(derive_signs(spec, l));
  }

  const RotationSpec& spec() const noexcept { return spec_; }
  std::size_t dim() const noexcept { return spec_.dim.value(); }
  const SignPlane& plane(int layer) const { return planes_.at(static_cast<std::size_t>(layer - 1)); }

  /// x <- R_k x, D_1 applied first.
  void apply(std::span<double> x) const {
    check(x.size());
    for (const auto& plane : planes_) {
      plane.apply(x);
      fwht_inplace(x);
    }
  }

  /// y <- R_k^{-1} y = D_1 Ht D_2 Ht ... D_k Ht y.
  void invert(std::span<double> y) const {
    check(y.size());
    for (auto it = planes_.rbegin(); it != planes_.rend(); ++it) {
      fwht_inplace(y);
      it->apply(y);
    }
  }

 private:
  void check(std::size_t n) const {
    if (n != dim()) {
      throw DimensionError("vector length " + std::to_string(n) + " does not match rotation dimension " +
                           std::to_string(dim()));
    }
  }

  RotationSpec spec_;
  std::vector<SignPlane> planes_;
};

inline std::vector<double> apply_rotation(std::vector<double> x, const RotationSpec& spec) {
  Rotation(spec).apply(x);
  return x;
}

inline std::vector<double> inverse_rotation(std::vector<double> y, const RotationSpec& spec) {
  Rotation(spec).invert(y);
  return y;
}

/// sign(z) = +1 for z >= 0, -1 otherwise; a set bit marks -1.
inline BitVector sign_vector(std::span<const double> v) {
  BitVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.set(i, v[i] < 0.0);
  return out;
}

inline double norm2(std::span<const double> v) noexcept {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double norm1(std::span<const double> v) noexcept {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

/// x / ||x||_2; throws on the zero vector.
inline std::vector<double> normalized(std::span<const double> x) {
  const double n = norm2(x);
  if (!(n > 0.0)) throw ArgumentError("cannot normalize the zero vector");
  std::vector<double> out(x.begin(), x.end());
  for (auto& v : out) v /= n;
  return out;
}

/// U = sqrt(d) R x / ||x||, computed with a prebuilt rotation.
inline std::vector<double> normalized_rotated(std::span<const double> x, const Rotation& rot) {
  if (x.size() != rot.dim()) throw DimensionError("input length does not match rotation dimension");
  const double norm = norm2(x);
  if (!(norm > 0.0)) throw ArgumentError("cannot normalize the zero vector");
  std::vector<double> u(x.begin(), x.end());
  rot.apply(u);
  const double factor = std::sqrt(static_cast<double>(x.size())) / norm;
  for (auto& v : u) v *= factor;
  return u;
}

}  // namespace rotquant
