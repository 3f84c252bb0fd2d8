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

// Wire format. Every object starts with a 24-byte header:
//
//   magic "RQ01" | kind u8 | version u8 | flags u16 | d u64 | seed u64
//
// Integers are little-endian, floats IEEE-754 binary64 stored little-endian.
// Flags: bit 0 seed supplied out of band (seed field zero), bit 1 unbiased
// DRIVE scale, bits 2-3 rotation layers. Other bits must be zero.
//
// Bodies:
//   Drive    scale f64 | sign bits, ceil(d/8) bytes, coordinate 0 in bit 0 of byte 0
//   Bsq      bits u8 | p f64 | scale f64 | n_out u64 | n_out x (index u32, value f64)
//            | level indices packed LSB-first at `bits` bits each, zero padded
//   Codebook (d holds k_blk, seed holds train_seed) M u64 | n_samples u64
//            | iters u64 | M*k_blk f64 centroids
//   Vector   d f64 values

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rotquant/bsq.hpp"
#include "rotquant/core.hpp"
#include "rotquant/drive.hpp"
#include "rotquant/error.hpp"
#include "rotquant/vq.hpp"

namespace rotquant {

enum class WireKind : std::uint8_t { drive = 1, bsq = 2, codebook = 3, vector = 4 };

inline constexpr std::size_t kHeaderBytes = 24;
inline constexpr std::uint8_t kWireVersion = 1;

namespace flag {
inline constexpr std::uint16_t seed_external = 1U << 0;
inline constexpr std::uint16_t unbiased = 1U << 1;
inline constexpr unsigned layers_shift = 2;
inline constexpr std::uint16_t layers_mask = 3U << layers_shift;
inline constexpr std::uint16_t known = seed_external | unbiased | layers_mask;
}  // namespace flag

struct WireHeader {
  WireKind kind;
  std::uint8_t version = kWireVersion;
  std::uint16_t flags = 0;
  std::uint64_t d = 0;
  std::uint64_t seed = 0;
};

struct SerializeOptions {
  bool seed_external = false;  ///< write seed as zero and set flag bit 0
};

struct DeserializeOptions {
  std::optional<std::uint64_t> external_seed;  ///< required when flag bit 0 is set
};

namespace detail {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  void header(const WireHeader& h) {
    bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("RQ01"), 4));
    u8(static_cast<std::uint8_t>(h.kind));
    u8(h.version);
    u16(h.flags);
    u64(h.d);
    u64(h.seed);
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t remaining() const noexcept { return in_.size() - pos_; }

  void need(std::size_t n, const char* field) const {
    if (remaining() < n) {
      throw FormatError(field, "truncated: need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()));
    }
  }

  std::uint8_t u8(const char* field) { return static_cast<std::uint8_t>(le(1, field)); }
  std::uint16_t u16(const char* field) { return static_cast<std::uint16_t>(le(2, field)); }
  std::uint32_t u32(const char* field) { return static_cast<std::uint32_t>(le(4, field)); }
  std::uint64_t u64(const char* field) { return le(8, field); }
  double f64(const char* field) { return std::bit_cast<double>(le(8, field)); }

  std::span<const std::uint8_t> bytes(std::size_t n, const char* field) {
    need(n, field);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  void finish() const {
    if (remaining() != 0) throw FormatError("trailing", std::to_string(remaining()) + " unexpected trailing bytes");
  }

 private:
  std::uint64_t le(int n, const char* field) {
    need(static_cast<std::size_t>(n), field);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline std::uint16_t layer_flags(const RotationSpec& spec) {
  return static_cast<std::uint16_t>(static_cast<unsigned>(spec.layers) << flag::layers_shift);
}

inline WireHeader spec_header(WireKind kind, const RotationSpec& spec, const SerializeOptions& opt) {
  WireHeader h{kind};
  h.flags = layer_flags(spec);
  h.d = spec.dim.value();
  h.seed = spec.seed;
  if (opt.seed_external) {
    h.flags |= flag::seed_external;
    h.seed = 0;
  }
  return h;
}

inline WireHeader read_header(Reader& r) {
  const auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), "RQ01", 4) != 0) throw FormatError("magic", "expected \"RQ01\"");
  WireHeader h{};
  const std::uint8_t kind = r.u8("kind");
  if (kind < 1 || kind > 4) throw FormatError("kind", "unknown kind " + std::to_string(kind));
  h.kind = static_cast<WireKind>(kind);
  h.version = r.u8("version");
  if (h.version != kWireVersion) throw FormatError("version", "unsupported version " + std::to_string(h.version));
  h.flags = r.u16("flags");
  if ((h.flags & ~flag::known) != 0) throw FormatError("flags", "unknown flag bits set");
  h.d = r.u64("d");
  h.seed = r.u64("seed");
  return h;
}

inline RotationSpec spec_from_header(const WireHeader& h, const DeserializeOptions& opt) {
  if (!is_power_of_two(h.d)) throw FormatError("d", std::to_string(h.d) + " is not a power of two");
  if (h.d > (std::uint64_t{1} << 40)) throw FormatError("d", "dimension too large");
  std::uint64_t seed = h.seed;
  if (h.flags & flag::seed_external) {
    if (h.seed != 0) throw FormatError("seed", "external-seed payload carries a non-zero seed");
    if (!opt.external_seed) throw FormatError("seed", "payload expects an out-of-band seed");
    seed = *opt.external_seed;
  }
  const int layers = (h.flags & flag::layers_mask) >> flag::layers_shift;
  return RotationSpec(Dim(h.d), layers, seed);
}

inline double finite(double v, const char* field) {
  if (!std::isfinite(v)) throw FormatError(field, "value is not finite");
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const DrivePayload& p, const SerializeOptions& opt = {}) {
  detail::Writer w;
  WireHeader h = detail::spec_header(WireKind::drive, p.spec, opt);
  if (p.mode == DriveMode::unbiased) h.flags |= flag::unbiased;
  w.header(h);
  w.f64(p.scale);
  w.bytes(p.signs.bytes());
  return w.take();
}

inline std::vector<std::uint8_t> serialize(const BsqPayload& p, const SerializeOptions& opt = {}) {
  detail::Writer w;
  w.header(detail::spec_header(WireKind::bsq, p.spec, opt));
  w.u8(static_cast<std::uint8_t>(p.config.bits));
  w.f64(p.config.p);
  w.f64(p.scale);
  w.u64(p.outliers.size());
  for (const auto& o : p.outliers) {
    w.u32(o.index);
    w.f64(o.value);
  }
  std::vector<std::uint8_t> packed((static_cast<std::size_t>(p.config.bits) * p.levels.size() + 7) / 8, 0);
  std::size_t bit = 0;
  for (std::uint32_t level : p.levels) {
    for (int b = 0; b < p.config.bits; ++b, ++bit) {
      if ((level >> b) & 1U) packed[bit >> 3] |= static_cast<std::uint8_t>(1U << (bit & 7));
    }
  }
  w.bytes(packed);
  return w.take();
}

inline std::vector<std::uint8_t> serialize(const Codebook& cb) {
  detail::Writer w;
  WireHeader h{WireKind::codebook};
  h.d = cb.k_blk();
  h.seed = cb.train_seed();
  w.header(h);
  w.u64(cb.size());
  w.u64(cb.n_samples());
  w.u64(cb.iters());
  for (double v : cb.data()) w.f64(v);
  return w.take();
}

inline std::vector<std::uint8_t> serialize(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("cannot serialize an empty vector");
  detail::Writer w;
  WireHeader h{WireKind::vector};
  h.d = v.size();
  w.header(h);
  for (double x : v) w.f64(x);
  return w.take();
}

inline std::vector<std::uint8_t> serialize(const std::vector<double>& v) { return serialize(std::span<const double>(v)); }

using WireObject = std::variant<DrivePayload, BsqPayload, Codebook, std::vector<double>>;

namespace detail {

inline DrivePayload read_drive(Reader& r, const WireHeader& h, const DeserializeOptions& opt) {
  const RotationSpec spec = spec_from_header(h, opt);
  const double scale = finite(r.f64("scale"), "scale");
  const std::size_t d = spec.dim.value();
  BitVector signs = BitVector::from_bytes(d, r.bytes((d + 7) / 8, "signs"));
  const DriveMode mode = (h.flags & flag::unbiased) ? DriveMode::unbiased : DriveMode::biased;
  return DrivePayload{mode, spec, scale, std::move(signs)};
}

inline BsqPayload read_bsq(Reader& r, const WireHeader& h, const DeserializeOptions& opt) {
  if (h.flags & flag::unbiased) throw FormatError("flags", "unbiased flag is not valid for this kind");
  const RotationSpec spec = spec_from_header(h, opt);
  const std::size_t d = spec.dim.value();
  const std::uint8_t bits = r.u8("bits");
  if (bits < 1 || bits > BsqConfig::kMaxBits) throw FormatError("bits", "bit width " + std::to_string(bits) + " out of range");
  const double p = r.f64("p");
  if (!(p > 0.0 && p < 1.0)) throw FormatError("p", "tail mass outside (0, 1)");
  BsqConfig cfg;
  try {
    cfg = BsqConfig::make(bits, p);
  } catch (const ArgumentError& e) {
    throw FormatError("p", e.what());
  }
  BsqPayload out{spec, std::move(cfg), finite(r.f64("scale"), "scale"), {}, {}};
  const std::uint64_t n_out = r.u64("n_out");
  if (n_out > d) throw FormatError("n_out", "more outliers than coordinates");
  r.need(static_cast<std::size_t>(n_out) * 12, "outliers");
  out.outliers.reserve(static_cast<std::size_t>(n_out));
  for (std::uint64_t i = 0; i < n_out; ++i) {
    const std::uint32_t index = r.u32("outliers.index");
    const double value = finite(r.f64("outliers.value"), "outliers.value");
    out.outliers.push_back({index, value});
  }
  const std::size_t n_levels = d - static_cast<std::size_t>(n_out);
  const std::size_t total_bits = n_levels * bits;
  const auto packed = r.bytes((total_bits + 7) / 8, "levels");
  out.levels.resize(n_levels);
  std::size_t bit = 0;
  for (auto& level : out.levels) {
    std::uint32_t v = 0;
    for (int b = 0; b < bits; ++b, ++bit) v |= static_cast<std::uint32_t>((packed[bit >> 3] >> (bit & 7)) & 1U) << b;
    level = v;
  }
  if (total_bits % 8 != 0 && (packed.back() >> (total_bits % 8)) != 0) {
    throw FormatError("levels", "non-zero padding bits");
  }
  bsq_reconstruct_rotated(out);  // validates outlier order, range and threshold
  return out;
}

inline Codebook read_codebook(Reader& r, const WireHeader& h) {
  if (h.flags != 0) throw FormatError("flags", "codebooks carry no flags");
  if (h.d == 0 || h.d > (1U << 20)) throw FormatError("d", "block size out of range");
  const std::uint64_t m = r.u64("m");
  if (m == 0) throw FormatError("m", "codebook needs at least one centroid");
  const std::uint64_t n_samples = r.u64("n_samples");
  const std::uint64_t iters = r.u64("iters");
  if (m > r.remaining() / 8 / h.d) throw FormatError("centroids", "truncated centroid table");
  std::vector<double> c(static_cast<std::size_t>(m * h.d));
  for (auto& v : c) v = finite(r.f64("centroids"), "centroids");
  return Codebook(static_cast<std::size_t>(h.d), std::move(c), h.seed, static_cast<std::size_t>(n_samples),
                  static_cast<std::size_t>(iters));
}

inline std::vector<double> read_vector(Reader& r, const WireHeader& h) {
  if (h.flags != 0) throw FormatError("flags", "vectors carry no flags");
  if (h.seed != 0) throw FormatError("seed", "vectors carry no seed");
  if (h.d == 0) throw FormatError("d", "empty vector");
  if (h.d > r.remaining() / 8) throw FormatError("values", "truncated: fewer values than d");
  std::vector<double> v(static_cast<std::size_t>(h.d));
  for (auto& x : v) x = r.f64("values");
  return v;
}

}  // namespace detail

/// Parses one object; the byte stream must contain nothing else.
inline WireObject deserialize(std::span<const std::uint8_t> bytes, const DeserializeOptions& opt = {}) {
  detail::Reader r(bytes);
  const WireHeader h = detail::read_header(r);
  const auto done = [&r](auto obj) -> WireObject {
    r.finish();
    return obj;
  };
  switch (h.kind) {
    case WireKind::drive: return done(detail::read_drive(r, h, opt));
    case WireKind::bsq: return done(detail::read_bsq(r, h, opt));
    case WireKind::codebook: return done(detail::read_codebook(r, h));
    case WireKind::vector: break;
  }
  return done(detail::read_vector(r, h));
}

template <class T>
T deserialize_as(std::span<const std::uint8_t> bytes, const DeserializeOptions& opt = {}) {
  WireObject obj = deserialize(bytes, opt);
  if (auto* v = std::get_if<T>(&obj)) return std::move(*v);
  throw FormatError("kind", "stream holds a different object kind");
}

}  // namespace rotquant
