// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams. Philox4x32-10 keyed by (seed, replica, tag);
// the 128-bit counter is (stream id, position). Any (seed, replica, scale,
// block) stream can be regenerated in isolation.

#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace hierperc {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> c,
                                                  std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  return c;
}

}  // namespace detail

/// Philox4x32-10 engine; satisfies UniformRandomBitGenerator with 64-bit
/// output so it plugs into the <random> distributions.
class Philox {
 public:
  using result_type = std::uint64_t;

  Philox() = default;
  Philox(std::uint64_t key, std::uint64_t stream, std::uint64_t position = 0)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        stream_(stream),
        pos_(position) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (buffered_ == 0) refill();
    return buf_[--buffered_];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_pos() { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n > 0 (Lemire's nearly divisionless method).
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t thresh = (0 - n) % n;
      while (lo < thresh) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  [[nodiscard]] std::uint64_t position() const { return pos_; }

  /// Same key and stream, restarted at another counter position.
  [[nodiscard]] Philox at(std::uint64_t position) const {
    Philox r = *this;
    r.pos_ = position;
    r.buffered_ = 0;
    return r;
  }

 private:
  void refill() {
    const auto out = detail::philox4x32_10(
        {static_cast<std::uint32_t>(pos_), static_cast<std::uint32_t>(pos_ >> 32),
         static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
        key_);
    ++pos_;
    buf_[0] = (std::uint64_t{out[1]} << 32) | out[0];
    buf_[1] = (std::uint64_t{out[3]} << 32) | out[2];
    buffered_ = 2;
  }

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t pos_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int buffered_ = 0;
};

/// Substream purposes sharing a (scale, block) address.
enum class Substream : std::uint32_t { edges = 0, periodic = 1, coalescent = 2, aux = 3 };

/// Addressable family of Philox streams for one (seed, replica).
class StreamFactory {
 public:
  StreamFactory(std::uint64_t seed, std::uint64_t replica)
      : base_(hash_combine(splitmix64(seed), replica)) {}

  [[nodiscard]] Philox stream(int scale, std::uint64_t block, Substream sub = Substream::edges) const {
    const std::uint64_t tag = (static_cast<std::uint64_t>(scale) << 2) | static_cast<std::uint64_t>(sub);
    return Philox(hash_combine(base_, tag), block);
  }

  /// Stream for a purpose not tied to a lattice address.
  [[nodiscard]] Philox aux(std::uint64_t label) const {
    return Philox(hash_combine(base_, 0xa5a5a5a5ULL + (label << 8)), ~std::uint64_t{0});
  }

 private:
  std::uint64_t base_;
};

/// Derives the per-replica seed used when a driver enumerates replicas.
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t label) { return hash_combine(seed, label); }

}  // namespace hierperc
