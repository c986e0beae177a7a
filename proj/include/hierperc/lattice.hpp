// SPDX-License-Identifier: Apache-2.0
//
// Index arithmetic on the hierarchical lattice H^d_L: vertices of an n-block
// are flat integers whose base-L^d digits are the coordinates at each
// coarsening level (least significant digit = level 1).

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hierperc {

/// Largest scale whose block volume L^{dn} is accepted (volumes must stay
/// below 2^62 so that pair counts and signed offsets never overflow).
inline constexpr std::uint64_t kMaxBlockVolume = std::uint64_t{1} << 62;

struct ModelParams {
  int d = 1;
  int L = 2;
  double alpha = 0.5;
  double beta = 0.0;

  void validate() const {
    if (d < 1) throw std::invalid_argument("ModelParams: d must be >= 1");
    if (L < 2) throw std::invalid_argument("ModelParams: L must be >= 2");
    if (!std::isfinite(alpha)) throw std::invalid_argument("ModelParams: alpha must be finite");
    if (!std::isfinite(beta) || beta < 0.0)
      throw std::invalid_argument("ModelParams: beta must be finite and >= 0");
  }

  /// 0 < alpha < d: the only range with a finite, positive critical point.
  [[nodiscard]] bool has_critical_point() const { return alpha > 0.0 && alpha < d; }

  void require_critical_point() const {
    validate();
    if (!has_critical_point())
      throw std::domain_error("operation presumes 0 < alpha < d (finite critical point)");
  }

  /// Number of vertices in a 1-block, L^d.
  [[nodiscard]] std::uint64_t branching() const {
    std::uint64_t b = 1;
    for (int i = 0; i < d; ++i) b *= static_cast<std::uint64_t>(L);
    return b;
  }

  /// L^{d+alpha}: the per-scale decay factor of the kernel.
  [[nodiscard]] double scale_factor() const { return std::pow(static_cast<double>(L), d + alpha); }

  [[nodiscard]] ModelParams with_beta(double b) const {
    ModelParams p = *this;
    p.beta = b;
    return p;
  }
};

enum class Regime { low, critical, high };

/// Classifies (d, alpha) against the upper-critical dimension d = 3 alpha.
inline Regime regime_of(const ModelParams& p, double tol = 1e-12) {
  const double gap = p.d - 3.0 * p.alpha;
  if (std::abs(gap) <= tol) return Regime::critical;
  return gap < 0 ? Regime::low : Regime::high;
}

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::low: return "low";
    case Regime::critical: return "critical";
    case Regime::high: return "high";
  }
  return "?";
}

/// L^{dn}; throws std::out_of_range when the volume exceeds the 64-bit cap.
inline std::uint64_t block_volume(const ModelParams& p, int n) {
  if (n < 0) throw std::out_of_range("scale must be nonnegative");
  const std::uint64_t b = p.branching();
  std::uint64_t v = 1;
  for (int i = 0; i < n; ++i) {
    if (v > kMaxBlockVolume / b) throw std::out_of_range("scale cap exceeded: L^{dn} does not fit");
    v *= b;
  }
  return v;
}

/// Largest n with L^{dn} <= cap.
inline int max_scale_for(const ModelParams& p, std::uint64_t cap) {
  const std::uint64_t b = p.branching();
  int n = 0;
  std::uint64_t v = 1;
  while (v <= cap / b) {
    v *= b;
    ++n;
  }
  return n;
}

struct VertexId {
  std::uint64_t index = 0;
  friend bool operator==(VertexId, VertexId) = default;
};

/// Base-L^d digits of v at scale n, digit[0] = level-1 coordinate.
inline std::vector<std::uint64_t> decode(const ModelParams& p, VertexId v, int n) {
  const std::uint64_t vol = block_volume(p, n);
  if (v.index >= vol) throw std::out_of_range("vertex index out of range for scale");
  const std::uint64_t b = p.branching();
  std::vector<std::uint64_t> digits(static_cast<std::size_t>(n));
  std::uint64_t x = v.index;
  for (auto& dgt : digits) {
    dgt = x % b;
    x /= b;
  }
  return digits;
}

inline VertexId encode(const ModelParams& p, const std::vector<std::uint64_t>& digits) {
  const std::uint64_t b = p.branching();
  std::uint64_t x = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (*it >= b) throw std::out_of_range("digit exceeds L^d - 1");
    x = x * b + *it;
  }
  return VertexId{x};
}

/// Hierarchical distance exponent h(x, y): 0 when x == y, otherwise the
/// 1-based level of the most significant differing digit.
inline int hdist(const ModelParams& p, VertexId x, VertexId y, int n) {
  const std::uint64_t vol = block_volume(p, n);
  if (x.index >= vol || y.index >= vol) throw std::out_of_range("vertex index out of range for scale");
  const std::uint64_t b = p.branching();
  std::uint64_t a = x.index, c = y.index;
  int h = 0, level = 0;
  while (a != c) {
    ++level;
    if (a % b != c % b) h = level;
    a /= b;
    c /= b;
  }
  return h;
}

/// Ultrametric norm ||x - y|| = L^{h(x,y)} (0 on the diagonal).
inline double ultrametric_norm(const ModelParams& p, VertexId x, VertexId y, int n) {
  const int h = hdist(p, x, y, n);
  return h == 0 ? 0.0 : std::pow(static_cast<double>(p.L), h);
}

/// Digitwise group difference y - x in (Z/LZ)^d per level, re-encoded.
inline VertexId group_difference(const ModelParams& p, VertexId x, VertexId y, int n) {
  auto dx = decode(p, x, n);
  auto dy = decode(p, y, n);
  // Each base-L^d digit packs d base-L torus coordinates.
  for (std::size_t i = 0; i < dx.size(); ++i) {
    std::uint64_t a = dx[i], c = dy[i], out = 0, place = 1;
    for (int k = 0; k < p.d; ++k) {
      const auto L = static_cast<std::uint64_t>(p.L);
      const std::uint64_t ca = a % L, cc = c % L;
      out += ((cc + L - ca) % L) * place;
      place *= L;
      a /= L;
      c /= L;
    }
    dx[i] = out;
  }
  return encode(p, dx);
}

/// Digitwise group sum x + y.
inline VertexId group_sum(const ModelParams& p, VertexId x, VertexId y, int n) {
  auto dx = decode(p, x, n);
  auto dy = decode(p, y, n);
  for (std::size_t i = 0; i < dx.size(); ++i) {
    std::uint64_t a = dx[i], c = dy[i], out = 0, place = 1;
    for (int k = 0; k < p.d; ++k) {
      const auto L = static_cast<std::uint64_t>(p.L);
      out += ((a % L + c % L) % L) * place;
      place *= L;
      a /= L;
      c /= L;
    }
    dx[i] = out;
  }
  return encode(p, dx);
}

/// t_n = beta L^{-(d+alpha) n}.
inline double scale_time(const ModelParams& p, int n) {
  return p.beta * std::pow(p.scale_factor(), -static_cast<double>(n));
}

struct ScaleTime {
  int n = 0;
  double t = 0.0;

  static ScaleTime at(const ModelParams& p, int n, double t) {
    if (!(t >= 0.0) || t > scale_time(p, n) * (1.0 + 1e-12))
      throw std::out_of_range("time outside [0, t_n]");
    return ScaleTime{n, t};
  }
};

/// sum_{m=lo}^{hi} L^{-(d+alpha) m} in closed form; hi < 0 means infinity.
inline double geometric_layer_sum(const ModelParams& p, int lo, int hi) {
  const double r = 1.0 / p.scale_factor();
  const double head = std::pow(r, lo);
  if (hi < 0) return head / (1.0 - r);
  if (hi < lo) return 0.0;
  return head * (1.0 - std::pow(r, hi - lo + 1)) / (1.0 - r);
}

/// Infinite-volume kernel J(x, y) = L^{d+a}/(L^{d+a} - 1) ||x - y||^{-d-a}.
inline double kernel_free(const ModelParams& p, VertexId x, VertexId y, int n) {
  const int h = hdist(p, x, y, n);
  if (h == 0) throw std::domain_error("kernel undefined on the diagonal");
  return geometric_layer_sum(p, h, -1);
}

/// Edge weight of the intermediate-time configuration X_{n,t}:
/// (t/t_n) L^{-(d+a) n} + sum_{m=h}^{n-1} L^{-(d+a) m}.
inline double kernel_interpolated(const ModelParams& p, VertexId x, VertexId y, int n, double t) {
  const double tn = scale_time(p, n);
  if (!(t >= 0.0) || t > tn * (1.0 + 1e-12)) throw std::out_of_range("time outside [0, t_n]");
  const int h = hdist(p, x, y, n);
  if (h == 0) throw std::domain_error("kernel undefined on the diagonal");
  // t_n = 0 only when beta = 0; the top layer weight is then irrelevant.
  const double frac = tn > 0.0 ? t / tn : 0.0;
  return frac * std::pow(p.scale_factor(), -static_cast<double>(n)) + geometric_layer_sum(p, h, n - 1);
}

/// Terms of the quotient-kernel surplus series, summed directly.
inline double periodic_constant_partial(const ModelParams& p, int terms) {
  const double Ld = std::pow(static_cast<double>(p.L), p.d);
  const double La = std::pow(static_cast<double>(p.L), p.alpha);
  const double sf = p.scale_factor();
  const double c = sf / (sf - 1.0);
  double s = c / sf;
  for (int m = 1; m <= terms; ++m) s += (Ld - 1.0) * c / Ld * std::pow(La, -static_cast<double>(m));
  return s;
}

/// Constant A with J_quot = J_free + A L^{-(d+a) n}, closed form
/// [1 + (L^d - 1) L^a / (L^a - 1)] / (L^{d+a} - 1). The closed form is
/// checked against a 1000-term partial sum before it is returned.
inline double periodic_constant(const ModelParams& p) {
  p.validate();
  if (!(p.alpha > 0.0)) throw std::domain_error("periodic_constant: alpha <= 0, series diverges");
  const double Ld = std::pow(static_cast<double>(p.L), p.d);
  const double La = std::pow(static_cast<double>(p.L), p.alpha);
  const double closed = (1.0 + (Ld - 1.0) * La / (La - 1.0)) / (p.scale_factor() - 1.0);
  const double partial = periodic_constant_partial(p, 1000);
  // Slowly decaying series (tiny alpha) cannot be certified by 1000 terms.
  const double tail_ratio = std::pow(La, -1000.0);
  if (tail_ratio < 1e-13 && std::abs(closed - partial) > 1e-12 * std::max(1.0, closed))
    throw std::logic_error("periodic_constant: closed form disagrees with partial sum");
  return closed;
}

}  // namespace hierperc
