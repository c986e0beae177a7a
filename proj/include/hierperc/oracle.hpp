// SPDX-License-Identifier: Apache-2.0
//
// Exact laws on tiny instances: the multiplicative coalescent on the set
// partitions of {0..k-1} (k <= 6) via uniformization, and percolation on at
// most four hierarchical vertices by enumerating edge subsets.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hierperc/lattice.hpp"

namespace hierperc {

inline constexpr int kOracleMaxGround = 6;

/// A set partition as a restricted growth string: rgs[i] is the block of
/// element i, blocks numbered in order of first appearance.
using Rgs = std::vector<std::uint8_t>;

class PartitionLattice {
 public:
  explicit PartitionLattice(int k) : k_(k) {
    if (k < 1 || k > kOracleMaxGround) throw std::invalid_argument("PartitionLattice: ground set must be 1..6");
    Rgs cur(static_cast<std::size_t>(k), 0);
    enumerate(cur, 1, 0);
    for (std::size_t i = 0; i < states_.size(); ++i) index_[states_[i]] = i;
    build_generator();
  }

  [[nodiscard]] int ground() const { return k_; }
  [[nodiscard]] std::size_t size() const { return states_.size(); }
  [[nodiscard]] const Rgs& state(std::size_t i) const { return states_[i]; }
  [[nodiscard]] std::size_t index_of(const Rgs& r) const {
    auto it = index_.find(canonical(r));
    if (it == index_.end()) throw std::out_of_range("PartitionLattice: unknown partition");
    return it->second;
  }
  /// Dense generator, row-major.
  [[nodiscard]] double rate(std::size_t from, std::size_t to) const { return gen_[from * size() + to]; }
  [[nodiscard]] double max_exit_rate() const { return qmax_; }

  /// Block sizes of a state.
  [[nodiscard]] std::vector<int> block_sizes(std::size_t i) const {
    const Rgs& r = states_[i];
    std::vector<int> sz(static_cast<std::size_t>(*std::max_element(r.begin(), r.end())) + 1, 0);
    for (auto b : r) ++sz[b];
    return sz;
  }

  [[nodiscard]] double power_sum(std::size_t i, double p) const {
    double s = 0.0;
    for (int b : block_sizes(i)) s += std::pow(static_cast<double>(b), p);
    return s;
  }

  /// Relabels blocks in order of first appearance.
  static Rgs canonical(const Rgs& r) {
    std::map<std::uint8_t, std::uint8_t> relabel;
    Rgs out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      auto it = relabel.find(r[i]);
      if (it == relabel.end()) it = relabel.emplace(r[i], static_cast<std::uint8_t>(relabel.size())).first;
      out[i] = it->second;
    }
    return out;
  }

  /// Partition whose blocks are consecutive runs of the given sizes.
  static Rgs from_block_sizes(const std::vector<int>& sizes) {
    Rgs r;
    std::uint8_t b = 0;
    for (int s : sizes) {
      if (s <= 0) throw std::invalid_argument("from_block_sizes: sizes must be positive");
      for (int i = 0; i < s; ++i) r.push_back(b);
      ++b;
    }
    return r;
  }

  /// Row vector v times exp(tG) by uniformization with absolute tolerance
  /// `tol` on the truncated Poisson mass. Long horizons are split.
  [[nodiscard]] std::vector<double> propagate(std::vector<double> v, double t, double tol = 1e-15) const {
    if (!(t >= 0.0)) throw std::invalid_argument("propagate: t must be >= 0");
    if (v.size() != size()) throw std::invalid_argument("propagate: dimension mismatch");
    if (t == 0.0 || qmax_ == 0.0) return v;
    const double q = qmax_;
    const int pieces = std::max(1, static_cast<int>(std::ceil(q * t / 30.0)));
    const double dt = t / pieces;
    for (int piece = 0; piece < pieces; ++piece) v = uniformize(v, q, dt, tol / pieces);
    return v;
  }

 private:
  void enumerate(Rgs& cur, std::size_t pos, std::uint8_t maxb) {
    if (pos == cur.size() || cur.empty()) {
      states_.push_back(cur);
      return;
    }
    for (std::uint8_t b = 0; b <= maxb + 1; ++b) {
      cur[pos] = b;
      enumerate(cur, pos + 1, std::max(maxb, b));
    }
  }

  void build_generator() {
    const std::size_t S = size();
    gen_.assign(S * S, 0.0);
    for (std::size_t i = 0; i < S; ++i) {
      const auto sz = block_sizes(i);
      const int nb = static_cast<int>(sz.size());
      double out = 0.0;
      for (int a = 0; a < nb; ++a)
        for (int b = a + 1; b < nb; ++b) {
          Rgs merged = states_[i];
          for (auto& x : merged)
            if (x == b) x = static_cast<std::uint8_t>(a);
          const std::size_t j = index_.at(canonical(merged));
          const double r = static_cast<double>(sz[static_cast<std::size_t>(a)]) * sz[static_cast<std::size_t>(b)];
          gen_[i * S + j] += r;
          out += r;
        }
      gen_[i * S + i] = -out;
      qmax_ = std::max(qmax_, out);
    }
  }

  [[nodiscard]] std::vector<double> uniformize(const std::vector<double>& v0, double q, double t, double tol) const {
    const std::size_t S = size();
    const double lam = q * t;
    std::vector<double> cur = v0, next(S), acc(S, 0.0);
    double w = std::exp(-lam), cum = 0.0;
    for (int k = 0;; ++k) {
      for (std::size_t i = 0; i < S; ++i) acc[i] += w * cur[i];
      cum += w;
      if (1.0 - cum <= tol || (k > lam && w < 1e-20)) break;
      // cur <- cur P with P = I + G/q.
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t i = 0; i < S; ++i) {
        if (cur[i] == 0.0) continue;
        for (std::size_t j = 0; j < S; ++j) {
          const double g = gen_[i * S + j];
          if (g != 0.0) next[j] += cur[i] * g / q;
        }
        next[i] += cur[i];
      }
      cur.swap(next);
      w *= lam / (k + 1);
    }
    return acc;
  }

  int k_;
  std::vector<Rgs> states_;
  std::map<Rgs, std::size_t> index_;
  std::vector<double> gen_;
  double qmax_ = 0.0;
};

/// Law over partitions of exp(tG) started from `initial`.
inline std::vector<double> exact_coalescent_law(const PartitionLattice& lat, const Rgs& initial, double t) {
  std::vector<double> v(lat.size(), 0.0);
  v[lat.index_of(initial)] = 1.0;
  return lat.propagate(std::move(v), t);
}

inline void check_law(const std::vector<double>& law) {
  const double s = std::accumulate(law.begin(), law.end(), 0.0);
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("exact law does not sum to 1");
}

/// sum_P law(P) ||P||_p^p.
inline double exact_moments(const PartitionLattice& lat, const std::vector<double>& law, double p) {
  check_law(law);
  long double s = 0.0L;
  for (std::size_t i = 0; i < law.size(); ++i) s += law[i] * lat.power_sum(i, p);
  return static_cast<double>(s);
}

/// sum_P law(P) ||P||_a^a ||P||_b^b.
inline double exact_cross_moment(const PartitionLattice& lat, const std::vector<double>& law, double a, double b) {
  check_law(law);
  long double s = 0.0L;
  for (std::size_t i = 0; i < law.size(); ++i) s += law[i] * lat.power_sum(i, a) * lat.power_sum(i, b);
  return static_cast<double>(s);
}

/// Exact law of the cluster partition of eta_n on at most four vertices:
/// every pair is open with probability 1 - exp(-beta J_{n,t_n}(x,y)).
inline std::vector<double> exact_eta_law(const ModelParams& prm, int n, const PartitionLattice& lat) {
  prm.validate();
  const std::uint64_t vol = block_volume(prm, n);
  if (vol > 4) throw std::invalid_argument("exact_eta_law: at most 4 vertices");
  if (static_cast<std::uint64_t>(lat.ground()) != vol) throw std::invalid_argument("exact_eta_law: lattice mismatch");
  const double tn = scale_time(prm, n);
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> prob;
  for (std::uint64_t x = 0; x < vol; ++x)
    for (std::uint64_t y = x + 1; y < vol; ++y) {
      pairs.emplace_back(static_cast<int>(x), static_cast<int>(y));
      const double J = kernel_interpolated(prm, VertexId{x}, VertexId{y}, n, tn);
      prob.push_back(-std::expm1(-prm.beta * J));
    }
  std::vector<double> law(lat.size(), 0.0);
  const std::size_t np = pairs.size();
  for (std::uint32_t mask = 0; mask < (1u << np); ++mask) {
    double w = 1.0;
    std::vector<int> parent(vol);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
      while (parent[static_cast<std::size_t>(v)] != v) v = parent[static_cast<std::size_t>(v)];
      return v;
    };
    for (std::size_t e = 0; e < np; ++e) {
      const bool open = (mask >> e) & 1u;
      w *= open ? prob[e] : 1.0 - prob[e];
      if (open) {
        const int a = find(pairs[e].first), b = find(pairs[e].second);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
      }
    }
    Rgs r(vol);
    for (std::uint64_t v = 0; v < vol; ++v) r[v] = static_cast<std::uint8_t>(find(static_cast<int>(v)));
    law[lat.index_of(r)] += w;
  }
  return law;
}

/// Exact law of X_{n,t_n} built recursively: independent children at
/// time t_{n-1}, glued, then exp(t_n G). Ground set L^{dn} <= 6.
inline std::vector<double> exact_recursive_law(const ModelParams& prm, int n, const PartitionLattice& lat) {
  prm.validate();
  const std::uint64_t vol = block_volume(prm, n);
  if (static_cast<std::uint64_t>(lat.ground()) != vol) throw std::invalid_argument("exact_recursive_law: lattice mismatch");
  if (n == 0) return {1.0};
  const std::uint64_t b = prm.branching();
  const std::uint64_t child_vol = vol / b;
  const PartitionLattice child_lat(static_cast<int>(child_vol));
  const auto child = exact_recursive_law(prm, n - 1, child_lat);
  // Product law over the b children, embedded as partitions of the block.
  std::vector<double> v(lat.size(), 0.0);
  std::vector<std::size_t> pick(b, 0);
  while (true) {
    double w = 1.0;
    Rgs r;
    std::uint8_t offset = 0;
    for (std::uint64_t c = 0; c < b; ++c) {
      w *= child[pick[c]];
      const Rgs& cr = child_lat.state(pick[c]);
      std::uint8_t mx = 0;
      for (auto x : cr) {
        r.push_back(static_cast<std::uint8_t>(x + offset));
        mx = std::max(mx, x);
      }
      offset = static_cast<std::uint8_t>(offset + mx + 1);
    }
    if (w != 0.0) v[lat.index_of(r)] += w;
    std::uint64_t c = 0;
    while (c < b && ++pick[c] == child_lat.size()) pick[c++] = 0;
    if (c == b) break;
  }
  return lat.propagate(std::move(v), scale_time(prm, n));
}

}  // namespace hierperc
