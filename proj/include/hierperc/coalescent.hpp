// SPDX-License-Identifier: Apache-2.0
//
// Multiplicative coalescent: blocks of masses a, b merge at rate a*b.
// Exact Gillespie paths, exact endpoint sampling, and the recursive
// block process X_{n,t}.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "hierperc/lattice.hpp"
#include "hierperc/rng.hpp"
#include "hierperc/size_multiset.hpp"

namespace hierperc {

struct CoalescentState {
  SizeMultiset masses;
  double time = 0.0;
};

struct MergeEvent {
  double time;
  double mass_a;
  double mass_b;
};

namespace detail {

/// Poisson variate that stays exact for moderate means and saturates at
/// `cap` (callers only use the count to drive no-op-tolerant loops).
inline std::uint64_t poisson(Philox& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<std::int64_t> pd(mean);
  return static_cast<std::uint64_t>(pd(rng));
}

class IndexDsu {
 public:
  explicit IndexDsu(std::size_t k) : parent_(k) { std::iota(parent_.begin(), parent_.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

/// Collapses masses by DSU classes, preserving first-appearance order.
template <typename T>
std::vector<T> collapse(const std::vector<T>& masses, IndexDsu& dsu) {
  std::vector<T> acc(masses.size(), T{0});
  std::vector<char> seen(masses.size(), 0);
  for (std::uint32_t i = 0; i < masses.size(); ++i) acc[dsu.find(i)] += masses[i];
  std::vector<T> out;
  for (std::uint32_t i = 0; i < masses.size(); ++i) {
    const std::uint32_t r = dsu.find(i);
    if (!seen[r]) {
      seen[r] = 1;
      out.push_back(acc[r]);
    }
  }
  return out;
}

}  // namespace detail

/// Endpoint law of the coalescent after `duration` on integer masses:
/// distinct clusters A, B end up joined by at least one Poisson edge with
/// probability 1 - exp(-duration |A||B|). Endpoints are size-biased picks;
/// picks landing in one cluster are no-op edges. Returns the number of
/// Poisson edges drawn (same-cluster ones included).
inline std::uint64_t coalesce_final_integer(std::vector<std::uint64_t>& sizes, double duration, Philox& rng) {
  const std::size_t k = sizes.size();
  if (k <= 1 || duration <= 0.0) return 0;
  std::vector<std::uint64_t> prefix(k);
  std::partial_sum(sizes.begin(), sizes.end(), prefix.begin());
  const std::uint64_t S = prefix.back();
  const double mean = duration * static_cast<double>(S) * static_cast<double>(S) / 2.0;
  detail::IndexDsu dsu(k);
  std::uint64_t edges = 0;
  const double pairs = 0.5 * static_cast<double>(k) * static_cast<double>(k - 1);
  if (pairs <= mean) {
    // Few clusters, huge rate: direct Bernoulli on cluster pairs is cheaper
    // and has the same law.
    for (std::uint32_t i = 0; i < k; ++i)
      for (std::uint32_t j = i + 1; j < k; ++j) {
        const double p = -std::expm1(-duration * static_cast<double>(sizes[i]) * static_cast<double>(sizes[j]));
        if (rng.uniform() < p) dsu.unite(i, j);
      }
  } else {
    edges = detail::poisson(rng, mean);
    auto pick = [&]() {
      const std::uint64_t u = rng.below(S);
      return static_cast<std::uint32_t>(std::upper_bound(prefix.begin(), prefix.end(), u) - prefix.begin());
    };
    for (std::uint64_t e = 0; e < edges; ++e) {
      const std::uint32_t a = pick(), b = pick();
      dsu.unite(a, b);
    }
  }
  sizes = detail::collapse(sizes, dsu);
  return edges;
}

/// Real-mass version of the endpoint sampler.
inline std::uint64_t coalesce_final_real(std::vector<double>& masses, double duration, Philox& rng) {
  const std::size_t k = masses.size();
  if (k <= 1 || duration <= 0.0) return 0;
  std::vector<double> prefix(k);
  std::partial_sum(masses.begin(), masses.end(), prefix.begin());
  const double S = prefix.back();
  const double mean = duration * S * S / 2.0;
  detail::IndexDsu dsu(k);
  std::uint64_t edges = 0;
  const double pairs = 0.5 * static_cast<double>(k) * static_cast<double>(k - 1);
  if (pairs <= mean) {
    for (std::uint32_t i = 0; i < k; ++i)
      for (std::uint32_t j = i + 1; j < k; ++j) {
        const double p = -std::expm1(-duration * masses[i] * masses[j]);
        if (rng.uniform() < p) dsu.unite(i, j);
      }
  } else {
    edges = detail::poisson(rng, mean);
    auto pick = [&]() {
      const double u = rng.uniform() * S;
      auto it = std::upper_bound(prefix.begin(), prefix.end(), u);
      if (it == prefix.end()) --it;
      return static_cast<std::uint32_t>(it - prefix.begin());
    };
    for (std::uint64_t e = 0; e < edges; ++e) {
      const std::uint32_t a = pick(), b = pick();
      dsu.unite(a, b);
    }
  }
  masses = detail::collapse(masses, dsu);
  return edges;
}

inline void check_coalescent_input(const CoalescentState& s, double duration) {
  if (!(duration >= 0.0)) throw std::invalid_argument("coalescent: duration must be >= 0");
  if (s.masses.empty()) throw std::invalid_argument("coalescent: empty state");
}

/// Samples only the endpoint of the coalescent run for `duration`.
inline CoalescentState run_final(const CoalescentState& s, double duration, Philox& rng) {
  check_coalescent_input(s, duration);
  CoalescentState out{s.masses, s.time + duration};
  if (s.masses.integral() && s.masses.total() < 0x1p53) {
    std::vector<std::uint64_t> v(s.masses.masses().begin(), s.masses.masses().end());
    coalesce_final_integer(v, duration, rng);
    out.masses = SizeMultiset::from_integers(v);
  } else {
    auto v = s.masses.masses();
    coalesce_final_real(v, duration, rng);
    out.masses.assign_unchecked(std::move(v));
  }
  return out;
}

/// Fenwick tree over nonnegative weights with prefix search.
class FenwickTree {
 public:
  explicit FenwickTree(const std::vector<double>& w) : tree_(w.size() + 1, 0.0) {
    for (std::size_t i = 0; i < w.size(); ++i) add(i, w[i]);
    log_ = 1;
    while ((log_ << 1) <= w.size()) log_ <<= 1;
  }
  void add(std::size_t i, double delta) {
    for (std::size_t x = i + 1; x < tree_.size(); x += x & (~x + 1)) tree_[x] += delta;
  }
  /// Smallest index whose inclusive prefix sum exceeds u.
  [[nodiscard]] std::size_t search(double u) const {
    std::size_t pos = 0;
    for (std::size_t step = log_; step > 0; step >>= 1) {
      if (pos + step < tree_.size() && tree_[pos + step] <= u) {
        pos += step;
        u -= tree_[pos];
      }
    }
    return std::min(pos, tree_.size() - 2);
  }

 private:
  std::vector<double> tree_;
  std::size_t log_ = 1;
};

/// Exact continuous-time simulation: total rate (S^2 - sum a^2)/2,
/// exponential holding times, merging pair chosen proportional to a*b.
inline CoalescentState run_gillespie(const CoalescentState& s, double duration, Philox& rng,
                                     std::vector<MergeEvent>* trace = nullptr) {
  check_coalescent_input(s, duration);
  std::vector<double> m = s.masses.masses();
  const double S = s.masses.total();
  long double sumsq = 0.0L;
  for (double x : m) sumsq += static_cast<long double>(x) * x;
  FenwickTree fw(m);
  std::size_t active = m.size();
  double t = 0.0;
  while (active > 1) {
    const double rate = 0.5 * static_cast<double>(static_cast<long double>(S) * S - sumsq);
    if (!(rate > 0.0)) break;
    t += -std::log(rng.uniform_pos()) / rate;
    if (t > duration) break;
    std::size_t i = 0, j = 0;
    // Two iid size-biased picks conditioned on being distinct give the
    // pair law proportional to a*b.
    do {
      i = fw.search(rng.uniform() * S);
      j = fw.search(rng.uniform() * S);
    } while (i == j || m[i] == 0.0 || m[j] == 0.0);
    if (trace) trace->push_back({s.time + t, m[i], m[j]});
    sumsq += 2.0L * m[i] * m[j];
    fw.add(i, m[j]);
    fw.add(j, -m[j]);
    m[i] += m[j];
    m[j] = 0.0;
    --active;
  }
  std::erase(m, 0.0);
  CoalescentState out;
  out.masses.assign_unchecked(std::move(m));
  out.time = s.time + duration;
  return out;
}

/// Cluster sizes of X_{n,t_n} built cluster-recursively: at every level the
/// L^d children's size lists are concatenated and run to time t_m.
/// `top_duration` < 0 means t_n at the top level.
struct RecursiveOptions {
  double top_duration = -1.0;
  double periodic_extra = 0.0;  ///< extra top-level duration, separate stream
};

inline SizeMultiset recursive_sizes(const ModelParams& p, int n, std::uint64_t seed, std::uint64_t replica,
                                    const RecursiveOptions& opt = {}) {
  p.validate();
  const std::uint64_t vol = block_volume(p, n);
  const std::uint64_t b = p.branching();
  StreamFactory sf(seed, replica);
  // Flat layout: sizes of all blocks at the current level, with offsets.
  std::vector<std::uint64_t> sizes(vol, 1);
  std::vector<std::uint64_t> offsets(vol + 1);
  std::iota(offsets.begin(), offsets.end(), 0);
  std::uint64_t blocks = vol;
  for (int m = 1; m <= n; ++m) {
    const std::uint64_t nb = blocks / b;
    double dur = scale_time(p, m);
    if (m == n && opt.top_duration >= 0.0) dur = opt.top_duration;
    std::vector<std::uint64_t> next_sizes;
    next_sizes.reserve(sizes.size());
    std::vector<std::uint64_t> next_offsets(nb + 1, 0);
    std::vector<std::uint64_t> work;
    for (std::uint64_t blk = 0; blk < nb; ++blk) {
      work.assign(sizes.begin() + static_cast<std::ptrdiff_t>(offsets[blk * b]),
                  sizes.begin() + static_cast<std::ptrdiff_t>(offsets[(blk + 1) * b]));
      Philox rng = sf.stream(m, blk, Substream::coalescent);
      coalesce_final_integer(work, dur, rng);
      if (m == n && opt.periodic_extra > 0.0) {
        Philox extra = sf.stream(m, blk, Substream::periodic);
        coalesce_final_integer(work, opt.periodic_extra, extra);
      }
      next_sizes.insert(next_sizes.end(), work.begin(), work.end());
      next_offsets[blk + 1] = next_sizes.size();
    }
    sizes.swap(next_sizes);
    offsets.swap(next_offsets);
    blocks = nb;
  }
  return SizeMultiset::from_integers(sizes);
}

/// Law of X_{n,t}: children built to t_{n-1}, disjoint union of L^d of them,
/// then the top layer runs for time t.
inline CoalescentState recursive_X(const ModelParams& p, int n, double t, std::uint64_t seed,
                                   std::uint64_t replica = 0) {
  const double tn = scale_time(p, n);
  if (!(t >= 0.0) || t > tn * (1.0 + 1e-12)) throw std::out_of_range("recursive_X: t outside [0, t_n]");
  if (n == 0) return CoalescentState{SizeMultiset::singletons(1), t};
  RecursiveOptions opt;
  opt.top_duration = t;
  return CoalescentState{recursive_sizes(p, n, seed, replica, opt), t};
}

}  // namespace hierperc
