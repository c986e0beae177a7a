// SPDX-License-Identifier: Apache-2.0
//
// Exact sampling of the hierarchical percolation configuration eta_n by
// Poisson multigraph layering: layer m puts Poisson(beta L^{-(d+a)m}) edges
// on every vertex pair of each m-block. Blocks are processed bottom-up, so
// after layer m every m-block holds an independent copy of X_{m,t_m}.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "hierperc/coalescent.hpp"
#include "hierperc/lattice.hpp"
#include "hierperc/rng.hpp"
#include "hierperc/size_multiset.hpp"
#include "hierperc/union_find.hpp"

namespace hierperc {

inline constexpr std::uint64_t kDefaultForestCap = std::uint64_t{1} << 27;

struct SamplerOptions {
  /// Exponents p whose per-block power sums sum_C |C|^p are maintained.
  std::vector<double> exponents{2.0};
  /// Snapshot times as fractions of t_m at every level, in [0, 1]. The
  /// value 1 is always observed.
  std::vector<double> fractions{1.0};
  /// Run the top layer for an extra A t_n (periodic boundary).
  bool periodic = false;
  /// Levels below this one are not reported to the observer.
  int min_observed_level = 0;
  std::uint64_t vertex_cap = kDefaultForestCap;
  std::vector<VertexId> tags;
  /// When > beta, edges are drawn at this coupling and each is kept with
  /// probability beta / coupling_beta. Runs sharing a seed and coupling
  /// are then monotone in beta.
  double coupling_beta = 0.0;
};

class ForestSampler;

/// State of all m-blocks at one snapshot time.
struct LevelSnapshot {
  int level = 0;
  double fraction = 1.0;  ///< t / t_m; exceeds 1 on the periodic extension
  double time = 0.0;
  std::uint64_t blocks = 0;
  std::uint64_t block_volume = 0;
  const std::vector<double>* exponents = nullptr;
  const std::vector<std::vector<long double>>* power = nullptr;  ///< [exponent][block]
  const std::vector<std::uint64_t>* max_size = nullptr;           ///< [block]
  ClusterForest* forest = nullptr;

  [[nodiscard]] long double power_sum(std::size_t e, std::uint64_t block) const { return (*power)[e][block]; }
  [[nodiscard]] std::uint64_t max_cluster(std::uint64_t block) const { return (*max_size)[block]; }
  /// Size of the cluster containing the first vertex of the block.
  [[nodiscard]] std::uint64_t origin_size(std::uint64_t block) const {
    return forest->cluster_size(block * block_volume);
  }
  [[nodiscard]] std::size_t exponent_index(double p) const {
    for (std::size_t i = 0; i < exponents->size(); ++i)
      if ((*exponents)[i] == p) return i;
    throw std::out_of_range("LevelSnapshot: exponent not tracked");
  }
};

using SnapshotObserver = std::function<void(const LevelSnapshot&)>;

struct ForestRunInfo {
  std::vector<std::uint64_t> edges_per_level;  ///< Poisson multi-edges drawn, index = level
  std::uint64_t periodic_edges = 0;
};

class ForestSampler {
 public:
  ForestSampler(const ModelParams& p, int n, SamplerOptions opt = {}) : p_(p), n_(n), opt_(std::move(opt)) {
    p_.validate();
    vol_ = block_volume(p_, n_);
    if (vol_ > opt_.vertex_cap) throw std::out_of_range("ForestSampler: L^{dn} exceeds the forest vertex cap");
    for (double f : opt_.fractions)
      if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("ForestSampler: fractions must lie in [0, 1]");
    std::sort(opt_.fractions.begin(), opt_.fractions.end());
    opt_.fractions.erase(std::unique(opt_.fractions.begin(), opt_.fractions.end()), opt_.fractions.end());
    if (opt_.fractions.empty() || opt_.fractions.back() != 1.0) opt_.fractions.push_back(1.0);
    for (double e : opt_.exponents) {
      if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("ForestSampler: exponents must be >= 0");
      const bool integral = e == std::floor(e) && e <= 16;
      int_exp_.push_back(integral ? static_cast<int>(e) : -1);
    }
    if (opt_.periodic) periodic_A_ = periodic_constant(p_);
    if (opt_.coupling_beta > 0.0) {
      if (opt_.coupling_beta < p_.beta) throw std::invalid_argument("ForestSampler: coupling_beta < beta");
      keep_ = p_.beta / opt_.coupling_beta;
      rate_beta_ = opt_.coupling_beta;
    } else {
      rate_beta_ = p_.beta;
    }
  }

  [[nodiscard]] std::uint64_t volume() const { return vol_; }
  [[nodiscard]] const ModelParams& params() const { return p_; }
  [[nodiscard]] int scale() const { return n_; }
  [[nodiscard]] const std::vector<double>& exponents() const { return opt_.exponents; }

  /// Runs one replica. The forest is left in the final state.
  ForestRunInfo run(std::uint64_t seed, std::uint64_t replica, ClusterForest& forest,
                    const SnapshotObserver& observer = nullptr) {
    forest.reset(vol_);
    for (const auto& t : opt_.tags) {
      if (t.index >= vol_) throw std::out_of_range("ForestSampler: tag out of range");
      forest.add_tag(t.index);
    }
    const StreamFactory sf(seed, replica);
    const std::size_t ne = opt_.exponents.size();
    const std::uint64_t b = p_.branching();
    ForestRunInfo info;
    info.edges_per_level.assign(static_cast<std::size_t>(n_) + 1, 0);

    power_.assign(ne, std::vector<long double>(vol_, 1.0L));
    max_.assign(vol_, 1);
    std::uint64_t blocks = vol_;
    std::uint64_t S = 1;
    if (observer && opt_.min_observed_level <= 0) emit(observer, forest, 0, 1.0, 0.0, blocks, S);

    for (int m = 1; m <= n_; ++m) {
      const std::uint64_t nb = blocks / b;
      S *= b;
      for (std::size_t e = 0; e < ne; ++e) {
        auto& v = power_[e];
        for (std::uint64_t k = 0; k < nb; ++k) {
          long double s = 0.0L;
          for (std::uint64_t c = 0; c < b; ++c) s += v[k * b + c];
          v[k] = s;
        }
        v.resize(nb);
      }
      for (std::uint64_t k = 0; k < nb; ++k) {
        std::uint64_t mx = 0;
        for (std::uint64_t c = 0; c < b; ++c) mx = std::max(mx, max_[k * b + c]);
        max_[k] = mx;
      }
      max_.resize(nb);
      blocks = nb;

      const double tm = scale_time(p_, m);
      const double layer_rate = scale_time(p_.with_beta(rate_beta_), m) * 0.5 * static_cast<double>(S) * static_cast<double>(S - 1);
      const bool observe = observer && m >= opt_.min_observed_level;
      double prev = 0.0;
      for (std::size_t seg = 0; seg < opt_.fractions.size(); ++seg) {
        const double f = opt_.fractions[seg];
        if (f > prev) {
          info.edges_per_level[static_cast<std::size_t>(m)] +=
              lay_edges(forest, sf, m, seg, Substream::edges, layer_rate * (f - prev), blocks, S);
        }
        if (observe) emit(observer, forest, m, f, f * tm, blocks, S);
        prev = f;
      }
      if (m == n_ && opt_.periodic) {
        info.periodic_edges =
            lay_edges(forest, sf, m, 0, Substream::periodic, layer_rate * periodic_A_, blocks, S);
        if (observe) emit(observer, forest, m, 1.0 + periodic_A_, (1.0 + periodic_A_) * tm, blocks, S);
      }
    }
    return info;
  }

 private:
  std::uint64_t lay_edges(ClusterForest& forest, const StreamFactory& sf, int m, std::size_t seg, Substream sub,
                          double mean, std::uint64_t blocks, std::uint64_t S) {
    if (!(mean > 0.0) || S < 2) return 0;
    std::poisson_distribution<std::int64_t> pd(mean);
    std::uint64_t total = 0;
    for (std::uint64_t blk = 0; blk < blocks; ++blk) {
      Philox rng = sf.stream(m, blk, sub).at(static_cast<std::uint64_t>(seg) << 40);
      const auto count = static_cast<std::uint64_t>(pd(rng));
      total += count;
      const std::uint64_t base = blk * S;
      for (std::uint64_t e = 0; e < count; ++e) {
        const std::uint64_t u = rng.below(S);
        std::uint64_t v = rng.below(S - 1);
        if (v >= u) ++v;
        if (keep_ < 1.0 && !(rng.uniform() < keep_)) continue;
        const auto r = forest.unite(base + u, base + v);
        if (r.merged) on_merge(blk, r.size_a, r.size_b);
      }
    }
    return total;
  }

  void on_merge(std::uint64_t blk, std::uint64_t a, std::uint64_t b) {
    const auto la = static_cast<long double>(a), lb = static_cast<long double>(b);
    for (std::size_t e = 0; e < int_exp_.size(); ++e) {
      const int k = int_exp_[e];
      long double delta;
      if (k >= 0) {
        // sum_{j=1}^{k-1} C(k,j) a^j b^{k-j}: all terms positive, no cancellation.
        delta = 0.0L;
        long double binom = 1.0L, apow = 1.0L;
        for (int j = 1; j < k; ++j) {
          binom = binom * (k - j + 1) / j;
          apow *= la;
          long double bpow = 1.0L;
          for (int i = 0; i < k - j; ++i) bpow *= lb;
          delta += binom * apow * bpow;
        }
      } else {
        const long double q = opt_.exponents[e];
        delta = std::pow(la + lb, q) - std::pow(la, q) - std::pow(lb, q);
      }
      power_[e][blk] += delta;
    }
    max_[blk] = std::max(max_[blk], a + b);
  }

  void emit(const SnapshotObserver& obs, ClusterForest& forest, int level, double fraction, double time,
            std::uint64_t blocks, std::uint64_t S) {
    LevelSnapshot snap;
    snap.level = level;
    snap.fraction = fraction;
    snap.time = time;
    snap.blocks = blocks;
    snap.block_volume = S;
    snap.exponents = &opt_.exponents;
    snap.power = &power_;
    snap.max_size = &max_;
    snap.forest = &forest;
    obs(snap);
  }

  ModelParams p_;
  int n_;
  SamplerOptions opt_;
  std::uint64_t vol_ = 1;
  double periodic_A_ = 0.0;
  double keep_ = 1.0;
  double rate_beta_ = 0.0;
  std::vector<int> int_exp_;
  std::vector<std::vector<long double>> power_;
  std::vector<std::uint64_t> max_;
};

/// Cluster partition of eta_n for one replica.
inline ClusterForest sample_eta_forest(const ModelParams& p, int n, std::uint64_t seed,
                                       const std::vector<VertexId>& tags = {}, std::uint64_t replica = 0,
                                       ForestRunInfo* info = nullptr) {
  if (!std::isfinite(p.beta)) throw std::invalid_argument("sample_eta_forest: nonfinite beta");
  SamplerOptions opt;
  opt.tags = tags;
  ForestSampler sampler(p, n, opt);
  ClusterForest forest;
  auto ri = sampler.run(seed, replica, forest);
  if (info) *info = ri;
  return forest;
}

inline SizeMultiset forest_sizes(const ClusterForest& f) { return SizeMultiset::from_integers(f.cluster_sizes()); }

/// Size multiset of eta_n computed cluster-recursively (no vertex array).
inline SizeMultiset sample_sizes(const ModelParams& p, int n, std::uint64_t seed, std::uint64_t replica = 0) {
  if (!std::isfinite(p.beta)) throw std::invalid_argument("sample_sizes: nonfinite beta");
  return recursive_sizes(p, n, seed, replica);
}

/// Periodic-boundary sizes: the top layer runs for t_n + beta A L^{-(d+a)n}.
/// The surplus comes from its own substream, so the result is coupled to
/// sample_sizes with the same (seed, replica) and dominates it.
inline SizeMultiset sample_eta_periodic(const ModelParams& p, int n, std::uint64_t seed, std::uint64_t replica = 0,
                                        double A = -1.0) {
  if (!std::isfinite(p.beta)) throw std::invalid_argument("sample_eta_periodic: nonfinite beta");
  RecursiveOptions opt;
  const double a = A >= 0.0 ? A : periodic_constant(p);
  opt.periodic_extra = a * scale_time(p, n);
  return recursive_sizes(p, n, seed, replica, opt);
}

/// Translation-averaged connection probabilities by distance level:
/// entry h (1..n) is the fraction of ordered pairs at hierarchical distance
/// h that are connected in the forest.
inline std::vector<double> connection_profile(ClusterForest& forest, const ModelParams& p, int n) {
  const std::uint64_t vol = forest.vertex_count();
  if (vol != block_volume(p, n)) throw std::invalid_argument("connection_profile: forest size mismatch");
  std::vector<ClusterForest::index_type> roots(vol);
  for (std::uint64_t v = 0; v < vol; ++v) roots[v] = forest.find(v);
  std::vector<long double> within(static_cast<std::size_t>(n) + 1, 0.0L);
  within[0] = static_cast<long double>(vol);
  const std::uint64_t b = p.branching();
  std::uint64_t S = 1;
  std::vector<ClusterForest::index_type> seg;
  for (int h = 1; h <= n; ++h) {
    S *= b;
    long double acc = 0.0L;
    for (std::uint64_t base = 0; base < vol; base += S) {
      seg.assign(roots.begin() + static_cast<std::ptrdiff_t>(base), roots.begin() + static_cast<std::ptrdiff_t>(base + S));
      std::sort(seg.begin(), seg.end());
      for (std::size_t i = 0; i < seg.size();) {
        std::size_t j = i;
        while (j < seg.size() && seg[j] == seg[i]) ++j;
        acc += static_cast<long double>(j - i) * static_cast<long double>(j - i);
        i = j;
      }
    }
    within[static_cast<std::size_t>(h)] = acc;
  }
  std::vector<double> prob(static_cast<std::size_t>(n) + 1, 1.0);
  std::uint64_t Sh = 1;
  for (int h = 1; h <= n; ++h) {
    const std::uint64_t prevS = Sh;
    Sh *= b;
    const long double pairs = static_cast<long double>(vol) * static_cast<long double>(Sh - prevS);
    prob[static_cast<std::size_t>(h)] =
        static_cast<double>((within[static_cast<std::size_t>(h)] - within[static_cast<std::size_t>(h) - 1]) / pairs);
  }
  return prob;
}

}  // namespace hierperc
