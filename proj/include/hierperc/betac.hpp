// SPDX-License-Identifier: Apache-2.0
//
// Critical-point bracketing. The normalized susceptibility
// g_n = L^{-(d+a)n} E||X_{n,t_n}||_2^2 flows like L^{-a n} below beta_c,
// stays flat at beta_c and grows like L^{(d-a)n} above. Probes are
// classified by the sign of the flow slope and bisected.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hierperc/momentode.hpp"
#include "hierperc/percsim.hpp"
#include "hierperc/stats.hpp"

namespace hierperc {

struct FlowEstimate {
  double slope = 0.0;
  double se = 0.0;
  int n_top = 0;
  int window = 0;
  std::uint64_t replicas = 0;
  std::vector<double> log_g;  ///< log_L g_m for m in the window, low to high
};

/// Mean per-scale change of log_L g_m over scales [n_top - window + 1, n_top],
/// i.e. (log_L g_top - log_L g_low)/(window - 1), with a delta-method SE
/// that accounts for both ends being measured on the same replicas.
inline FlowEstimate flow_slope(const ModelParams& prm, int n_top, int window, std::uint64_t reps, std::uint64_t seed,
                               std::uint64_t vertex_cap = kDefaultForestCap) {
  if (window < 3) throw std::invalid_argument("flow_slope: window must span >= 3 scales");
  if (reps < 2) throw std::invalid_argument("flow_slope: need >= 2 replicas");
  const int lo = n_top - window + 1;
  if (lo < 0) throw std::out_of_range("flow_slope: window exceeds available scales");
  if (block_volume(prm, n_top) > vertex_cap) throw std::out_of_range("flow_slope: window exceeds scale cap");
  SamplerOptions opt;
  opt.exponents = {2.0};
  opt.min_observed_level = lo;
  opt.vertex_cap = vertex_cap;
  ForestSampler sampler(prm, n_top, opt);
  ClusterForest forest;
  CovAccumulator ends;
  std::vector<Accumulator> levels(static_cast<std::size_t>(window));
  std::vector<long double> per_level(static_cast<std::size_t>(window));
  for (std::uint64_t r = 0; r < reps; ++r) {
    sampler.run(seed, r, forest, [&](const LevelSnapshot& s) {
      long double sum = 0.0L;
      for (std::uint64_t b = 0; b < s.blocks; ++b) sum += s.power_sum(0, b);
      per_level[static_cast<std::size_t>(s.level - lo)] = sum / static_cast<long double>(s.blocks);
    });
    for (int k = 0; k < window; ++k) levels[static_cast<std::size_t>(k)].add(per_level[static_cast<std::size_t>(k)]);
    ends.add(per_level.front(), per_level.back());
  }
  FlowEstimate fe;
  fe.n_top = n_top;
  fe.window = window;
  fe.replicas = reps;
  const double lnL = std::log(static_cast<double>(prm.L));
  for (int k = 0; k < window; ++k) {
    const double mean = static_cast<double>(levels[static_cast<std::size_t>(k)].mean());
    fe.log_g.push_back(std::log(mean) / lnL - (prm.d + prm.alpha) * (lo + k));
  }
  fe.slope = (fe.log_g.back() - fe.log_g.front()) / (window - 1);
  const long double ml = ends.x().mean(), mh = ends.y().mean(), R = static_cast<long double>(reps);
  const long double var = ends.x().variance() / (ml * ml) + ends.y().variance() / (mh * mh) -
                          2.0L * ends.covariance() / (ml * mh);
  fe.se = static_cast<double>(std::sqrt(std::max(var, 0.0L) / R)) / lnL / (window - 1);
  return fe;
}

struct FlowProbe {
  double beta = 0.0;
  int verdict = 0;  ///< -1 subcritical, +1 supercritical, 0 unclassified
  std::vector<FlowEstimate> attempts;
};

struct BetacOptions {
  double tolerance = 0.05;                ///< relative bracket width target
  double work_budget = 6e9;               ///< total vertex-replica work allowed
  int n_start = 10;
  int n_max = 20;
  int n_step = 2;
  int window = 4;
  std::uint64_t reps_start = 32;
  std::uint64_t reps_max = 512;
  double beta_start = 1.0;                ///< first probe when no bracket is given
  double lower = -1.0, upper = -1.0;      ///< optional known bracket
  std::uint64_t vertex_cap = kDefaultForestCap;
};

struct BetacBracket {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool inconclusive = false;
  std::string note;
  double work_used = 0.0;
  std::vector<FlowProbe> probes;

  [[nodiscard]] double estimate() const { return 0.5 * (lower + upper); }
  [[nodiscard]] double rel_width() const { return (upper - lower) / estimate(); }

  /// Every subcritical probe lies below every supercritical one.
  [[nodiscard]] bool monotone() const {
    double max_sub = -1.0, min_super = std::numeric_limits<double>::infinity();
    for (const auto& p : probes) {
      if (p.verdict < 0) max_sub = std::max(max_sub, p.beta);
      if (p.verdict > 0) min_super = std::min(min_super, p.beta);
    }
    return max_sub < min_super;
  }
};

/// Classifies one coupling; escalation doubles replicas while the noise
/// dominates the threshold and otherwise moves to larger scales.
inline FlowProbe classify_beta(const ModelParams& prm, double beta, const BetacOptions& opt, std::uint64_t seed,
                               double& work_left) {
  FlowProbe probe;
  probe.beta = beta;
  const double tau = prm.alpha / 4.0;
  int n = opt.n_start;
  std::uint64_t reps = opt.reps_start;
  const ModelParams pb = prm.with_beta(beta);
  while (true) {
    const double cost = static_cast<double>(reps) * static_cast<double>(block_volume(prm, n));
    if (cost > work_left) break;
    work_left -= cost;
    auto fe = flow_slope(pb, n, opt.window, reps, sub_seed(seed, static_cast<std::uint64_t>(n) * 1000003ULL + reps),
                         opt.vertex_cap);
    probe.attempts.push_back(fe);
    if (fe.slope + 4.0 * fe.se < -tau) {
      probe.verdict = -1;
      break;
    }
    if (fe.slope - 4.0 * fe.se > tau) {
      probe.verdict = 1;
      break;
    }
    // Trend rule: a significant slope whose magnitude grew since the
    // previous scale. Off-critical flow accelerates; finite-size bias decays.
    const FlowEstimate* prev = nullptr;
    for (const auto& a : probe.attempts)
      if (a.n_top < fe.n_top && (!prev || a.n_top >= prev->n_top)) prev = &a;
    if (prev && std::abs(fe.slope) > 4.0 * fe.se && std::abs(prev->slope) > 4.0 * prev->se &&
        (fe.slope > 0) == (prev->slope > 0) && std::abs(fe.slope) > std::abs(prev->slope)) {
      probe.verdict = fe.slope > 0 ? 1 : -1;
      break;
    }
    if (4.0 * fe.se > 0.5 * tau && reps < opt.reps_max) {
      reps *= 2;
    } else if (n + opt.n_step <= opt.n_max && block_volume(prm, n + opt.n_step) <= opt.vertex_cap) {
      n += opt.n_step;
    } else {
      break;
    }
  }
  return probe;
}

/// Bisection for beta_c. Unclassified probes are bracketed from both sides
/// by probing the gaps next to them; the result is the tightest
/// [classified subcritical, classified supercritical] pair.
inline BetacBracket bisect_betac(const ModelParams& prm, const BetacOptions& opt, std::uint64_t seed) {
  prm.require_critical_point();
  if (!(opt.tolerance > 0.0)) throw std::invalid_argument("bisect_betac: tolerance must be > 0");
  BetacBracket br;
  double work_left = opt.work_budget;
  br.lower = opt.lower >= 0.0 ? opt.lower : 0.0;
  br.upper = opt.upper > 0.0 ? opt.upper : std::numeric_limits<double>::infinity();
  auto done = [&]() {
    br.work_used = opt.work_budget - work_left;
    return br;
  };
  if (std::isfinite(br.upper) && br.rel_width() <= opt.tolerance) {
    br.converged = true;
    return done();
  }
  std::vector<double> unclassified;
  std::uint64_t probe_id = 0;
  auto run_probe = [&](double beta) {
    auto p = classify_beta(prm, beta, opt, sub_seed(seed, ++probe_id), work_left);
    br.probes.push_back(p);
    if (p.verdict < 0) br.lower = std::max(br.lower, beta);
    if (p.verdict > 0) br.upper = std::min(br.upper, beta);
    if (p.verdict == 0) unclassified.push_back(beta);
    std::erase_if(unclassified, [&](double u) { return u <= br.lower || u >= br.upper; });
    return p.verdict;
  };
  // Find a supercritical coupling by doubling.
  double b = opt.beta_start;
  while (!std::isfinite(br.upper)) {
    const int v = run_probe(b);
    if (v == 0 && work_left <= 0.0) {
      br.inconclusive = true;
      br.note = "budget exhausted before an upper bound was found";
      return done();
    }
    b *= 2.0;
    if (b > 1e9) {
      br.inconclusive = true;
      br.note = "no supercritical probe found";
      return done();
    }
  }
  while (br.rel_width() > opt.tolerance) {
    double next;
    if (unclassified.empty()) {
      next = 0.5 * (br.lower + br.upper);
    } else {
      const auto [umin, umax] = std::minmax_element(unclassified.begin(), unclassified.end());
      const double gap_lo = *umin - br.lower, gap_hi = br.upper - *umax;
      // Gaps narrower than a quarter of the tolerance cannot tighten the
      // bracket enough; the classifier has hit its resolution.
      const double floor_gap = 0.25 * opt.tolerance * br.estimate();
      if (gap_lo < floor_gap && gap_hi < floor_gap) {
        br.inconclusive = true;
        br.note = "critical window wider than tolerance at the largest scale";
        return done();
      }
      next = gap_lo >= gap_hi ? 0.5 * (br.lower + *umin) : 0.5 * (*umax + br.upper);
    }
    const double before = work_left;
    run_probe(next);
    if (work_left <= 0.0 || work_left == before) {
      if (br.rel_width() > opt.tolerance) {
        br.inconclusive = true;
        br.note = "work budget exhausted";
      }
      break;
    }
  }
  br.converged = br.rel_width() <= opt.tolerance;
  return done();
}

struct LowerBoundAuditRow {
  int n = 0;
  double t_fraction = 0.0;
  MomentEstimate m2;
  double bound = 0.0;
  bool ok = true;
};

/// Checks E||X_{n,t}||_2^2 >= hydro2(beta) - 4 SE over levels 1..n_top and
/// the given time fractions, sampling at coupling prm.beta.
inline std::vector<LowerBoundAuditRow> lower_bound_audit(const ModelParams& prm, int n_top, std::uint64_t reps,
                                                         std::uint64_t seed,
                                                         const std::vector<double>& fractions = {0.0, 0.5, 1.0}) {
  SamplerOptions opt;
  opt.exponents = {2.0};
  opt.fractions = fractions;
  opt.min_observed_level = 1;
  ForestSampler sampler(prm, n_top, opt);
  ClusterForest forest;
  std::vector<double> fr = fractions;
  std::sort(fr.begin(), fr.end());
  if (fr.empty() || fr.back() != 1.0) fr.push_back(1.0);
  std::vector<std::vector<Accumulator>> acc(static_cast<std::size_t>(n_top) + 1, std::vector<Accumulator>(fr.size()));
  for (std::uint64_t r = 0; r < reps; ++r) {
    sampler.run(seed, r, forest, [&](const LevelSnapshot& s) {
      const auto k = static_cast<std::size_t>(std::find(fr.begin(), fr.end(), s.fraction) - fr.begin());
      if (k >= fr.size()) return;
      // Blocks within one replica are iid copies; the replica mean is one observation.
      long double sum = 0.0L;
      for (std::uint64_t b = 0; b < s.blocks; ++b) sum += s.power_sum(0, b);
      acc[static_cast<std::size_t>(s.level)][k].add(sum / static_cast<long double>(s.blocks));
    });
  }
  std::vector<LowerBoundAuditRow> rows;
  for (int n = 1; n <= n_top; ++n)
    for (std::size_t k = 0; k < fr.size(); ++k) {
      LowerBoundAuditRow row;
      row.n = n;
      row.t_fraction = fr[k];
      row.m2 = acc[static_cast<std::size_t>(n)][k].estimate();
      row.bound = hydro2(prm, prm.beta, n, fr[k] * scale_time(prm, n));
      row.ok = row.m2.mean >= row.bound - 4.0 * row.m2.se;
      rows.push_back(row);
    }
  return rows;
}

}  // namespace hierperc
