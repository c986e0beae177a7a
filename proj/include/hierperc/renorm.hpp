// SPDX-License-Identifier: Apache-2.0
//
// Renormalization map on laws of decreasing mass lists: take the disjoint
// union of L^d iid draws, run the multiplicative coalescent for time
// L^{-(d+a)}, rescale masses by L^{-(d+a)/2}. Laws are particle
// approximations (finite collections of draws).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hierperc/coalescent.hpp"
#include "hierperc/lattice.hpp"
#include "hierperc/percsim.hpp"
#include "hierperc/rng.hpp"
#include "hierperc/size_multiset.hpp"
#include "hierperc/stats.hpp"

namespace hierperc {

inline constexpr double kDefaultMassFloor = 1e-12;

struct EmpiricalLaw {
  std::vector<SizeMultiset> draws;
  int steps = 0;
  std::vector<double> deficit;  ///< per step: max over draws of dropped mass / total
};

/// Law with every draw equal to the single mass sqrt(beta).
inline EmpiricalLaw dirac_law(double beta, std::size_t draws) {
  EmpiricalLaw law;
  law.draws.assign(draws, beta > 0.0 ? SizeMultiset(std::vector<double>{std::sqrt(beta)}) : SizeMultiset{});
  return law;
}

struct RenormOptions {
  /// Resampling: each output draw takes L^d input draws uniformly with
  /// replacement. Disjoint: output i consumes inputs [i L^d, (i+1) L^d), so
  /// outputs are exactly iid when inputs are.
  enum class Mode { resample, disjoint };
  Mode mode = Mode::resample;
  std::size_t out_draws = 0;  ///< resample mode only; 0 keeps the input count
  double mass_floor = kDefaultMassFloor;
};

inline EmpiricalLaw renorm_step(const EmpiricalLaw& law, const ModelParams& prm, std::uint64_t seed,
                                const RenormOptions& opt = {}) {
  prm.validate();
  if (law.draws.empty()) throw std::invalid_argument("renorm_step: empty law");
  const std::uint64_t b = prm.branching();
  const double duration = 1.0 / prm.scale_factor();
  const double rescale = std::pow(prm.scale_factor(), -0.5);
  const bool disjoint = opt.mode == RenormOptions::Mode::disjoint;
  const std::size_t out_n = disjoint ? law.draws.size() / b : (opt.out_draws ? opt.out_draws : law.draws.size());
  if (out_n == 0) throw std::invalid_argument("renorm_step: fewer than L^d draws in disjoint mode");
  const StreamFactory sf(seed, static_cast<std::uint64_t>(law.steps));
  EmpiricalLaw out;
  out.steps = law.steps + 1;
  out.deficit = law.deficit;
  out.draws.reserve(out_n);
  double worst = 0.0;
  for (std::size_t i = 0; i < out_n; ++i) {
    Philox pick = sf.stream(0, i, Substream::aux);
    std::vector<double> masses;
    for (std::uint64_t c = 0; c < b; ++c) {
      const auto& d = law.draws[disjoint ? i * b + c : pick.below(law.draws.size())];
      masses.insert(masses.end(), d.masses().begin(), d.masses().end());
    }
    double total = 0.0;
    for (double m : masses) total += m;
    Philox rng = sf.stream(0, i, Substream::coalescent);
    coalesce_final_real(masses, duration, rng);
    for (double& m : masses) m *= rescale;
    SizeMultiset s;
    s.assign_unchecked(std::move(masses));
    if (total > 0.0) {
      const double dropped = s.drop_below(opt.mass_floor * total * rescale);
      worst = std::max(worst, dropped / (total * rescale));
    }
    s.sort_desc();
    out.draws.push_back(std::move(s));
  }
  out.deficit.push_back(worst);
  return out;
}

struct RenormSummary {
  int step = 0;
  MomentEstimate mean_norm2;
  double max_q10 = 0.0, max_q50 = 0.0, max_q90 = 0.0;
  double deficit = 0.0;
  /// Comparison with normalized direct samples at scale `step` (when run).
  bool compared = false;
  KsResult ks_norm2;
  KsResult ks_max;
};

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const auto k = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(k);
  return k + 1 < v.size() ? v[k] * (1 - f) + v[k + 1] * f : v.back();
}

/// Normalized direct samples sqrt(beta) L^{-(d+a)n/2} (cluster sizes at scale n).
inline std::vector<SizeMultiset> direct_normalized(const ModelParams& prm, int n, std::size_t draws,
                                                   std::uint64_t seed) {
  std::vector<SizeMultiset> out;
  out.reserve(draws);
  const double c = std::sqrt(prm.beta) * std::pow(prm.scale_factor(), -0.5 * n);
  for (std::size_t r = 0; r < draws; ++r) {
    auto s = sample_sizes(prm, n, seed, r);
    s.scale(c);
    s.sort_desc();
    out.push_back(std::move(s));
  }
  return out;
}

/// Iterates the map from the Dirac law at sqrt(beta). Steps up to
/// `compare_up_to` are checked against direct simulation by two-sample KS
/// on ||.||_2^2 and on the largest entry.
inline std::vector<RenormSummary> iterate_renorm(const ModelParams& prm, int steps, std::size_t draws,
                                                 std::uint64_t seed, int compare_up_to = 0,
                                                 EmpiricalLaw* final_law = nullptr,
                                                 const RenormOptions& opt = {}) {
  if (steps < 1) throw std::invalid_argument("iterate_renorm: steps must be >= 1");
  if (draws == 0) throw std::invalid_argument("iterate_renorm: empty law");
  // Disjoint mode needs L^{d steps} initial copies per final draw.
  std::size_t initial = draws;
  if (opt.mode == RenormOptions::Mode::disjoint)
    for (int s = 0; s < steps; ++s) initial *= prm.branching();
  EmpiricalLaw law = dirac_law(prm.beta, initial);
  std::vector<RenormSummary> out;
  for (int s = 1; s <= steps; ++s) {
    if (prm.beta > 0.0) {
      law = renorm_step(law, prm, seed, opt);
    } else {
      law.steps += 1;
      law.deficit.push_back(0.0);
      if (opt.mode == RenormOptions::Mode::disjoint) law.draws.resize(law.draws.size() / prm.branching());
    }
    RenormSummary sm;
    sm.step = s;
    sm.deficit = law.deficit.back();
    std::vector<double> n2, mx;
    for (const auto& d : law.draws) {
      n2.push_back(d.power_sum(2.0));
      mx.push_back(d.max());
    }
    sm.mean_norm2 = estimate_of(n2);
    sm.max_q10 = quantile(mx, 0.1);
    sm.max_q50 = quantile(mx, 0.5);
    sm.max_q90 = quantile(mx, 0.9);
    if (s <= compare_up_to && prm.beta > 0.0) {
      const auto direct = direct_normalized(prm, s, draws, sub_seed(seed, 0xd1ec7ULL + static_cast<std::uint64_t>(s)));
      std::vector<double> dn2, dmx;
      for (const auto& d : direct) {
        dn2.push_back(d.power_sum(2.0));
        dmx.push_back(d.max());
      }
      sm.compared = true;
      sm.ks_norm2 = ks_two_sample(n2, dn2, 1e-9);
      sm.ks_max = ks_two_sample(mx, dmx, 1e-9);
    }
    out.push_back(sm);
  }
  if (final_law) *final_law = std::move(law);
  return out;
}

}  // namespace hierperc
