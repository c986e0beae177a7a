// SPDX-License-Identifier: Apache-2.0
//
// Estimators with standard errors: pooled moments, percolation statistics
// (M_n, |K_n| moments, tails, size-biased law, normalized norms, error
// terms), bootstrap, two-sample KS, least squares.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hierperc/lattice.hpp"
#include "hierperc/rng.hpp"

namespace hierperc {

struct MomentEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::uint64_t replicas = 0;
  bool exact = false;

  /// Pools two estimates of the same expectation from disjoint replica
  /// sets; the sample variance is recovered from se and replica count.
  [[nodiscard]] MomentEstimate merge(const MomentEstimate& o) const {
    if (replicas == 0) return o;
    if (o.replicas == 0) return *this;
    const long double n1 = replicas, n2 = o.replicas, n = n1 + n2;
    const long double m = (n1 * mean + n2 * o.mean) / n;
    auto m2 = [](const MomentEstimate& e) {
      const long double k = e.replicas;
      return k > 1 ? static_cast<long double>(e.se) * e.se * k * (k - 1) : 0.0L;
    };
    const long double d = static_cast<long double>(o.mean) - mean;
    const long double M2 = m2(*this) + m2(o) + d * d * n1 * n2 / n;
    MomentEstimate r;
    r.mean = static_cast<double>(m);
    r.replicas = replicas + o.replicas;
    r.se = n > 1 ? static_cast<double>(std::sqrt(M2 / (n - 1) / n)) : 0.0;
    r.exact = exact && o.exact;
    return r;
  }
};

/// Welford accumulator in extended precision.
class Accumulator {
 public:
  void add(long double x) {
    ++n_;
    const long double d = x - mean_;
    mean_ += d / static_cast<long double>(n_);
    m2_ += d * (x - mean_);
  }

  void merge(const Accumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const long double n1 = n_, n2 = o.n_, n = n1 + n2;
    const long double d = o.mean_ - mean_;
    mean_ += d * n2 / n;
    m2_ += o.m2_ + d * d * n1 * n2 / n;
    n_ += o.n_;
  }

  [[nodiscard]] std::uint64_t count() const { return n_; }
  [[nodiscard]] long double mean() const { return mean_; }
  [[nodiscard]] long double variance() const { return n_ > 1 ? m2_ / static_cast<long double>(n_ - 1) : 0.0L; }

  [[nodiscard]] MomentEstimate estimate() const {
    MomentEstimate e;
    e.mean = static_cast<double>(mean_);
    e.replicas = n_;
    e.se = n_ > 1 ? static_cast<double>(std::sqrt(variance() / static_cast<long double>(n_))) : 0.0;
    return e;
  }

 private:
  std::uint64_t n_ = 0;
  long double mean_ = 0.0L;
  long double m2_ = 0.0L;
};

/// Paired accumulator tracking the covariance of two quantities.
class CovAccumulator {
 public:
  void add(long double x, long double y) {
    ++n_;
    const long double dx = x - mx_;
    mx_ += dx / static_cast<long double>(n_);
    my_ += (y - my_) / static_cast<long double>(n_);
    cxy_ += dx * (y - my_);
    ax_.add(x);
    ay_.add(y);
  }
  [[nodiscard]] std::uint64_t count() const { return n_; }
  [[nodiscard]] long double covariance() const { return n_ > 1 ? cxy_ / static_cast<long double>(n_ - 1) : 0.0L; }
  [[nodiscard]] const Accumulator& x() const { return ax_; }
  [[nodiscard]] const Accumulator& y() const { return ay_; }

 private:
  std::uint64_t n_ = 0;
  long double mx_ = 0.0L, my_ = 0.0L, cxy_ = 0.0L;
  Accumulator ax_, ay_;
};

inline MomentEstimate estimate_of(const std::vector<double>& xs) {
  Accumulator a;
  for (double x : xs) a.add(x);
  return a.estimate();
}

// ---------------------------------------------------------------------------
// Regression

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Weighted least squares y = a + b x; weights are inverse variances. With
/// unit weights the slope SE uses the residual variance.
inline LinearFit weighted_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& w = {}) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n || (!w.empty() && w.size() != n))
    throw std::invalid_argument("weighted_fit: need >= 2 matching points");
  long double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double wi = w.empty() ? 1.0L : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const long double mx = sx / sw, my = sy / sw;
  long double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double wi = w.empty() ? 1.0L : w[i];
    sxx += wi * (x[i] - mx) * (x[i] - mx);
    sxy += wi * (x[i] - mx) * (y[i] - my);
    syy += wi * (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0) throw std::invalid_argument("weighted_fit: degenerate abscissae");
  LinearFit f;
  f.points = n;
  f.slope = static_cast<double>(sxy / sxx);
  f.intercept = static_cast<double>(my - sxy / sxx * mx);
  long double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double wi = w.empty() ? 1.0L : w[i];
    const long double r = y[i] - (f.intercept + f.slope * x[i]);
    rss += wi * r * r;
  }
  f.r2 = syy > 0 ? static_cast<double>(1.0L - rss / syy) : 1.0;
  if (w.empty()) {
    f.slope_se = n > 2 ? static_cast<double>(std::sqrt(rss / (n - 2) / sxx)) : 0.0;
  } else {
    f.slope_se = static_cast<double>(std::sqrt(1.0L / sxx));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Values within relative distance `tie_tol` of each other count as ties
/// (guards atoms computed along different floating-point paths).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b, double tie_tol = 0.0) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    const double top = v + tie_tol * std::abs(v);
    while (i < a.size() && a[i] <= top) ++i;
    while (j < b.size() && b[j] <= top) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
  return r;
}

// ---------------------------------------------------------------------------
// Bootstrap

struct BootstrapCI {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double se = 0.0;
};

inline constexpr int kBootstrapResamples = 200;
inline constexpr std::uint64_t kBootstrapSeed = 0xb007'57a9'0000'0001ULL;

/// Percentile bootstrap (95%) of a statistic over row-indexed replicas.
/// The interval is widened to contain the plug-in point estimate.
inline BootstrapCI bootstrap(std::size_t rows, const std::function<double(const std::vector<std::size_t>&)>& stat,
                             int resamples = kBootstrapResamples, std::uint64_t seed = kBootstrapSeed) {
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), 0);
  BootstrapCI ci;
  ci.estimate = stat(idx);
  Philox rng(seed, 0);
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    for (auto& k : idx) k = rng.below(rows);
    vals.push_back(stat(idx));
  }
  std::sort(vals.begin(), vals.end());
  const auto q = [&](double f) {
    const double pos = f * (static_cast<double>(vals.size()) - 1.0);
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    return k + 1 < vals.size() ? vals[k] * (1 - frac) + vals[k + 1] * frac : vals.back();
  };
  ci.lo = std::min(q(0.025), ci.estimate);
  ci.hi = std::max(q(0.975), ci.estimate);
  const MomentEstimate e = estimate_of(vals);
  ci.se = e.se * std::sqrt(static_cast<double>(vals.size()));
  return ci;
}

// ---------------------------------------------------------------------------
// Percolation statistics

/// Plug-in typical maximum: smallest m with P(max >= m) <= 1/e.
inline std::uint64_t estimate_Mn(std::vector<std::uint64_t> maxima) {
  if (maxima.size() < 100) throw std::invalid_argument("estimate_Mn: need >= 100 samples");
  std::sort(maxima.begin(), maxima.end());
  const double N = static_cast<double>(maxima.size());
  const double inv_e = std::exp(-1.0);
  // Survival P(max >= m) drops only just above sample values.
  std::uint64_t m = 0;
  std::size_t below = 0;  // samples < m
  while (true) {
    while (below < maxima.size() && maxima[below] < m) ++below;
    const double surv = (N - static_cast<double>(below)) / N;
    if (surv <= inv_e) return m;
    m = maxima[below] + 1;
  }
}

/// E|K_n|^p from per-replica samples of ||X_{n,t_n}||_{p+1}^{p+1}.
inline MomentEstimate kn_moments_from_norms(const std::vector<double>& norm_samples, int n, const ModelParams& prm) {
  MomentEstimate e = estimate_of(norm_samples);
  const double scale = 1.0 / static_cast<double>(block_volume(prm, n));
  e.mean *= scale;
  e.se *= scale;
  return e;
}

/// Direct estimator of E|K_n|^p from origin-cluster sizes.
inline MomentEstimate kn_moments_tagged(const std::vector<double>& origin_sizes, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("kn_moments: p must be >= 1");
  Accumulator a;
  for (double k : origin_sizes) a.add(std::pow(static_cast<long double>(k), static_cast<long double>(p)));
  return a.estimate();
}

struct TailCurve {
  std::vector<double> grid;
  std::vector<double> survival;
  std::vector<double> se;
  std::vector<double> lo;
  std::vector<double> hi;
  LinearFit fit;
  double window_lo = 0.0;
  double window_hi = 0.0;
};

namespace detail {

inline LinearFit fit_tail(TailCurve& tc) {
  std::vector<double> x, y, w;
  for (std::size_t i = 0; i < tc.grid.size(); ++i) {
    const double k = tc.grid[i];
    if (k < tc.window_lo || k > tc.window_hi || !(tc.survival[i] > 0.0) || !(tc.se[i] > 0.0)) continue;
    x.push_back(std::log(k));
    y.push_back(std::log(tc.survival[i]));
    const double sl = tc.se[i] / tc.survival[i];
    w.push_back(1.0 / (sl * sl));
  }
  if (x.size() < 2) throw std::invalid_argument("tail_curve: empty fitting window");
  return weighted_fit(x, y, w);
}

}  // namespace detail

/// Survival curve of origin-cluster sizes with binomial (Wilson) intervals
/// and a weighted log-log slope over the window [10 grid[0], q_0.98].
inline TailCurve tail_curve(const std::vector<double>& sizes, const std::vector<double>& grid) {
  if (sizes.empty() || grid.empty()) throw std::invalid_argument("tail_curve: empty input");
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("tail_curve: grid must be sorted");
  auto s = sizes;
  std::sort(s.begin(), s.end());
  const double N = static_cast<double>(s.size());
  TailCurve tc;
  tc.grid = grid;
  for (double k : grid) {
    const double c = static_cast<double>(s.end() - std::lower_bound(s.begin(), s.end(), k));
    const double ph = c / N;
    tc.survival.push_back(ph);
    tc.se.push_back(std::sqrt(std::max(ph * (1 - ph), 1.0 / N) / N));
    const double z = 1.96, den = 1 + z * z / N;
    const double ctr = (ph + z * z / (2 * N)) / den;
    const double half = z * std::sqrt(ph * (1 - ph) / N + z * z / (4 * N * N)) / den;
    // The Wilson interval contains ph; clamp against rounding at ph = 0, 1.
    tc.lo.push_back(std::min(ph, std::max(0.0, ctr - half)));
    tc.hi.push_back(std::max(ph, std::min(1.0, ctr + half)));
  }
  tc.window_lo = 10.0 * grid.front();
  tc.window_hi = s[static_cast<std::size_t>(std::floor(0.98 * (N - 1)))];
  tc.fit = detail::fit_tail(tc);
  return tc;
}

/// Survival of |K_n| from whole partitions: each replica contributes the
/// fraction of vertices lying in clusters of size >= k, which has mean
/// P(|K_n| >= k). Standard errors are across replicas.
inline TailCurve tail_curve_from_partitions(const std::vector<std::vector<double>>& partitions, double volume,
                                            const std::vector<double>& grid) {
  if (partitions.size() < 2 || grid.empty()) throw std::invalid_argument("tail_curve: need >= 2 replicas");
  TailCurve tc;
  tc.grid = grid;
  std::vector<Accumulator> acc(grid.size());
  std::vector<double> all_top;
  for (const auto& part : partitions) {
    auto s = part;
    std::sort(s.begin(), s.end());
    std::vector<double> suffix(s.size() + 1, 0.0);
    for (std::size_t i = s.size(); i-- > 0;) suffix[i] = suffix[i + 1] + s[i];
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto it = std::lower_bound(s.begin(), s.end(), grid[g]);
      acc[g].add(suffix[static_cast<std::size_t>(it - s.begin())] / volume);
    }
  }
  for (auto& a : acc) {
    const auto e = a.estimate();
    tc.survival.push_back(e.mean);
    tc.se.push_back(e.se);
    tc.lo.push_back(std::max(0.0, e.mean - 1.96 * e.se));
    tc.hi.push_back(std::min(1.0, e.mean + 1.96 * e.se));
  }
  // Top 2% of the size-biased law: largest k with survival >= 0.02.
  tc.window_lo = 10.0 * grid.front();
  tc.window_hi = grid.front();
  for (std::size_t g = 0; g < grid.size(); ++g)
    if (tc.survival[g] >= 0.02) tc.window_hi = grid[g];
  tc.fit = detail::fit_tail(tc);
  return tc;
}

/// Moment of the size-biased, mean-rescaled law: E K^{p+1} (E K)^{p-1} / (E K^2)^p.
inline double size_biased_moments(const std::vector<double>& samples, int p) {
  if (p < 1) throw std::invalid_argument("size_biased_moments: p must be >= 1");
  long double s1 = 0, s2 = 0, sp = 0;
  for (double k : samples) {
    s1 += k;
    s2 += static_cast<long double>(k) * k;
    sp += std::pow(static_cast<long double>(k), p + 1);
  }
  const long double N = samples.size();
  if (!(s2 > 0)) throw std::domain_error("size_biased_moments: zero second moment");
  return static_cast<double>((sp / N) * std::pow(s1 / N, p - 1) / std::pow(s2 / N, p));
}

/// Weighted version: sample i stands for mass w_i of the law of |K|. The
/// normalization of the weights cancels, so they need not be summable.
inline double size_biased_moments_weighted(const std::vector<double>& samples, const std::vector<double>& weights,
                                           int p) {
  if (p < 1) throw std::invalid_argument("size_biased_moments: p must be >= 1");
  if (weights.size() != samples.size()) throw std::invalid_argument("size_biased_moments: weight count mismatch");
  long double s1 = 0, s2 = 0, sp = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const long double k = samples[i], w = weights[i];
    s1 += w * k;
    s2 += w * k * k;
    sp += w * std::pow(k, p + 1);
  }
  if (!(s2 > 0)) throw std::domain_error("size_biased_moments: zero second moment");
  return static_cast<double>(sp * std::pow(s1, p - 1) / std::pow(s2, p));
}

/// Same statistic from norm moments: E|K|^q = L^{-dn} E||X||_{q+1}^{q+1},
/// the volume factors cancel.
inline double size_biased_moments_from_norms(double m_p2, double m2, double m3, int p) {
  if (!(m3 > 0)) throw std::domain_error("size_biased_moments: zero second moment");
  return m_p2 * std::pow(m2, p - 1) / std::pow(m3, p);
}

/// E sum_i (L^{-(d+a)n/2} |K_i|)^p from per-replica power sums sum_i |K_i|^p.
inline MomentEstimate lp_normalized(const std::vector<double>& power_sums, double p, int n, const ModelParams& prm) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_normalized: p must be >= 1");
  MomentEstimate e = estimate_of(power_sums);
  const double scale = std::pow(prm.scale_factor(), -0.5 * p * n);
  e.mean *= scale;
  e.se *= scale;
  return e;
}

/// ||P||_{2,m}^2 = sum_A |A| min(|A|, m) for one partition.
inline double truncated_norm2(const std::vector<double>& sizes, double m) {
  if (!(m >= 1.0)) throw std::invalid_argument("truncated_m2: m must be >= 1");
  long double s = 0;
  for (double a : sizes) s += static_cast<long double>(a) * std::min(a, m);
  return static_cast<double>(s);
}

inline MomentEstimate truncated_m2(const std::vector<std::vector<double>>& partitions, double m) {
  Accumulator a;
  for (const auto& p : partitions) a.add(truncated_norm2(p, m));
  return a.estimate();
}

/// Per-replica power sums ||X||_p^p for p = 2..5.
struct NormSample {
  double m2 = 0, m3 = 0, m4 = 0, m5 = 0;
};

struct ErrorTerms {
  BootstrapCI E2, E3, H;
};

namespace detail {

struct Sums {
  long double m2 = 0, m3 = 0, m4 = 0, m5 = 0, m2sq = 0, m2m3 = 0;
  std::size_t n = 0;
};

inline Sums sums_of(const std::vector<NormSample>& s, const std::vector<std::size_t>& idx) {
  Sums r;
  for (std::size_t i : idx) {
    const auto& x = s[i];
    r.m2 += x.m2;
    r.m3 += x.m3;
    r.m4 += x.m4;
    r.m5 += x.m5;
    r.m2sq += static_cast<long double>(x.m2) * x.m2;
    r.m2m3 += static_cast<long double>(x.m2) * x.m3;
  }
  r.n = idx.size();
  const long double N = r.n;
  r.m2 /= N;
  r.m3 /= N;
  r.m4 /= N;
  r.m5 /= N;
  r.m2sq /= N;
  r.m2m3 /= N;
  return r;
}

}  // namespace detail

/// E2 = (E||X||_4^4 - Var ||X||_2^2)/(E||X||_2^2)^2,
/// E3 = (E||X||_5^5 + E||X||_2^2 E||X||_3^3 - E[||X||_2^2 ||X||_3^3])/(E||X||_2^2 E||X||_3^3),
/// H = (L^a/(L^a - 1) - t/t_n) t_n E||X||_2^2 - 1, with t_n from prm.beta.
inline ErrorTerms error_terms(const std::vector<NormSample>& s, int n, double t, const ModelParams& prm) {
  if (s.size() < 50) throw std::invalid_argument("error_terms: need >= 50 replicas");
  const double tn = scale_time(prm, n);
  const double La = std::pow(static_cast<double>(prm.L), prm.alpha);
  const double coef = (La / (La - 1.0) - (tn > 0 ? t / tn : 0.0)) * tn;
  ErrorTerms r;
  r.E2 = bootstrap(s.size(), [&](const std::vector<std::size_t>& idx) {
    const auto m = detail::sums_of(s, idx);
    const long double var = m.m2sq - m.m2 * m.m2;
    return static_cast<double>((m.m4 - var) / (m.m2 * m.m2));
  });
  r.E3 = bootstrap(s.size(), [&](const std::vector<std::size_t>& idx) {
    const auto m = detail::sums_of(s, idx);
    return static_cast<double>((m.m5 + m.m2 * m.m3 - m.m2m3) / (m.m2 * m.m3));
  });
  r.H = bootstrap(s.size(), [&](const std::vector<std::size_t>& idx) {
    const auto m = detail::sums_of(s, idx);
    return static_cast<double>(coef * m.m2 - 1.0L);
  });
  return r;
}

struct VarCovRatios {
  BootstrapCI var_over_m4;
  BootstrapCI cov_over_m5;
};

/// (Var ||X||_2^2 / E||X||_4^4, Cov(||X||_2^2, ||X||_3^3) / E||X||_5^5).
inline VarCovRatios var_cov_ratios(const std::vector<NormSample>& s, std::size_t min_replicas = 1000) {
  if (s.size() < min_replicas) throw std::invalid_argument("var_cov_ratios: too few replicas");
  VarCovRatios r;
  const auto all = detail::sums_of(s, [&] {
    std::vector<std::size_t> i(s.size());
    std::iota(i.begin(), i.end(), 0);
    return i;
  }());
  if (!(all.m2sq - all.m2 * all.m2 > 0)) throw std::domain_error("var_cov_ratios: degenerate variance");
  r.var_over_m4 = bootstrap(s.size(), [&](const std::vector<std::size_t>& idx) {
    const auto m = detail::sums_of(s, idx);
    return static_cast<double>((m.m2sq - m.m2 * m.m2) / m.m4);
  });
  r.cov_over_m5 = bootstrap(s.size(), [&](const std::vector<std::size_t>& idx) {
    const auto m = detail::sums_of(s, idx);
    return static_cast<double>((m.m2m3 - m.m2 * m.m3) / m.m5);
  });
  return r;
}

/// E[1 - exp(-h |K|)] over tagged-cluster sizes.
inline MomentEstimate ghost_transform(const std::vector<double>& sizes, double h) {
  if (!(h >= 0.0)) throw std::invalid_argument("ghost_transform: h must be >= 0");
  Accumulator a;
  for (double k : sizes) a.add(-std::expm1(-h * k));
  return a.estimate();
}

/// Empirical P(||X||_2 / E||X||_2 >= a) for each threshold a.
inline std::vector<double> norm_survival(const std::vector<double>& norms2, const std::vector<double>& thresholds) {
  if (norms2.empty()) throw std::invalid_argument("norm_survival: empty input");
  long double mean = 0;
  for (double x : norms2) mean += std::sqrt(x);
  mean /= norms2.size();
  std::vector<double> out;
  for (double a : thresholds) {
    std::size_t c = 0;
    for (double x : norms2)
      if (std::sqrt(x) >= a * mean) ++c;
    out.push_back(static_cast<double>(c) / static_cast<double>(norms2.size()));
  }
  return out;
}

}  // namespace hierperc
