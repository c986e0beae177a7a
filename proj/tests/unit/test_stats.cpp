// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hierperc/rng.hpp"
#include "hierperc/stats.hpp"

using namespace hierperc;

TEST(Stats, AccumulatorMatchesTwoPass) {
  std::vector<double> xs;
  Philox r(1, 0);
  for (int i = 0; i < 1000; ++i) xs.push_back(1e6 + r.uniform());
  const auto e = estimate_of(xs);
  long double m = 0;
  for (double x : xs) m += x;
  m /= xs.size();
  long double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= xs.size() - 1;
  EXPECT_NEAR(e.mean, static_cast<double>(m), 1e-9);
  EXPECT_NEAR(e.se, std::sqrt(static_cast<double>(v) / xs.size()), 1e-12);
}

TEST(Stats, MergeEqualsPooled) {
  Accumulator a, b, all;
  for (int i = 0; i < 37; ++i) {
    a.add(i * 0.5);
    all.add(i * 0.5);
  }
  for (int i = 0; i < 51; ++i) {
    b.add(10 - i * 0.25);
    all.add(10 - i * 0.25);
  }
  const auto m = a.estimate().merge(b.estimate());
  EXPECT_NEAR(m.mean, all.estimate().mean, 1e-12);
  EXPECT_NEAR(m.se, all.estimate().se, 1e-12);
  a.merge(b);
  EXPECT_NEAR(static_cast<double>(a.variance()), static_cast<double>(all.variance()), 1e-12);
}

TEST(Stats, LinearFitExact) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = weighted_fit(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r2, 1.0, 1e-14);
  EXPECT_THROW(weighted_fit({1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(weighted_fit({1.0, 1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Stats, KolmogorovDistribution) {
  EXPECT_NEAR(kolmogorov_q(1.36), 0.0494, 5e-4);
  EXPECT_NEAR(kolmogorov_q(1.63), 0.0098, 5e-4);
  EXPECT_EQ(kolmogorov_q(0.0), 1.0);
}

TEST(Stats, KsSameAndShifted) {
  Philox r(2, 0);
  std::vector<double> a, b, c;
  for (int i = 0; i < 5000; ++i) {
    a.push_back(r.uniform());
    b.push_back(r.uniform());
    c.push_back(r.uniform() + 0.1);
  }
  EXPECT_EQ(ks_two_sample(a, a).statistic, 0.0);
  EXPECT_GT(ks_two_sample(a, b).p_value, 1e-3);
  EXPECT_LT(ks_two_sample(a, c).p_value, 1e-6);
  // Atoms off by rounding are ties only under a tolerance.
  std::vector<double> d(100, 1.0), e(100, 1.0 + 1e-14);
  EXPECT_EQ(ks_two_sample(d, e).statistic, 1.0);
  EXPECT_EQ(ks_two_sample(d, e, 1e-9).statistic, 0.0);
}

TEST(Stats, BootstrapDeterministicAndCovers) {
  std::vector<double> xs;
  Philox r(3, 0);
  for (int i = 0; i < 400; ++i) xs.push_back(r.uniform());
  auto mean = [&](const std::vector<std::size_t>& idx) {
    double s = 0;
    for (auto i : idx) s += xs[i];
    return s / idx.size();
  };
  const auto a = bootstrap(xs.size(), mean), b = bootstrap(xs.size(), mean);
  EXPECT_EQ(a.lo, b.lo);
  EXPECT_EQ(a.hi, b.hi);
  EXPECT_LE(a.lo, a.estimate);
  EXPECT_GE(a.hi, a.estimate);
  EXPECT_NEAR(a.se, std::sqrt(1.0 / 12 / 400), 0.005);
}

TEST(Stats, TypicalMaximum) {
  std::vector<std::uint64_t> m;
  for (std::uint64_t i = 1; i <= 100; ++i) m.push_back(i);
  EXPECT_EQ(estimate_Mn(m), 65u);
  EXPECT_THROW(estimate_Mn({1, 2, 3}), std::invalid_argument);
}

TEST(Stats, TailSlopeOnPareto) {
  Philox r(4, 0);
  std::vector<double> s;
  for (int i = 0; i < 200000; ++i) s.push_back(std::floor(std::pow(r.uniform_pos(), -2.0)));
  std::vector<double> grid;
  for (double k = 1; k < 1e6; k *= 1.5) grid.push_back(k);
  const auto tc = tail_curve(s, grid);
  EXPECT_NEAR(tc.fit.slope, -0.5, 0.03);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_LE(tc.lo[i], tc.survival[i]);
    EXPECT_GE(tc.hi[i], tc.survival[i]);
  }
}

TEST(Stats, TailFromPartitionsIsSizeBiased) {
  // Volume 40: {30, 10} and {20, 20}.
  std::vector<std::vector<double>> parts{{30, 10}, {20, 20}};
  const auto tc = tail_curve_from_partitions(parts, 40.0, {1, 5, 10, 20, 30, 40});
  EXPECT_EQ(tc.survival[0], 1.0);
  EXPECT_EQ(tc.survival[2], 1.0);
  EXPECT_EQ(tc.survival[3], (0.75 + 1.0) / 2);
  EXPECT_EQ(tc.survival[4], 0.75 / 2);
  EXPECT_EQ(tc.survival[5], 0.0);
  EXPECT_EQ(tc.window_hi, 30.0);
}

TEST(Stats, SizeBiasedMoments) {
  EXPECT_NEAR(size_biased_moments(std::vector<double>(10, 7.0), 3), 1.0, 1e-12);
  // norms: E|K|^q = L^{-dn} E||X||_{q+1}^{q+1}
  EXPECT_NEAR(size_biased_moments_from_norms(4.0, 2.0, 2.0, 2), 4.0 * 2.0 / 4.0, 1e-15);
}

TEST(Stats, TruncatedNorm) {
  EXPECT_EQ(truncated_norm2({5, 2, 1}, 3), 5 * 3 + 4 + 1);
  EXPECT_EQ(truncated_norm2({5, 2, 1}, 100), 30);
  EXPECT_THROW(truncated_norm2({1}, 0.5), std::invalid_argument);
}

TEST(Stats, ErrorTermsOnDeterministicInput) {
  ModelParams p{1, 2, 0.5, 1.0};
  const int n = 3;
  const double tn = scale_time(p, n);
  const double La = std::sqrt(2.0);
  // A constant sample has zero variance and covariance.
  std::vector<NormSample> s(60, NormSample{2.0, 3.0, 5.0, 7.0});
  const auto e = error_terms(s, n, tn, p);
  EXPECT_NEAR(e.E2.estimate, 5.0 / 4.0, 1e-12);
  EXPECT_NEAR(e.E3.estimate, 7.0 / 6.0, 1e-12);
  EXPECT_NEAR(e.H.estimate, (La / (La - 1) - 1) * tn * 2.0 - 1.0, 1e-12);
  EXPECT_THROW(error_terms(std::vector<NormSample>(10), n, tn, p), std::invalid_argument);
}

TEST(Stats, GhostAndSurvival) {
  const auto g = ghost_transform({1, 1, 1}, std::log(2.0));
  EXPECT_NEAR(g.mean, 0.5, 1e-15);
  const auto sv = norm_survival({1, 4, 9}, {0.0, 1.0, 1.5});
  EXPECT_EQ(sv[0], 1.0);
  EXPECT_NEAR(sv[1], 2.0 / 3, 1e-15);
  EXPECT_NEAR(sv[2], 1.0 / 3, 1e-15);
}

TEST(Stats, NormalizationScaling) {
  ModelParams p{1, 2, 0.5, 1.0};
  const auto e = lp_normalized({16.0, 16.0}, 2.0, 2, p);
  EXPECT_NEAR(e.mean, 16.0 * std::pow(2.0, -3.0), 1e-12);
  const auto k = kn_moments_from_norms({8.0, 8.0}, 2, p);
  EXPECT_NEAR(k.mean, 2.0, 1e-15);
}

TEST(Stats, TypicalMaximumDefinitionCases) {
  EXPECT_EQ(estimate_Mn(std::vector<std::uint64_t>(200, 5)), 6u);
  // Scale 0: every maximum is 1.
  EXPECT_EQ(estimate_Mn(std::vector<std::uint64_t>(100, 1)), 2u);
}

TEST(Stats, DegenerateTailIsRejected) {
  EXPECT_THROW(tail_curve(std::vector<double>(1000, 5.0), {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), std::invalid_argument);
  EXPECT_THROW(tail_curve({1.0, 2.0}, {3.0, 1.0}), std::invalid_argument);
}

TEST(Stats, SizeBiasedChiSquaredSynthetic) {
  // Law of |K| = chi^2(1) reweighted by 1/z, so its size-biased law is chi^2(1).
  std::mt19937_64 gen(12345);
  std::chi_squared_distribution<double> chi(1.0);
  std::vector<double> z(1000000), w(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = chi(gen);
    w[i] = 1.0 / z[i];
  }
  const double target[] = {1.0, 3.0, 15.0};
  for (int p = 1; p <= 3; ++p)
    EXPECT_NEAR(size_biased_moments_weighted(z, w, p), target[p - 1], 0.02 * target[p - 1]) << "p=" << p;
}

TEST(Stats, TruncatedNormDefinition) {
  EXPECT_EQ(truncated_norm2({3, 2}, 2), 10.0);
  const std::vector<std::vector<double>> parts{{4, 2, 1, 1}, {8}};
  EXPECT_EQ(truncated_m2(parts, 1).mean, 8.0);
  EXPECT_EQ(truncated_m2(parts, 1).se, 0.0);
}

TEST(Stats, LpNormalizedAtZeroCoupling) {
  ModelParams p{1, 2, 0.6, 0.0};
  for (int n : {2, 5, 9}) {
    const double vol = static_cast<double>(block_volume(p, n));
    const double crit = 2.0 * p.d / (p.d + p.alpha);
    const auto e = lp_normalized({vol, vol}, crit, n, p);
    EXPECT_NEAR(e.mean, 1.0, 1e-12);
    const auto f = lp_normalized({vol, vol}, 2.0, n, p);
    EXPECT_NEAR(f.mean, std::pow(2.0, -p.alpha * n), 1e-12);
  }
}

TEST(Stats, GhostLimits) {
  EXPECT_EQ(ghost_transform({3, 7, 100}, 0.0).mean, 0.0);
  EXPECT_NEAR(ghost_transform({3, 7, 100}, 1e3).mean, 1.0, 1e-12);
  EXPECT_THROW(ghost_transform({1}, -1.0), std::invalid_argument);
}

TEST(Stats, VarCovGuards) {
  EXPECT_THROW(var_cov_ratios(std::vector<NormSample>(999)), std::invalid_argument);
  EXPECT_THROW(var_cov_ratios(std::vector<NormSample>(1000, NormSample{1, 1, 1, 1})), std::domain_error);
}

TEST(StatsProperty, MergeIsAssociativeAndCommutative) {
  Philox r(6, 0);
  Accumulator parts[3];
  for (auto& a : parts)
    for (int i = 0; i < 100; ++i) a.add(r.uniform());
  const auto e0 = parts[0].estimate(), e1 = parts[1].estimate(), e2 = parts[2].estimate();
  const auto x = e0.merge(e1).merge(e2), y = e2.merge(e0.merge(e1)), z = e1.merge(e2).merge(e0);
  EXPECT_NEAR(x.mean, y.mean, 1e-15);
  EXPECT_NEAR(x.mean, z.mean, 1e-15);
  EXPECT_NEAR(x.se, y.se, 1e-15);
  EXPECT_NEAR(x.se, z.se, 1e-15);
  EXPECT_EQ(x.replicas, 300u);
}
