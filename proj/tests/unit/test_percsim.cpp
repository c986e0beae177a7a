// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hierperc/percsim.hpp"
#include "hierperc/stats.hpp"

using namespace hierperc;

namespace {

long double power_sum_of(const std::vector<std::uint64_t>& sizes, int p) {
  long double s = 0;
  for (auto c : sizes) s += std::pow(static_cast<long double>(c), p);
  return s;
}

}  // namespace

TEST(Percsim, ZeroBetaGivesSingletons) {
  ModelParams p{1, 2, 0.5, 0.0};
  auto f = sample_eta_forest(p, 8, 1);
  const auto s = f.cluster_sizes();
  EXPECT_EQ(s.size(), 256u);
  EXPECT_TRUE(std::all_of(s.begin(), s.end(), [](auto c) { return c == 1; }));
  auto z = sample_sizes(p, 8, 1);
  EXPECT_EQ(z.count(), 256u);
}

TEST(Percsim, RejectsBadInput) {
  EXPECT_THROW(sample_eta_forest(ModelParams{1, 2, 0.5, -1.0}, 4, 1), std::invalid_argument);
  EXPECT_THROW(sample_eta_forest(ModelParams{1, 2, 0.5, NAN}, 4, 1), std::invalid_argument);
  SamplerOptions opt;
  opt.vertex_cap = 1000;
  EXPECT_THROW(ForestSampler(ModelParams{1, 2, 0.5, 1.0}, 10, opt), std::out_of_range);
  EXPECT_THROW(sample_sizes(ModelParams{1, 2, 0.5, 1.0}, 63, 1), std::out_of_range);
}

TEST(Percsim, Deterministic) {
  ModelParams p{1, 2, 0.5, 0.8};
  auto a = forest_sizes(sample_eta_forest(p, 10, 99));
  auto b = forest_sizes(sample_eta_forest(p, 10, 99));
  EXPECT_EQ(a.sorted_desc(), b.sorted_desc());
  auto c = sample_sizes(p, 10, 99, 3);
  auto d = sample_sizes(p, 10, 99, 3);
  EXPECT_EQ(c.sorted_desc(), d.sorted_desc());
}

TEST(Percsim, SinglePairConnectionProbability) {
  // n = 1, L = 2, d = 1: one pair with Poisson(t_1) edges.
  ModelParams p{1, 2, 0.5, 1.5};
  const double expect = -std::expm1(-scale_time(p, 1));
  const int reps = 40000;
  int hit = 0;
  for (int r = 0; r < reps; ++r) hit += sample_eta_forest(p, 1, 5, {}, r).connected(0, 1);
  const double se = std::sqrt(expect * (1 - expect) / reps);
  EXPECT_NEAR(static_cast<double>(hit) / reps, expect, 5 * se);
}

TEST(PercsimProperty, SizesPartitionVolumeAndPowerSumsTrack) {
  ModelParams p{2, 2, 0.6, 1.2};
  SamplerOptions opt;
  opt.exponents = {2.0, 3.0, 2.5};
  opt.fractions = {0.0, 0.5, 1.0};
  ForestSampler s(p, 5, opt);
  ClusterForest f;
  int checked = 0;
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    s.run(17, rep, f, [&](const LevelSnapshot& snap) {
      for (std::uint64_t blk = 0; blk < snap.blocks; ++blk) {
        auto sizes = snap.forest->cluster_sizes_in(blk * snap.block_volume, (blk + 1) * snap.block_volume);
        EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), std::uint64_t{0}), snap.block_volume);
        const long double p2 = power_sum_of(sizes, 2), p3 = power_sum_of(sizes, 3);
        EXPECT_NEAR(static_cast<double>(snap.power_sum(0, blk)), static_cast<double>(p2), 1e-9 * static_cast<double>(p2));
        EXPECT_NEAR(static_cast<double>(snap.power_sum(1, blk)), static_cast<double>(p3), 1e-9 * static_cast<double>(p3));
        long double p25 = 0;
        for (auto c : sizes) p25 += std::pow(static_cast<long double>(c), 2.5L);
        EXPECT_NEAR(static_cast<double>(snap.power_sum(2, blk)), static_cast<double>(p25), 1e-9 * static_cast<double>(p25));
        EXPECT_EQ(snap.max_cluster(blk), *std::max_element(sizes.begin(), sizes.end()));
        ++checked;
      }
    });
  }
  EXPECT_GT(checked, 0);
}

TEST(PercsimProperty, CouplingIsMonotoneInBeta) {
  ModelParams lo{1, 2, 0.5, 0.5}, hi{1, 2, 0.5, 1.0};
  SamplerOptions opt;
  opt.coupling_beta = 2.0;
  ForestSampler a(lo, 9, opt), b(hi, 9, opt);
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    ClusterForest fa, fb;
    a.run(3, rep, fa);
    b.run(3, rep, fb);
    for (std::uint64_t v = 0; v < fa.vertex_count(); ++v)
      EXPECT_TRUE(fb.connected(v, fa.find(v)));  // every lo-cluster sits inside a hi-cluster
    EXPECT_LE(fb.cluster_sizes().size(), fa.cluster_sizes().size());
  }
}

TEST(PercsimProperty, PeriodicDominatesFree) {
  ModelParams p{1, 2, 0.5, 0.9};
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    auto free = sample_sizes(p, 8, 21, rep);
    auto per = sample_eta_periodic(p, 8, 21, rep);
    EXPECT_GE(per.power_sum(2), free.power_sum(2));
    EXPECT_LE(per.count(), free.count());
    EXPECT_EQ(per.total(), free.total());
  }
}

TEST(PercsimProperty, ForestAndRecursiveAgreeInMean) {
  ModelParams p{1, 2, 0.5, 0.8};
  const int n = 8, reps = 3000;
  double fa = 0, fb = 0, sa = 0, sb = 0;
  for (int r = 0; r < reps; ++r) {
    const double a = forest_sizes(sample_eta_forest(p, n, 1, {}, r)).power_sum(2);
    const double b = sample_sizes(p, n, 2, r).power_sum(2);
    fa += a;
    fb += b;
    sa += a * a;
    sb += b * b;
  }
  fa /= reps;
  fb /= reps;
  const double se = std::sqrt((sa / reps - fa * fa) / reps + (sb / reps - fb * fb) / reps);
  EXPECT_LT(std::abs(fa - fb), 5 * se);
}

TEST(Percsim, ConnectionProfileBounds) {
  ModelParams p{1, 2, 0.5, 1.0};
  auto f = sample_eta_forest(p, 10, 4);
  auto prof = connection_profile(f, p, 10);
  ASSERT_EQ(prof.size(), 11u);
  for (double x : prof) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
  ClusterForest all(4);
  all.unite(0, 1);
  all.unite(2, 3);
  all.unite(1, 2);
  auto full = connection_profile(all, p, 2);
  EXPECT_EQ(full[1], 1.0);
  EXPECT_EQ(full[2], 1.0);
  ClusterForest pairs(4);
  pairs.unite(0, 1);
  pairs.unite(2, 3);
  auto pp = connection_profile(pairs, p, 2);
  EXPECT_EQ(pp[1], 1.0);
  EXPECT_EQ(pp[2], 0.0);
}

TEST(Percsim, OriginMomentTwoVertexClosedForm) {
  ModelParams p{1, 2, 0.5, 1.7};
  const double expect = 1.0 + -std::expm1(-p.beta * std::pow(2.0, -(1 + p.alpha)));
  std::vector<double> norms, origin;
  for (int r = 0; r < 20000; ++r) {
    auto f = sample_eta_forest(p, 1, 31, {VertexId{0}}, r);
    norms.push_back(forest_sizes(f).power_sum(2));
    origin.push_back(static_cast<double>(f.cluster_size(0)));
  }
  const auto a = kn_moments_from_norms(norms, 1, p);
  const auto b = kn_moments_tagged(origin, 1.0);
  EXPECT_NEAR(a.mean, expect, 4 * a.se);
  EXPECT_NEAR(b.mean, expect, 4 * b.se);
  EXPECT_NEAR(a.mean, b.mean, 4 * std::hypot(a.se, b.se));
}

TEST(Percsim, OriginMomentsAtZeroCouplingAreOne) {
  ModelParams p{1, 2, 0.5, 0.0};
  std::vector<double> norms;
  for (int r = 0; r < 5; ++r) norms.push_back(sample_sizes(p, 6, 1, r).power_sum(3));
  EXPECT_EQ(kn_moments_from_norms(norms, 6, p).mean, 1.0);
}

TEST(PercsimProperty, NormAndTaggedEstimatorsAgree) {
  ModelParams p{1, 2, 0.5, 0.8};
  std::vector<double> n3, k2;
  for (int r = 0; r < 4000; ++r) {
    auto f = sample_eta_forest(p, 8, 41, {}, r);
    n3.push_back(forest_sizes(f).power_sum(3));
    k2.push_back(static_cast<double>(f.cluster_size(0)));
  }
  const auto a = kn_moments_from_norms(n3, 8, p);
  const auto b = kn_moments_tagged(k2, 2.0);
  EXPECT_NEAR(a.mean, b.mean, 4 * std::hypot(a.se, b.se));
}
