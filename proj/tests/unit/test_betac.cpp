// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hierperc/betac.hpp"

using namespace hierperc;

TEST(Betac, FlowSlopeAtZeroCouplingIsExact) {
  // No edges: E||X_m||_2^2 = L^{dm}, so log_L g_m = -alpha m.
  ModelParams p{1, 2, 0.5, 0.0};
  const auto fe = flow_slope(p, 8, 4, 4, 1);
  EXPECT_NEAR(fe.slope, -0.5, 1e-12);
  EXPECT_NEAR(fe.se, 0.0, 1e-12);
  ASSERT_EQ(fe.log_g.size(), 4u);
  EXPECT_NEAR(fe.log_g.front(), -0.5 * 5, 1e-12);
}

TEST(Betac, FlowSlopeInputGuards) {
  ModelParams p{1, 2, 0.5, 0.5};
  EXPECT_THROW(flow_slope(p, 8, 2, 4, 1), std::invalid_argument);
  EXPECT_THROW(flow_slope(p, 2, 4, 4, 1), std::out_of_range);
  EXPECT_THROW(flow_slope(p, 12, 4, 4, 1, 1000), std::out_of_range);
}

TEST(Betac, ClassifiesClearCases) {
  ModelParams p{1, 2, 0.5, 0.0};
  BetacOptions opt;
  opt.n_start = 10;
  opt.n_max = 12;
  double work = 1e9;
  EXPECT_EQ(classify_beta(p, 0.2, opt, 5, work).verdict, -1);
  EXPECT_EQ(classify_beta(p, 3.0, opt, 5, work).verdict, 1);
}

TEST(Betac, RejectsNoCriticalPoint) {
  EXPECT_THROW(bisect_betac(ModelParams{1, 2, 1.5, 0.0}, BetacOptions{}, 1), std::domain_error);
  EXPECT_THROW(bisect_betac(ModelParams{1, 2, 0.0, 0.0}, BetacOptions{}, 1), std::domain_error);
}

TEST(Betac, KnownNarrowBracketReturnsImmediately) {
  BetacOptions opt;
  opt.lower = 1.0;
  opt.upper = 1.01;
  const auto br = bisect_betac(ModelParams{1, 2, 0.5, 0.0}, opt, 1);
  EXPECT_TRUE(br.converged);
  EXPECT_TRUE(br.probes.empty());
}

TEST(Betac, CoarseBisectionIsMonotone) {
  BetacOptions opt;
  opt.tolerance = 0.2;
  opt.n_start = 10;
  opt.n_max = 12;
  opt.reps_max = 64;
  opt.work_budget = 2e8;
  const auto br = bisect_betac(ModelParams{1, 2, 0.5, 0.0}, opt, 7);
  EXPECT_TRUE(br.monotone());
  EXPECT_LT(br.lower, br.upper);
  EXPECT_LE(br.work_used, opt.work_budget);
  if (br.converged) {
    EXPECT_LE(br.rel_width(), 0.2);
    EXPECT_GT(br.upper, 0.6);
    EXPECT_LT(br.lower, 1.0);
  }
}

TEST(Betac, LowerBoundAuditSeparatesSides) {
  // Above the critical point the bound holds; well below it is violated.
  const auto above = lower_bound_audit(ModelParams{1, 2, 0.5, 1.5}, 8, 200, 3);
  ASSERT_EQ(above.size(), 8u * 3u);
  for (const auto& r : above) EXPECT_TRUE(r.ok) << "n=" << r.n << " f=" << r.t_fraction;
  const auto below = lower_bound_audit(ModelParams{1, 2, 0.5, 0.4}, 8, 200, 3);
  EXPECT_TRUE(std::any_of(below.begin(), below.end(), [](const auto& r) { return !r.ok; }));
}
