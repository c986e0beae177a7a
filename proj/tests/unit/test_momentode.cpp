// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "hierperc/momentode.hpp"
#include "hierperc/oracle.hpp"

using namespace hierperc;

TEST(MomentOde, DoubleFactorialValues) {
  EXPECT_EQ(double_factorial(-1), 1);
  EXPECT_EQ(double_factorial(0), 1);
  EXPECT_EQ(double_factorial(1), 1);
  EXPECT_EQ(double_factorial(5), 15);
  EXPECT_EQ(double_factorial(9), 945);
  EXPECT_EQ(double_factorial(37).str(), "8200794532637891559375");
  EXPECT_THROW(double_factorial(-3), std::invalid_argument);
}

TEST(MomentOde, BinomialSumIdentityExact) {
  for (int n = 2; n <= 40; ++n) EXPECT_EQ(lemma413_lhs(n), lemma413_rhs(n)) << "n=" << n;
}

TEST(MomentOde, GeneratingFunctionConverges) {
  for (double x : {0.1, 0.25, 0.4}) {
    EXPECT_NEAR(double_factorial_gf(x, 200), 1.0 - std::sqrt(1.0 - 2.0 * x), 1e-12);
  }
}

TEST(MomentOde, IntegralIdentityMatchesQuadrature) {
  for (double a : {0.2, 0.5, 0.9})
    for (double f : {0.0, 0.3, 0.99, 1.0}) {
      ModelParams p{1, 2, a, 1.3};
      const double t = f * scale_time(p, 5);
      EXPECT_NEAR(integral_identity(p, 5, t), integral_identity_quadrature(p, 5, t), 1e-10);
    }
  ModelParams p{1, 2, 0.5, 1.0};
  EXPECT_THROW(integral_identity(p, 3, 1.0), std::out_of_range);
}

TEST(MomentOde, HydroAtTimeZero) {
  ModelParams p{1, 2, 0.5, 1.0};
  const double La = std::sqrt(2.0);
  EXPECT_NEAR(hydro2(p, 0.8, 4, 0.0), std::pow(p.scale_factor(), 4) * (La - 1) / (0.8 * La), 1e-9);
  EXPECT_THROW(hydro2(p, 0.0, 4, 0.0), std::invalid_argument);
  EXPECT_DOUBLE_EQ(hydro_p(3, 2.0, 5.0), 5.0);
  EXPECT_DOUBLE_EQ(hydro_p(4, 2.0, 5.0), 3.0 * 25.0 / 2.0);
  EXPECT_THROW(hydro_p(2, 1.0, 1.0), std::invalid_argument);
}

TEST(MomentOde, CriticalConstantSelfCheck) {
  ModelParams p{1, 2, 1.0 / 3.0, 1.0};
  EXPECT_GT(thm14_A(p, 0.5), 0.0);
  EXPECT_LT(thm14_A_selfcheck(p, 0.5), 1e-12);
  EXPECT_THROW(thm14_A(ModelParams{1, 2, 0.5, 1.0}, 0.5), std::domain_error);
}

TEST(MomentOde, PredictionRegimeGuard) {
  ModelParams p{1, 2, 0.5, 1.0};
  EXPECT_THROW(kn_prediction(p, 0.8, Regime::high, 2, 5, 1.0), std::invalid_argument);
  EXPECT_GT(kn_prediction(p, 0.8, Regime::low, 2, 5, 1.0), 0.0);
  EXPECT_NEAR(tail_exponent(p), -(1 - 0.5) / 1.5, 1e-15);
  EXPECT_EQ(tail_exponent(ModelParams{1, 2, 0.2, 1.0}), -0.5);
}

TEST(MomentOde, SequenceRecursionApproachesScaling) {
  const double A = 0.7, g = 2.0;
  auto zero = [](int) { return 0.0; };
  const double r1 = seq_recursion_ratio(seq_recursion(0.5, A, g, zero, 1000), A, g);
  const double r2 = seq_recursion_ratio(seq_recursion(0.5, A, g, zero, 100000), A, g);
  EXPECT_LT(std::abs(r2 - 1.0), std::abs(r1 - 1.0));
  EXPECT_NEAR(r2, 1.0, 1e-3);
  EXPECT_THROW(seq_recursion(-1.0, A, g, zero, 10), std::invalid_argument);
}

// The moment derivative formula against a central difference of the exact
// partition law.
TEST(MomentOdeProperty, DerivativeFormulaMatchesExactLaw) {
  PartitionLattice lat(5);
  const Rgs init = PartitionLattice::from_block_sizes({1, 1, 2, 1});
  for (double t : {0.05, 0.2, 0.6}) {
    const double h = 1e-4;
    const auto law = exact_coalescent_law(lat, init, t);
    const auto lp = exact_coalescent_law(lat, init, t + h);
    const auto lm = exact_coalescent_law(lat, init, t - h);
    for (int p = 2; p <= 4; ++p) {
      MomentVector mv;
      mv.marginal[p + 2] = exact_moments(lat, law, p + 2);
      for (int k = 1; k <= p - 1; ++k) mv.set_cross(k + 1, p - k + 1, exact_cross_moment(lat, law, k + 1, p - k + 1));
      const double fd = (exact_moments(lat, lp, p) - exact_moments(lat, lm, p)) / (2 * h);
      EXPECT_NEAR(lemma21_rhs(mv, p), fd, 1e-5 * std::max(1.0, std::abs(fd))) << "t=" << t << " p=" << p;
    }
  }
}
