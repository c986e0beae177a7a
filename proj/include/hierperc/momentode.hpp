// SPDX-License-Identifier: Apache-2.0
//
// Deterministic moment machinery: the multiplicative-coalescent moment
// equation, hydrodynamic closed forms, asymptotic predictions, exact
// double factorials and a few analytic identities.

#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hierperc/lattice.hpp"

namespace hierperc {

using BigInt = boost::multiprecision::cpp_int;

/// Estimates of E||X_{n,t}||_p^p and of cross moments E[||X||_a^a ||X||_b^b].
struct MomentVector {
  int n = 0;
  double t = 0.0;
  std::map<int, double> marginal;
  std::map<std::pair<int, int>, double> cross;

  void set_cross(int a, int b, double v) { cross[{std::min(a, b), std::max(a, b)}] = v; }

  [[nodiscard]] double get_cross(int a, int b) const {
    auto it = cross.find({std::min(a, b), std::max(a, b)});
    if (it == cross.end()) throw std::out_of_range("MomentVector: missing cross moment");
    return it->second;
  }
  [[nodiscard]] double get(int p) const {
    auto it = marginal.find(p);
    if (it == marginal.end()) throw std::out_of_range("MomentVector: missing marginal moment");
    return it->second;
  }
};

inline BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// d/dt E||X_t||_p^p for the multiplicative coalescent:
/// (1/2) sum_{k=1}^{p-1} C(p,k) E[||X||_{k+1}^{k+1} ||X||_{p-k+1}^{p-k+1}] - (2^{p-1} - 1) E||X||_{p+2}^{p+2}.
inline double lemma21_rhs(const MomentVector& m, int p) {
  if (p < 2) throw std::invalid_argument("lemma21_rhs: p must be >= 2");
  long double s = 0.0L;
  for (int k = 1; k <= p - 1; ++k)
    s += binomial(p, k).convert_to<long double>() * m.get_cross(k + 1, p - k + 1);
  return static_cast<double>(0.5L * s - (std::ldexp(1.0L, p - 1) - 1.0L) * m.get(p + 2));
}

/// (1/beta_c) (L^a/(L^a - 1) - t/t_n)^{-1} L^{(d+a) n}.
inline double hydro2(const ModelParams& prm, double beta_c, int n, double t) {
  if (!(beta_c > 0.0)) throw std::invalid_argument("hydro2: beta_c must be > 0");
  const double tn = scale_time(prm.with_beta(beta_c), n);
  if (!(t >= 0.0) || t > tn * (1.0 + 1e-12)) throw std::out_of_range("hydro2: t outside [0, t_n]");
  const double La = std::pow(static_cast<double>(prm.L), prm.alpha);
  return std::pow(prm.scale_factor(), n) / (beta_c * (La / (La - 1.0) - t / tn));
}

inline BigInt double_factorial(int k) {
  if (k < -1) throw std::invalid_argument("double_factorial: k must be >= -1");
  BigInt r = 1;
  for (int i = k; i > 1; i -= 2) r *= i;
  return r;
}

inline double double_factorial_d(int k) { return double_factorial(k).convert_to<double>(); }

/// (2p-5)!! m3^{p-2} / m2^{p-3}.
inline double hydro_p(int p, double m2, double m3) {
  if (p < 3) throw std::invalid_argument("hydro_p: p must be >= 3");
  if (!(m2 > 0.0) || !(m3 > 0.0)) throw std::invalid_argument("hydro_p: moments must be > 0");
  return double_factorial_d(2 * p - 5) * std::pow(m3, p - 2) / std::pow(m2, p - 3);
}

/// sqrt((L^a - 1)/(beta_c (5 L^{4a} - 2 L^a - 3))), valid at d = 3 alpha. The
/// equivalent form (L^a-1)^{3/2} beta_c^{-3/2} (5L^{6a} - 2L^{3a} - 3L^{2a})^{-1/2}
/// = A (L^a - 1)/(L^a beta_c) is checked to 1e-12 before returning.
inline double thm14_A(const ModelParams& prm, double beta_c) {
  if (std::abs(prm.d - 3.0 * prm.alpha) > 1e-12) throw std::domain_error("thm14_A: requires d = 3 alpha");
  if (!(beta_c > 0.0)) throw std::invalid_argument("thm14_A: beta_c must be > 0");
  const double La = std::pow(static_cast<double>(prm.L), prm.alpha);
  const double A = std::sqrt((La - 1.0) / (beta_c * (5.0 * std::pow(La, 4) - 2.0 * La - 3.0)));
  const double lhs = std::pow(La - 1.0, 1.5) * std::pow(beta_c, -1.5) /
                     std::sqrt(5.0 * std::pow(La, 6) - 2.0 * std::pow(La, 3) - 3.0 * std::pow(La, 2));
  const double rhs = A * (La - 1.0) / (La * beta_c);
  if (std::abs(lhs - rhs) > 1e-12 * std::max(1.0, std::abs(rhs)))
    throw std::logic_error("thm14_A: algebraic self-check failed");
  return A;
}

/// Relative discrepancy of the self-check above (exposed for reporting).
inline double thm14_A_selfcheck(const ModelParams& prm, double beta_c) {
  const double A = thm14_A(prm, beta_c);
  const double La = std::pow(static_cast<double>(prm.L), prm.alpha);
  const double lhs = std::pow(La - 1.0, 1.5) * std::pow(beta_c, -1.5) /
                     std::sqrt(5.0 * std::pow(La, 6) - 2.0 * std::pow(La, 3) - 3.0 * std::pow(La, 2));
  return std::abs(lhs - A * (La - 1.0) / (La * beta_c)) / std::abs(lhs);
}

/// Asymptotic form of E|K_n|^p in each regime. `A` is the high-regime
/// constant; at the critical dimension it is replaced by thm14_A. The low
/// regime returns the growth order only (unit constant).
inline double kn_prediction(const ModelParams& prm, double beta_c, Regime regime, int p, int n, double A) {
  if (regime_of(prm) != regime) throw std::invalid_argument("kn_prediction: regime does not match (d, alpha)");
  if (p < 1) throw std::invalid_argument("kn_prediction: p must be >= 1");
  const double L = prm.L, a = prm.alpha, d = prm.d;
  if (regime == Regime::low) return std::pow(L, (a + (d + a) * (p - 1) / 2.0) * n);
  const double La = std::pow(L, a);
  const double Ause = regime == Regime::critical ? thm14_A(prm, beta_c) : A;
  double v = double_factorial_d(2 * p - 3) * std::pow(Ause, p - 1) * ((La - 1.0) / (La * beta_c)) *
             std::pow(L, (2 * p - 1) * a * n);
  if (regime == Regime::critical) v *= std::pow(static_cast<double>(n), -(p - 1) / 2.0);
  return v;
}

/// Exponent of the power-law tail P(|K| >= k) in each regime (the critical
/// regime carries an additional (log k)^{1/4} factor).
inline double tail_exponent(const ModelParams& prm) {
  switch (regime_of(prm)) {
    case Regime::low: return -(prm.d - prm.alpha) / (prm.d + prm.alpha);
    case Regime::critical:
    case Regime::high: return -0.5;
  }
  return 0.0;
}

/// sum_{k=1}^{n-1} C(n,k) (2k-3)!! (2n-2k-3)!!.
inline BigInt lemma413_lhs(int n) {
  BigInt s = 0;
  for (int k = 1; k <= n - 1; ++k) s += binomial(n, k) * double_factorial(2 * k - 3) * double_factorial(2 * n - 2 * k - 3);
  return s;
}

inline BigInt lemma413_rhs(int n) { return 2 * double_factorial(2 * n - 3); }

/// Partial sum sum_{n=1}^{N} (2n-3)!! x^n / n!, which tends to 1 - sqrt(1 - 2x).
inline double double_factorial_gf(double x, int N) {
  long double s = 0.0L, fact = 1.0L;
  for (int n = 1; n <= N; ++n) {
    fact *= n;
    s += double_factorial(2 * n - 3).convert_to<long double>() * std::pow(static_cast<long double>(x), n) / fact;
  }
  return static_cast<double>(s);
}

/// -log(1 - (t/t_n)(L^a - 1)/L^a).
inline double integral_identity(const ModelParams& prm, int n, double t) {
  const double tn = scale_time(prm, n);
  if (!(t >= 0.0) || t > tn * (1.0 + 1e-12)) throw std::out_of_range("integral_identity: t outside [0, t_n]");
  const double La = std::pow(static_cast<double>(prm.L), prm.alpha);
  return -std::log1p(-(t / tn) * (La - 1.0) / La);
}

/// (1/t_n) int_0^t (L^a/(L^a-1) - s/t_n)^{-1} ds by adaptive Gauss-Kronrod.
inline double integral_identity_quadrature(const ModelParams& prm, int n, double t) {
  const double tn = scale_time(prm, n);
  if (!(t >= 0.0) || t > tn * (1.0 + 1e-12)) throw std::out_of_range("integral_identity: t outside [0, t_n]");
  const double La = std::pow(static_cast<double>(prm.L), prm.alpha);
  const double c = La / (La - 1.0);
  // Substitute u = s/t_n to keep the integrand O(1).
  auto f = [c](double u) { return 1.0 / (c - u); };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, t / tn, 15, 1e-14, &err);
}

/// Iterates a_{k+1} = exp(-(1 + delta_k) A a_k^gamma) a_k for k < N.
inline std::vector<double> seq_recursion(double a0, double A, double gamma, const std::function<double(int)>& delta,
                                         int N) {
  if (!(a0 > 0.0) || !(A > 0.0) || !(gamma > 0.0) || N < 0)
    throw std::invalid_argument("seq_recursion: inputs must be positive");
  std::vector<double> a(static_cast<std::size_t>(N) + 1);
  a[0] = a0;
  for (int k = 0; k < N; ++k) {
    const auto ak = static_cast<long double>(a[static_cast<std::size_t>(k)]);
    a[static_cast<std::size_t>(k) + 1] =
        static_cast<double>(std::exp(-(1.0L + delta(k)) * A * std::pow(ak, static_cast<long double>(gamma))) * ak);
  }
  return a;
}

inline std::vector<double> seq_recursion(double a0, double A, double gamma, const std::vector<double>& deltas, int N) {
  if (deltas.size() < static_cast<std::size_t>(N)) throw std::invalid_argument("seq_recursion: too few deltas");
  return seq_recursion(a0, A, gamma, [&](int k) { return deltas[static_cast<std::size_t>(k)]; }, N);
}

/// a_N (gamma A N)^{1/gamma}, which tends to 1.
inline double seq_recursion_ratio(const std::vector<double>& a, double A, double gamma) {
  const auto N = static_cast<double>(a.size() - 1);
  return a.back() * std::pow(gamma * A * N, 1.0 / gamma);
}

}  // namespace hierperc
