// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace hierperc {

/// Multiset of positive cluster masses. Integer masses are stored exactly
/// (as doubles below 2^53); the total is cached.
class SizeMultiset {
 public:
  SizeMultiset() = default;

  explicit SizeMultiset(std::vector<double> masses) : masses_(std::move(masses)) {
    for (double m : masses_)
      if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("SizeMultiset: masses must be finite and > 0");
    recompute_total();
  }

  static SizeMultiset from_integers(const std::vector<std::uint64_t>& sizes) {
    std::vector<double> m(sizes.begin(), sizes.end());
    return SizeMultiset(std::move(m));
  }

  static SizeMultiset singletons(std::uint64_t k) { return SizeMultiset(std::vector<double>(k, 1.0)); }

  [[nodiscard]] const std::vector<double>& masses() const { return masses_; }
  [[nodiscard]] std::size_t count() const { return masses_.size(); }
  [[nodiscard]] bool empty() const { return masses_.empty(); }
  [[nodiscard]] double total() const { return total_; }

  [[nodiscard]] bool integral() const {
    return std::all_of(masses_.begin(), masses_.end(), [](double m) { return m == std::floor(m); });
  }

  /// sum_i m_i^p; p may be real.
  [[nodiscard]] double power_sum(double p) const {
    long double s = 0.0L;
    const bool ip = p == std::floor(p) && p >= 0 && p <= 16;
    for (double m : masses_) {
      if (ip) {
        long double x = 1.0L;
        for (int k = 0; k < static_cast<int>(p); ++k) x *= m;
        s += x;
      } else {
        s += std::pow(static_cast<long double>(m), static_cast<long double>(p));
      }
    }
    return static_cast<double>(s);
  }

  [[nodiscard]] double max() const {
    return masses_.empty() ? 0.0 : *std::max_element(masses_.begin(), masses_.end());
  }

  /// Masses sorted in decreasing order.
  [[nodiscard]] std::vector<double> sorted_desc() const {
    auto v = masses_;
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
  }

  void sort_desc() { std::sort(masses_.begin(), masses_.end(), std::greater<>()); }

  /// size -> multiplicity view (masses compared exactly).
  [[nodiscard]] std::map<double, std::uint64_t> histogram() const {
    std::map<double, std::uint64_t> h;
    for (double m : masses_) ++h[m];
    return h;
  }

  /// Disjoint union.
  void append(const SizeMultiset& other) {
    masses_.insert(masses_.end(), other.masses_.begin(), other.masses_.end());
    total_ += other.total_;
  }

  /// Multiplies every mass by c > 0.
  void scale(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("SizeMultiset::scale: factor must be > 0");
    for (double& m : masses_) m *= c;
    recompute_total();
  }

  /// Drops masses below `threshold`; returns the removed mass.
  double drop_below(double threshold) {
    double removed = 0.0;
    std::erase_if(masses_, [&](double m) {
      if (m < threshold) {
        removed += m;
        return true;
      }
      return false;
    });
    recompute_total();
    return removed;
  }

  /// Replaces the contents without validation (engine-internal).
  void assign_unchecked(std::vector<double> masses) {
    masses_ = std::move(masses);
    recompute_total();
  }

 private:
  void recompute_total() {
    long double s = 0.0L;
    for (double m : masses_) s += m;
    total_ = static_cast<double>(s);
  }

  std::vector<double> masses_;
  double total_ = 0.0;
};

}  // namespace hierperc
