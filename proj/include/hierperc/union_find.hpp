// SPDX-License-Identifier: Apache-2.0
//
// Disjoint-set forest over the vertices of an n-block.

#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hierperc {

class ClusterForest {
 public:
  using index_type = std::uint32_t;

  ClusterForest() = default;

  explicit ClusterForest(std::uint64_t n) { reset(n); }

  void reset(std::uint64_t n) {
    if (n == 0 || n > (std::uint64_t{1} << 32))
      throw std::out_of_range("ClusterForest: vertex count must be in [1, 2^32]");
    parent_.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) parent_[i] = static_cast<index_type>(i);
    size_.assign(n, 1);
    flags_.assign(n, 0);
    tags_.clear();
  }

  [[nodiscard]] std::uint64_t vertex_count() const { return parent_.size(); }

  /// Marks v as tracked; the root of a tagged cluster wins union ties.
  void add_tag(std::uint64_t v) {
    check(v);
    tags_.push_back(v);
    flags_[find(v)] |= kTagBit;
  }

  [[nodiscard]] const std::vector<std::uint64_t>& tags() const { return tags_; }

  index_type find(std::uint64_t v) {
    auto x = static_cast<index_type>(v);
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// Root lookup without path compression (usable on a const forest).
  [[nodiscard]] index_type find_const(std::uint64_t v) const {
    auto x = static_cast<index_type>(v);
    while (parent_[x] != x) x = parent_[x];
    return x;
  }

  struct UnionResult {
    bool merged = false;
    std::uint64_t size_a = 0;
    std::uint64_t size_b = 0;
    index_type root = 0;
  };

  /// Union by rank; on equal rank a tagged root is kept, otherwise the
  /// first argument's root.
  UnionResult unite(std::uint64_t a, std::uint64_t b) {
    index_type ra = find(a), rb = find(b);
    UnionResult r;
    r.size_a = size_[ra];
    r.size_b = size_[rb];
    if (ra == rb) {
      r.root = ra;
      return r;
    }
    const int ka = rank(ra), kb = rank(rb);
    bool a_wins = ka > kb || (ka == kb && (tagged(ra) || !tagged(rb)));
    if (!a_wins) std::swap(ra, rb);
    parent_[rb] = ra;
    size_[ra] += size_[rb];
    if (ka == kb) flags_[ra] = static_cast<std::uint8_t>((flags_[ra] & kTagBit) | (std::max(ka, kb) + 1));
    if (tagged(rb)) flags_[ra] |= kTagBit;
    r.merged = true;
    r.root = ra;
    return r;
  }

  bool connected(std::uint64_t a, std::uint64_t b) { return find(a) == find(b); }

  std::uint64_t cluster_size(std::uint64_t v) { return size_[find(v)]; }

  [[nodiscard]] bool is_root(std::uint64_t v) const { return parent_[v] == v; }

  /// Size stored at a root (meaningless for non-roots).
  [[nodiscard]] std::uint64_t root_size(std::uint64_t r) const { return size_[r]; }

  /// Sizes of all clusters in arbitrary order.
  [[nodiscard]] std::vector<std::uint64_t> cluster_sizes() const {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < parent_.size(); ++i)
      if (parent_[i] == i) out.push_back(size_[i]);
    return out;
  }

  /// Sizes of clusters restricted to the vertex range [lo, hi).
  std::vector<std::uint64_t> cluster_sizes_in(std::uint64_t lo, std::uint64_t hi) {
    std::vector<index_type> roots;
    roots.reserve(hi - lo);
    for (std::uint64_t v = lo; v < hi; ++v) roots.push_back(find(v));
    std::sort(roots.begin(), roots.end());
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < roots.size();) {
      std::size_t j = i;
      while (j < roots.size() && roots[j] == roots[i]) ++j;
      out.push_back(j - i);
      i = j;
    }
    return out;
  }

 private:
  static constexpr std::uint8_t kTagBit = 0x80;
  [[nodiscard]] int rank(index_type r) const { return flags_[r] & 0x7f; }
  [[nodiscard]] bool tagged(index_type r) const { return (flags_[r] & kTagBit) != 0; }
  void check(std::uint64_t v) const {
    if (v >= parent_.size()) throw std::out_of_range("ClusterForest: vertex out of range");
  }

  std::vector<index_type> parent_;
  std::vector<index_type> size_;
  std::vector<std::uint8_t> flags_;
  std::vector<std::uint64_t> tags_;
};

}  // namespace hierperc
