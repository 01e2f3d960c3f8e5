#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netinfer/bits.hpp"
#include "netinfer/errors.hpp"

namespace netinfer {

/**
 * @brief Units 0..N-1 with their fixed neighborhoods.
 *
 * Each neighborhood contains its own unit. Construction precomputes the
 * overlap indicator c(i,j) = 1{N_i and N_j intersect} for all pairs, both as a
 * bit matrix and as a sorted list of unordered pairs (i < j).
 */
class Population {
 public:
  Population() = default;

  explicit Population(std::vector<std::vector<int>> neighborhoods)
      : neighborhoods_(std::move(neighborhoods)) {
    const int n = static_cast<int>(neighborhoods_.size());
    if (n < 2) throw ValidationError("population needs at least 2 units, got " + std::to_string(n));
    nbhd_bits_ = BitMatrix(n);
    member_bits_ = BitMatrix(n);
    for (int i = 0; i < n; ++i) {
      auto& nb = neighborhoods_[static_cast<std::size_t>(i)];
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      for (int k : nb) {
        if (k < 0 || k >= n) {
          throw ValidationError("neighborhood of unit " + std::to_string(i) + " references unit " +
                                std::to_string(k) + " outside 0.." + std::to_string(n - 1));
        }
        nbhd_bits_.set(i, k, true);
        member_bits_.set(k, i, true);
      }
      if (!nbhd_bits_.get(i, i)) {
        throw ValidationError("neighborhood of unit " + std::to_string(i) + " does not contain the unit itself");
      }
    }
    // c(i,j) = 1 iff j belongs to some neighborhood that shares a member with N_i,
    // i.e. the row of i is the union of member sets of all k in N_i.
    overlap_bits_ = BitMatrix(n);
    for (int i = 0; i < n; ++i) {
      auto dst = overlap_bits_.row(i);
      for (int k : neighborhoods_[static_cast<std::size_t>(i)]) {
        auto src = member_bits_.row(k);
        for (std::size_t w = 0; w < dst.size(); ++w) dst[w] |= src[w];
      }
      overlap_bits_.set(i, i, false);
    }
    partners_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      for_each_bit(overlap_bits_.row(i), [&](int j) {
        partners_[static_cast<std::size_t>(i)].push_back(j);
        if (i < j) overlap_pairs_.emplace_back(i, j);
      });
    }
  }

  [[nodiscard]] int size() const noexcept { return static_cast<int>(neighborhoods_.size()); }

  [[nodiscard]] std::span<const int> neighborhood(int i) const { return neighborhoods_.at(static_cast<std::size_t>(i)); }
  [[nodiscard]] const std::vector<std::vector<int>>& neighborhoods() const noexcept { return neighborhoods_; }

  /// Unchecked c(i,j) for i != j.
  [[nodiscard]] bool overlaps(int i, int j) const noexcept { return overlap_bits_.get(i, j); }

  /// Checked c(i,j).
  [[nodiscard]] int overlap_indicator(int i, int j) const {
    check_pair(i, j);
    return overlaps(i, j) ? 1 : 0;
  }

  [[nodiscard]] bool in_neighborhood(int i, int k) const noexcept { return nbhd_bits_.get(i, k); }

  /// Unordered overlapping pairs (i < j), lexicographically sorted.
  [[nodiscard]] std::span<const std::pair<int, int>> overlap_pairs() const noexcept { return overlap_pairs_; }

  /// Sorted j != i with c(i,j) = 1.
  [[nodiscard]] std::span<const int> overlap_partners(int i) const noexcept {
    return partners_[static_cast<std::size_t>(i)];
  }

  [[nodiscard]] std::span<const Word> neighborhood_bits(int i) const noexcept { return nbhd_bits_.row(i); }
  /// Bits b such that k is in N_b.
  [[nodiscard]] std::span<const Word> member_bits(int k) const noexcept { return member_bits_.row(k); }
  [[nodiscard]] std::span<const Word> overlap_bits(int i) const noexcept { return overlap_bits_.row(i); }

  void check_unit(int i) const {
    if (i < 0 || i >= size()) {
      throw ValidationError("unit index " + std::to_string(i) + " out of range 0.." + std::to_string(size() - 1));
    }
  }
  void check_pair(int i, int j) const {
    check_unit(i);
    check_unit(j);
    if (i == j) throw ValidationError("pair indices must differ (both " + std::to_string(i) + ")");
  }

 private:
  std::vector<std::vector<int>> neighborhoods_;
  BitMatrix nbhd_bits_;
  BitMatrix member_bits_;
  BitMatrix overlap_bits_;
  std::vector<std::pair<int, int>> overlap_pairs_;
  std::vector<std::vector<int>> partners_;
};

/// Every unit's neighborhood is just itself; no pair overlaps.
inline Population isolated_population(int n) {
  std::vector<std::vector<int>> nb(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nb[static_cast<std::size_t>(i)] = {i};
  return Population(std::move(nb));
}

/// One neighborhood containing everyone; every pair overlaps.
inline Population complete_population(int n) {
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  return Population(std::vector<std::vector<int>>(static_cast<std::size_t>(n), all));
}

}  // namespace netinfer
