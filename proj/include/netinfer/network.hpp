#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netinfer/bits.hpp"
#include "netinfer/errors.hpp"

namespace netinfer {

/**
 * @brief Binary adjacency matrix with zero diagonal.
 *
 * Stored as packed bit rows. Directed networks keep a transposed copy so that
 * both out- and in-neighbor sets are available as bit rows; undirected
 * networks keep one symmetric matrix.
 */
class Network {
 public:
  Network() = default;
  Network(int n, bool directed) : n_(n), directed_(directed), out_(n), in_(directed ? n : 0) {}

  [[nodiscard]] int size() const noexcept { return n_; }
  [[nodiscard]] bool directed() const noexcept { return directed_; }

  [[nodiscard]] bool has_edge(int i, int j) const noexcept { return out_.get(i, j); }
  [[nodiscard]] bool operator()(int i, int j) const noexcept { return out_.get(i, j); }

  /// Sets z(i,j); for undirected networks also z(j,i).
  void set_edge(int i, int j, bool v) {
    if (i == j) {
      if (v) throw ValidationError("self-loop at unit " + std::to_string(i));
      return;
    }
    out_.set(i, j, v);
    if (directed_) {
      in_.set(j, i, v);
    } else {
      out_.set(j, i, v);
    }
  }

  [[nodiscard]] std::span<const Word> out_bits(int i) const noexcept { return out_.row(i); }
  [[nodiscard]] std::span<const Word> in_bits(int j) const noexcept { return directed_ ? in_.row(j) : out_.row(j); }

  /// Number of edges: unordered pairs if undirected, ordered pairs if directed.
  [[nodiscard]] std::int64_t edge_count() const noexcept {
    std::int64_t c = 0;
    for (int i = 0; i < n_; ++i) {
      for (Word w : out_.row(i)) c += std::popcount(w);
    }
    return directed_ ? c : c / 2;
  }

  [[nodiscard]] int out_degree(int i) const noexcept {
    int c = 0;
    for (Word w : out_.row(i)) c += std::popcount(w);
    return c;
  }
  [[nodiscard]] int in_degree(int j) const noexcept {
    int c = 0;
    for (Word w : in_bits(j)) c += std::popcount(w);
    return c;
  }

  /// Edge list; undirected edges once with src < dst. Lexicographic order.
  [[nodiscard]] std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n_; ++i) {
      for_each_bit(out_.row(i), [&](int j) {
        if (directed_ || i < j) out.emplace_back(i, j);
      });
    }
    return out;
  }

  friend bool operator==(const Network& a, const Network& b) {
    return a.n_ == b.n_ && a.directed_ == b.directed_ && a.out_ == b.out_;
  }

 private:
  int n_ = 0;
  bool directed_ = false;
  BitMatrix out_;
  BitMatrix in_;
};

}  // namespace netinfer
