#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace netinfer {

using Word = std::uint64_t;

inline constexpr std::size_t words_for(std::size_t n_bits) noexcept { return (n_bits + 63) / 64; }

inline bool test_bit(std::span<const Word> row, std::size_t k) noexcept {
  return (row[k >> 6] >> (k & 63)) & 1U;
}

/// Calls f(k) for every set bit k of the row, in increasing order.
template <typename F>
void for_each_bit(std::span<const Word> row, F&& f) {
  for (std::size_t w = 0; w < row.size(); ++w) {
    Word bits = row[w];
    while (bits != 0) {
      const int tz = std::countr_zero(bits);
      f(static_cast<int>(w * 64 + static_cast<std::size_t>(tz)));
      bits &= bits - 1;
    }
  }
}

/// Square bit matrix, one packed row per unit.
class BitMatrix {
 public:
  BitMatrix() = default;
  explicit BitMatrix(int n) : n_(n), stride_(words_for(static_cast<std::size_t>(n))),
                              bits_(static_cast<std::size_t>(n) * stride_, 0) {}

  [[nodiscard]] int size() const noexcept { return n_; }
  [[nodiscard]] std::size_t stride() const noexcept { return stride_; }

  [[nodiscard]] bool get(int i, int j) const noexcept {
    return (bits_[static_cast<std::size_t>(i) * stride_ + (static_cast<std::size_t>(j) >> 6)] >> (j & 63)) & 1U;
  }
  void set(int i, int j, bool v) noexcept {
    Word& w = bits_[static_cast<std::size_t>(i) * stride_ + (static_cast<std::size_t>(j) >> 6)];
    const Word mask = Word{1} << (j & 63);
    w = v ? (w | mask) : (w & ~mask);
  }
  [[nodiscard]] std::span<const Word> row(int i) const noexcept {
    return {bits_.data() + static_cast<std::size_t>(i) * stride_, stride_};
  }
  [[nodiscard]] std::span<Word> row(int i) noexcept {
    return {bits_.data() + static_cast<std::size_t>(i) * stride_, stride_};
  }

  friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

 private:
  int n_ = 0;
  std::size_t stride_ = 0;
  std::vector<Word> bits_;
};

}  // namespace netinfer
