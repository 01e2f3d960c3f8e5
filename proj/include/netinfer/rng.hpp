#pragma once

#include <cstdint>
#include <limits>

namespace netinfer {

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/**
 * @brief Counter-based 64-bit generator (SplitMix64 output function).
 *
 * The n-th output is a pure function of (key, n), so independent substreams
 * are obtained by deriving a new key; nothing is shared between streams.
 * Satisfies UniformRandomBitGenerator.
 */
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t seed = 0) noexcept
      : key_(detail::mix64(seed + detail::kGolden)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Independent stream identified by `stream_id`, starting at counter zero.
  [[nodiscard]] constexpr CounterRng substream(std::uint64_t stream_id) const noexcept {
    CounterRng child;
    child.key_ = detail::mix64(key_ ^ detail::mix64(stream_id * detail::kGolden + 0x632BE59BD9B4E019ULL));
    return child;
  }

  [[nodiscard]] constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace netinfer
