#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace mvl {

/// Counter-based, splittable random generator.
///
/// Algorithm (fixed, part of the reproducibility contract):
///   output(key, n) = mix64(key + (n + 1) * 0x9E3779B97F4A7C15)
/// where mix64 is the SplitMix64 finalizer
///   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
///   z ^= z >> 27; z *= 0x94D049BB133111EB;
///   z ^= z >> 31.
/// The n-th draw of a stream therefore equals the n-th SplitMix64 output
/// seeded with `key`. `split(tag)` derives an independent stream with key
/// mix64(key ^ mix64(tag + 0x632BE59BD9B4E019)), so child streams depend
/// only on (parent key, tag) and never on how many draws the parent made.
///
/// Doubles are drawn from the top 53 bits; normals use Box-Muller with no
/// cached second value. Nothing here depends on the standard library's
/// distribution implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key = 0, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n); n > 0. Rejection sampled, unbiased.
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Normal with standard deviation `stddev`, redrawn until |x| <= 2 * stddev.
  double truncated_normal(double stddev);

  Rng split(std::uint64_t tag) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix64(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Fisher-Yates shuffle driven by `rng.below`.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace mvl
