#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mycoeval {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seeded random stream with fully specified output on every platform.
///
/// The engine is std::mt19937_64, whose bit sequence is fixed by the
/// standard. The standard distributions are not, so the helpers below
/// derive doubles and bounded integers from raw engine words directly.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  /// Stream number `index` of the family identified by `seed`.
  Stream(std::uint64_t seed, std::uint64_t index) : engine_(mix64(seed ^ mix64(index + 1))) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi].
  int between(int lo, int hi);
  bool bernoulli(double p);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mycoeval
