#pragma once

#include <cstdint>

namespace frontier {

// Counter-based generator: the n-th draw of a stream is a pure function of
// (key, n). Streams for Monte-Carlo replicates are keyed by
// (master seed, replicate index), so results never depend on scheduling.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) + stream * kGolden)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return mix(key_ + (counter_++) * kGolden); }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Independent child stream, e.g. one per replicate.
  CounterRng split(std::uint64_t stream) const noexcept {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(stream + 0x3c6ef372fe94f82bULL));
    return child;
  }

  std::uint64_t position() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace frontier
