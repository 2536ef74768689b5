#pragma once

#include <cstdint>
#include <limits>

namespace qfedtd {

/// Tags that separate the independent sources of randomness. Two draws that
/// differ in purpose never share a stream, whatever the agent or iteration.
enum class StreamPurpose : std::uint64_t {
  Transition = 1,
  Quantizer = 2,
  Erasure = 3,
  Generator = 4,
  MonteCarlo = 5,
  PropertyTrials = 6,
};

/// Counter-based random stream. The starting position is a hash of
/// (master seed, purpose, agent, counter), so any (agent, iteration, purpose)
/// triple addresses a fixed stream regardless of which thread consumes it or
/// in which order. The sequence itself is SplitMix64.
///
/// Satisfies UniformRandomBitGenerator, so it plugs into <random>
/// distributions where bit-level portability is not required.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t master_seed,
                        StreamPurpose purpose = StreamPurpose::MonteCarlo,
                        std::uint64_t agent = 0, std::uint64_t counter = 0) noexcept
      : state_(mix(master_seed ^
                   mix(static_cast<std::uint64_t>(purpose) ^
                       mix(agent ^ mix(counter + kGolden))))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    state_ += kGolden;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace qfedtd
